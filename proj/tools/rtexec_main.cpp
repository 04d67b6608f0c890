// rtexec: validate system descriptions, probe scheduler capabilities, run
// pub/sub executor experiments, sweep them and render the overhead figures.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rtexec/bench.hpp"
#include "rtexec/executors.hpp"
#include "rtexec/model.hpp"
#include "rtexec/report.hpp"
#include "rtexec/schedctl.hpp"
#include "rtexec/system_json.hpp"

namespace fs = std::filesystem;
using namespace rtexec;

namespace {

// exit codes: 0 ok, 1 domain violation, 2 usage/malformed input
constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

int cmd_validate(const std::string& path, bool strict_dangling) {
    SystemDescription desc;
    try {
        desc = load_system_file(path);
    } catch (const SystemParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (auto v = validate_system(desc); !v.ok()) {
        std::cout << "invalid system description:\n" << v.to_string();
        return kViolation;
    }
    try {
        BuildGraphOptions opts;
        opts.dangling_topic_is_error = strict_dangling;
        const auto graph = build_graph(desc, opts);
        std::cout << "graph: " << graph.vertices.size() << " callbacks, " << graph.edges.size()
                  << " edges\n";
        std::cout << "topological order:";
        for (uint32_t v : graph.topo_order) std::cout << ' ' << graph.vertices[v];
        std::cout << '\n';
        for (const auto& w : graph.warnings) std::cout << "warning: " << w << '\n';

        const auto report = validate_isolation_constraints(desc, graph);
        if (!report.empty()) {
            std::cout << report.to_string();
            return kViolation;
        }
        std::cout << "constraints: ok\n";
        return kOk;
    } catch (const CycleError& e) {
        std::cout << e.what() << '\n';
        return kViolation;
    } catch (const DanglingTopicError& e) {
        std::cout << e.what() << '\n';
        return kViolation;
    }
}

int cmd_probe(bool as_json) {
    const auto report = schedctl::probe_capabilities();
    if (as_json) {
        std::cout << report.to_json() << '\n';
    } else {
        std::cout << "deadline:  " << to_string(report.deadline) << '\n'
                  << "fifo_rt:   " << to_string(report.fifo_rt) << '\n'
                  << "fair:      " << to_string(report.fair) << '\n'
                  << "affinity:  " << to_string(report.affinity) << '\n'
                  << "cores:     " << report.core_count << '\n'
                  << "fallback_forced: " << (report.fallback_forced ? "yes" : "no") << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"real-time pub/sub executor framework and overhead benchmark"};
    app.set_config("--config", "", "read options from a config file");
    app.require_subcommand(1);

    // validate
    std::string validate_path;
    bool strict_dangling = false;
    auto* validate = app.add_subcommand("validate", "check a system description file");
    validate->add_option("path", validate_path, "system description JSON")->required();
    validate->add_flag("--strict-dangling", strict_dangling,
                       "treat subscriptions without publishers as errors");

    // probe
    bool probe_json = false;
    auto* probe = app.add_subcommand("probe", "report scheduler capabilities");
    probe->add_flag("--json", probe_json, "print as JSON");

    // run
    bench::ExperimentConfig cfg;
    std::string run_executor = "ste", run_mode = "intra", run_out, run_role;
    auto* run = app.add_subcommand("run", "run one experiment cell");
    run->add_option("--executor", run_executor, "ste|mte|cie")->capture_default_str();
    run->add_option("--workers", cfg.workers, "multi-threaded workers (0 = hardware)")
        ->capture_default_str();
    run->add_option("--n", cfg.n_callbacks, "callbacks per node")->capture_default_str();
    run->add_option("--mode", run_mode, "intra|inter")->capture_default_str();
    run->add_option("--period-ns", cfg.publish_period_ns, "publish period")
        ->capture_default_str();
    run->add_option("--duration", cfg.duration_s, "measured seconds (>= 5)")
        ->capture_default_str();
    run->add_option("--warmup", cfg.warmup_s, "excluded warm-up seconds")->capture_default_str();
    run->add_option("--payload", cfg.payload_bytes, "payload bytes")->capture_default_str();
    run->add_option("--busywork-ns", cfg.handler_busywork_ns, "handler busy-work")
        ->capture_default_str();
    run->add_option("--seed", cfg.seed, "run tag recorded in the result");
    run->add_flag("!--no-stagger", cfg.stagger_timer_phases, "align timer phases instead");
    run->add_option("--out", run_out, "write result JSON here (default stdout)");
    run->add_option("--role", run_role)->group("");  // internal

    // sweep
    std::string sweep_executors = "ste,mte,cie", sweep_modes = "intra,inter";
    std::string sweep_nlist = "1,4,8,12,16,20,24", sweep_out = "sweep.csv";
    bool sweep_force = false;
    bench::ExperimentConfig sweep_cfg;
    auto* sweepc = app.add_subcommand("sweep", "run the full experiment grid");
    sweepc->add_option("--executors", sweep_executors, "comma list of ste|mte|cie")
        ->capture_default_str();
    sweepc->add_option("--n-list", sweep_nlist, "comma list of N values")->capture_default_str();
    sweepc->add_option("--modes", sweep_modes, "comma list of intra|inter")
        ->capture_default_str();
    sweepc->add_option("--duration", sweep_cfg.duration_s, "seconds per cell (>= 5)")
        ->capture_default_str();
    sweepc->add_option("--warmup", sweep_cfg.warmup_s, "warm-up seconds per cell")
        ->capture_default_str();
    sweepc->add_option("--period-ns", sweep_cfg.publish_period_ns, "publish period")
        ->capture_default_str();
    sweepc->add_option("--payload", sweep_cfg.payload_bytes, "payload bytes")
        ->capture_default_str();
    sweepc->add_option("--busywork-ns", sweep_cfg.handler_busywork_ns, "handler busy-work")
        ->capture_default_str();
    sweepc->add_option("--workers", sweep_cfg.workers, "multi-threaded workers (0 = hardware)")
        ->capture_default_str();
    sweepc->add_option("--seed", sweep_cfg.seed, "run tag");
    sweepc->add_option("--out", sweep_out, "output CSV path")->capture_default_str();
    sweepc->add_flag("--force", sweep_force, "overwrite an existing output file");

    // report
    std::string report_csv, report_dir = ".";
    auto* reportc = app.add_subcommand("report", "render plots and ratio summary from a sweep CSV");
    reportc->add_option("csv", report_csv, "sweep CSV path")->required();
    reportc->add_option("--out-dir", report_dir, "directory for plot files")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kUsage;
    }

    try {
        if (*validate) return cmd_validate(validate_path, strict_dangling);
        if (*probe) return cmd_probe(probe_json);

        if (*run) {
            if (run_role == "subscriber") return bench::run_subscriber_role();
            if (!run_role.empty()) {
                std::cerr << "error: unknown --role " << run_role << '\n';
                return kUsage;
            }
            if (auto k = executor_kind_from_string(run_executor)) {
                cfg.executor = *k;
            } else {
                std::cerr << "error: unknown executor " << run_executor << '\n';
                return kUsage;
            }
            if (auto m = bench::process_mode_from_string(run_mode)) {
                cfg.process_mode = *m;
            } else {
                std::cerr << "error: unknown mode " << run_mode << '\n';
                return kUsage;
            }
            if (auto v = cfg.validate(); !v.ok()) {
                std::cerr << "invalid config:\n" << v.to_string();
                return kUsage;
            }
            bench::RunOptions opts;
            opts.log = [](const std::string& line) { std::cerr << line << '\n'; };
            const auto result = bench::run_experiment(cfg, opts);
            if (run_out.empty()) {
                std::cout << result.to_json() << '\n';
            } else {
                std::ofstream of(run_out);
                of << result.to_json() << '\n';
                if (!of) {
                    std::cerr << "error: cannot write " << run_out << '\n';
                    return kUsage;
                }
            }
            return result.valid ? kOk : kViolation;
        }

        if (*sweepc) {
            if (fs::exists(sweep_out) && !sweep_force) {
                std::cerr << "error: " << sweep_out << " exists (use --force to overwrite)\n";
                return kUsage;
            }
            std::vector<ExecutorKind> executors;
            for (auto& tok : CLI::detail::split(sweep_executors, ',')) {
                if (auto k = executor_kind_from_string(tok)) {
                    executors.push_back(*k);
                } else {
                    std::cerr << "error: unknown executor " << tok << '\n';
                    return kUsage;
                }
            }
            std::vector<bench::ProcessMode> modes;
            for (auto& tok : CLI::detail::split(sweep_modes, ',')) {
                if (auto m = bench::process_mode_from_string(tok)) {
                    modes.push_back(*m);
                } else {
                    std::cerr << "error: unknown mode " << tok << '\n';
                    return kUsage;
                }
            }
            std::vector<int> n_list;
            for (auto& tok : CLI::detail::split(sweep_nlist, ','))
                n_list.push_back(std::stoi(tok));
            if (auto v = sweep_cfg.validate(); !v.ok()) {
                std::cerr << "invalid config:\n" << v.to_string();
                return kUsage;
            }

            std::ofstream of(sweep_out);
            if (!of) {
                std::cerr << "error: cannot write " << sweep_out << '\n';
                return kUsage;
            }
            of << bench::kSweepCsvHeader << '\n';
            size_t done = 0, valid = 0;
            const size_t total = executors.size() * modes.size() * n_list.size();
            bench::SweepOptions opts;
            opts.run.log = [](const std::string& line) { std::cerr << "  " << line << '\n'; };
            opts.on_cell = [&](const bench::SweepCell& cell, const bench::SweepRow& row) {
                ++done;
                valid += row.valid ? 1 : 0;
                of << bench::row_to_csv(row) << '\n';
                of.flush();
                std::cerr << "[" << done << "/" << total << "] " << to_string(cell.executor)
                          << " " << to_string(cell.mode) << " N=" << cell.n
                          << (row.valid ? " ok" : " INVALID") << '\n';
            };
            bench::sweep(sweep_cfg, n_list, executors, modes, opts);
            std::cout << "wrote " << sweep_out << " (" << valid << "/" << total
                      << " valid cells)\n";
            return valid > 0 ? kOk : kViolation;
        }

        if (*reportc) {
            std::ifstream in(report_csv);
            if (!in) {
                std::cerr << "error: cannot read " << report_csv << '\n';
                return kUsage;
            }
            std::vector<bench::SweepRow> rows;
            try {
                rows = bench::parse_sweep_csv(in);
            } catch (const bench::SchemaMismatch& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kUsage;
            }
            fs::create_directories(report_dir);
            for (const auto& plot : report::render_plots(rows)) {
                const auto path = fs::path(report_dir) / plot.filename;
                std::ofstream of(path);
                of << plot.svg;
                if (!of) {
                    std::cerr << "error: cannot write " << path.string() << '\n';
                    return kUsage;
                }
                std::cout << "wrote " << path.string() << '\n';
            }
            const auto summary = report::render_summary(rows);
            const auto summary_path = fs::path(report_dir) / "summary.txt";
            std::ofstream of(summary_path);
            of << summary;
            std::cout << "wrote " << summary_path.string() << '\n' << summary;
            return kOk;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kViolation;
    }
    return kUsage;
}
