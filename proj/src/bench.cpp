#include "rtexec/bench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#ifdef __linux__
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>
extern char** environ;
#endif

#include <json.hpp>

#include "rtexec/system_json.hpp"

namespace rtexec::bench {

using nlohmann::json;

const char* to_string(ProcessMode m) { return m == ProcessMode::Intra ? "intra" : "inter"; }

std::optional<ProcessMode> process_mode_from_string(const std::string& s) {
    if (s == "intra") return ProcessMode::Intra;
    if (s == "inter") return ProcessMode::Inter;
    return std::nullopt;
}

const char* to_string(SwitchMetric m) {
    return m == SwitchMetric::UserKernel ? "user_kernel_switches" : "context_switches";
}

ValidationResult ExperimentConfig::validate() const {
    ValidationResult r;
    if (n_callbacks < 1) r.violations.push_back({"n_callbacks", "must be >= 1"});
    if (duration_s < 5) r.violations.push_back({"duration_s", "must be >= 5 s"});
    if (publish_period_ns == 0) r.violations.push_back({"publish_period_ns", "must be > 0"});
    if (warmup_s < 0) r.violations.push_back({"warmup_s", "must be >= 0"});
    for (const auto& [id, attr] : sched_attrs) {
        auto v = validate_sched_attr(attr);
        for (auto& violation : v.violations)
            r.violations.push_back({"sched_attrs[" + id + "]." + violation.field, violation.message});
    }
    return r;
}

namespace {

json config_to_json_obj(const ExperimentConfig& c) {
    json j;
    j["executor"] = to_string(c.executor);
    j["workers"] = c.workers;
    j["n_callbacks"] = c.n_callbacks;
    j["process_mode"] = to_string(c.process_mode);
    j["publish_period_ns"] = c.publish_period_ns;
    j["duration_s"] = c.duration_s;
    j["warmup_s"] = c.warmup_s;
    j["payload_bytes"] = c.payload_bytes;
    j["handler_busywork_ns"] = c.handler_busywork_ns;
    j["strict"] = c.strict;
    j["stagger_timer_phases"] = c.stagger_timer_phases;
    j["seed"] = c.seed;
    if (!c.sched_attrs.empty()) {
        json attrs = json::object();
        for (const auto& [id, attr] : c.sched_attrs) attrs[id] = json::parse(sched_attr_to_json(attr));
        j["sched_attrs"] = attrs;
    }
    return j;
}

ExperimentConfig config_from_json_obj(const json& j) {
    ExperimentConfig c;
    if (auto k = executor_kind_from_string(j.at("executor").get<std::string>())) c.executor = *k;
    c.workers = j.value("workers", 0);
    c.n_callbacks = j.at("n_callbacks").get<int>();
    if (auto m = process_mode_from_string(j.at("process_mode").get<std::string>()))
        c.process_mode = *m;
    c.publish_period_ns = j.value("publish_period_ns", uint64_t{10'000'000});
    c.duration_s = j.value("duration_s", 30.0);
    c.warmup_s = j.value("warmup_s", 2.0);
    c.payload_bytes = j.value("payload_bytes", uint32_t{8});
    c.handler_busywork_ns = j.value("handler_busywork_ns", uint64_t{0});
    c.strict = j.value("strict", true);
    c.stagger_timer_phases = j.value("stagger_timer_phases", true);
    c.seed = j.value("seed", uint64_t{0});
    if (j.contains("sched_attrs"))
        for (const auto& [id, attr] : j.at("sched_attrs").items())
            c.sched_attrs[id] = sched_attr_from_json(attr.dump());
    return c;
}

}  // namespace

std::string ExperimentConfig::to_json() const { return config_to_json_obj(*this).dump(); }

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
    return config_from_json_obj(json::parse(json_text));
}

std::string ExperimentResult::to_json() const {
    json j;
    j["config"] = config_to_json_obj(config);
    j["rates"] = json::parse(rates.to_json());
    j["callbacks"] = json::array();
    for (const auto& cb : callbacks) {
        json c;
        c["id"] = cb.id;
        c["executions"] = cb.executions;
        c["overruns"] = cb.overruns;
        c["max_concurrency"] = cb.max_concurrency;
        c["thread_identity_count"] = cb.thread_identity_count;
        c["queue_drops"] = cb.queue_drops;
        if (!cb.enforcement.empty()) c["enforcement"] = cb.enforcement;
        j["callbacks"].push_back(std::move(c));
    }
    j["waitset_lock_acquisitions"] = waitset_lock_acquisitions;
    j["delivery_crossings"] = delivery_crossings;
    j["valid"] = valid;
    if (!error.empty()) j["error"] = error;
    return j.dump(2);
}

SystemDescription make_benchmark_system(const ExperimentConfig& cfg, BenchHalf half) {
    SystemDescription desc;
    const int n = cfg.n_callbacks;
    for (int i = 0; i < n; ++i) desc.topics.push_back("/bench/" + std::to_string(i));

    const bool want_pub = half != BenchHalf::SubscriberOnly;
    const bool want_sub = half != BenchHalf::PublisherOnly;

    if (want_pub) {
        NodeSpec node;
        node.id = "publisher";
        for (int i = 0; i < n; ++i) {
            CallbackSpec cb;
            cb.id = "pub" + std::to_string(i);
            cb.kind = TimerKind{std::chrono::nanoseconds(cfg.publish_period_ns)};
            cb.group = "gp" + std::to_string(i);
            cb.handler.busywork = std::chrono::nanoseconds(cfg.handler_busywork_ns);
            cb.handler.payload_bytes = cfg.payload_bytes;
            if (auto it = cfg.sched_attrs.find(cb.id); it != cfg.sched_attrs.end())
                cb.sched = it->second;
            desc.groups.push_back({cb.group, true, {cb.id}});
            node.publications.emplace_back(cb.id, desc.topics[i]);
            node.callbacks.push_back(std::move(cb));
        }
        desc.nodes.push_back(std::move(node));
    }
    if (want_sub) {
        NodeSpec node;
        node.id = "subscriber";
        for (int i = 0; i < n; ++i) {
            CallbackSpec cb;
            cb.id = "sub" + std::to_string(i);
            cb.kind = SubscriptionKind{desc.topics[i]};
            cb.group = "gs" + std::to_string(i);
            cb.handler.busywork = std::chrono::nanoseconds(cfg.handler_busywork_ns);
            cb.handler.payload_bytes = cfg.payload_bytes;
            if (auto it = cfg.sched_attrs.find(cb.id); it != cfg.sched_attrs.end())
                cb.sched = it->second;
            desc.groups.push_back({cb.group, true, {cb.id}});
            node.callbacks.push_back(std::move(cb));
        }
        desc.nodes.push_back(std::move(node));
    }
    return desc;
}

namespace {

ExecutorOptions executor_options_for(const ExperimentConfig& cfg) {
    ExecutorOptions eo;
    eo.kind = cfg.executor;
    eo.workers = cfg.workers;
    eo.strict = cfg.strict;
    eo.stagger_timer_phases = cfg.stagger_timer_phases;
    eo.sched_overrides = cfg.sched_attrs;
    return eo;
}

void sleep_s(double seconds) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

/// 10 Hz sampling; the first/last pair defines the measurement window.
std::vector<metrics::MetricsSample> collect_samples(double duration_s,
                                                    const std::function<bool()>& keep_going) {
    std::vector<metrics::MetricsSample> samples;
    const auto t0 = std::chrono::steady_clock::now();
    const auto end = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(duration_s));
    samples.push_back(metrics::sample_process());
    while (std::chrono::steady_clock::now() < end && (!keep_going || keep_going())) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        samples.push_back(metrics::sample_process());
    }
    samples.push_back(metrics::sample_process());
    return samples;
}

void fill_callback_results(const ExecutorStats& stats, std::vector<CallbackResult>& out) {
    for (const auto& cb : stats.callbacks) {
        CallbackResult r;
        r.id = cb.id;
        r.executions = cb.executions;
        r.overruns = cb.overruns;
        r.max_concurrency = cb.max_concurrency;
        r.thread_identity_count = cb.thread_ids.size();
        r.queue_drops = cb.queue_drops;
        if (cb.enforcement) r.enforcement = schedctl::to_string(cb.enforcement->kind);
        out.push_back(std::move(r));
    }
}

std::string self_exe_path() {
#ifdef __linux__
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n > 0) return std::string(buf, static_cast<size_t>(n));
#endif
    return {};
}

struct ScratchDir {
    std::string path;
    explicit ScratchDir(const std::string& base) {
        std::string templ = (base.empty() ? std::string("/tmp") : base) + "/rtexec-XXXXXX";
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
#ifdef __linux__
        if (!::mkdtemp(buf.data()))
            throw SubprocessError("mkdtemp failed: " + std::string(std::strerror(errno)));
#endif
        path = buf.data();
    }
    ~ScratchDir() {
#ifdef __linux__
        if (!path.empty()) {
            ::unlink((path + "/bus.sock").c_str());
            ::unlink((path + "/subscriber.json").c_str());
            ::rmdir(path.c_str());
        }
#endif
    }
};

#ifdef __linux__
pid_t spawn_subscriber(const std::string& exe, const std::string& cell_json) {
    ::setenv(kCellConfigEnv, cell_json.c_str(), 1);
    std::vector<std::string> args = {exe, "run", "--role", "subscriber"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ);
    ::unsetenv(kCellConfigEnv);
    if (rc != 0)
        throw SubprocessError("posix_spawn " + exe + ": " + std::string(std::strerror(rc)));
    return pid;
}

int wait_child(pid_t pid, double timeout_s) {
    const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    for (;;) {
        int status = 0;
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) {
            if (WIFEXITED(status)) return WEXITSTATUS(status);
            return -1;
        }
        if (r < 0) return -1;
        if (std::chrono::steady_clock::now() > end) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            return -2;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}
#endif

struct ChildReport {
    std::vector<metrics::MetricsSample> samples;
    std::vector<CallbackResult> callbacks;
    uint64_t fallbacks = 0;
    uint64_t delivery_crossings = 0;
    uint64_t waitset_lock_acquisitions = 0;
};

json sample_to_json(const metrics::MetricsSample& s) {
    return json{{"t_ns", s.t_ns},
                {"voluntary_cs", s.voluntary_cs},
                {"involuntary_cs", s.involuntary_cs},
                {"os_cs_available", s.os_cs_available},
                {"kernel_crossings", s.kernel_crossings},
                {"rss_bytes", s.rss_bytes}};
}

metrics::MetricsSample sample_from_json(const json& j) {
    metrics::MetricsSample s;
    s.t_ns = j.at("t_ns").get<int64_t>();
    s.voluntary_cs = j.at("voluntary_cs").get<uint64_t>();
    s.involuntary_cs = j.at("involuntary_cs").get<uint64_t>();
    s.os_cs_available = j.at("os_cs_available").get<bool>();
    s.kernel_crossings = j.at("kernel_crossings").get<uint64_t>();
    s.rss_bytes = j.at("rss_bytes").get<uint64_t>();
    return s;
}

ChildReport read_child_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SubprocessError("subscriber produced no result file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SubprocessError("subscriber result unparsable");
    ChildReport rep;
    for (const auto& s : j.at("samples")) rep.samples.push_back(sample_from_json(s));
    for (const auto& c : j.at("callbacks")) {
        CallbackResult r;
        r.id = c.at("id").get<std::string>();
        r.executions = c.at("executions").get<uint64_t>();
        r.overruns = c.value("overruns", uint64_t{0});
        r.max_concurrency = c.value("max_concurrency", 0);
        r.thread_identity_count = c.value("thread_identity_count", size_t{0});
        r.queue_drops = c.value("queue_drops", uint64_t{0});
        r.enforcement = c.value("enforcement", std::string{});
        rep.callbacks.push_back(std::move(r));
    }
    rep.fallbacks = j.value("fallbacks", uint64_t{0});
    rep.delivery_crossings = j.value("delivery_crossings", uint64_t{0});
    rep.waitset_lock_acquisitions = j.value("waitset_lock_acquisitions", uint64_t{0});
    return rep;
}

ExperimentResult run_intra(const ExperimentConfig& cfg) {
    ExperimentResult result;
    result.config = cfg;

    const uint64_t delivery_before = metrics::counters().delivery_crossings();

    TopicDomain domain;
    const auto desc = make_benchmark_system(cfg, BenchHalf::Both);
    auto ex = Executor::create(executor_options_for(cfg));
    ex->start(domain, desc);

    sleep_s(cfg.warmup_s);
    auto samples = collect_samples(cfg.duration_s, {});

    auto stats = ex->shutdown();
    domain.shutdown();

    result.rates = metrics::aggregate(std::array{samples}, stats.fallback_count);
    fill_callback_results(stats, result.callbacks);
    result.waitset_lock_acquisitions = stats.waitset_lock_acquisitions;
    result.delivery_crossings = metrics::counters().delivery_crossings() - delivery_before;
    result.valid = stats.clean;
    result.error = stats.error;
    for (const auto& cb : result.callbacks)
        if (cb.executions == 0) {
            result.valid = false;
            result.error = "IncompleteRun: callback " + cb.id + " never executed";
        }
    return result;
}

ExperimentResult run_inter(const ExperimentConfig& cfg, const RunOptions& opts) {
#ifndef __linux__
    throw SubprocessError("inter-process mode requires linux");
#else
    ExperimentResult result;
    result.config = cfg;

    ScratchDir scratch(opts.scratch_dir);
    const std::string socket_path = scratch.path + "/bus.sock";
    const std::string result_path = scratch.path + "/subscriber.json";

    std::string exe = opts.child_exe.empty() ? self_exe_path() : opts.child_exe;
    if (exe.empty()) throw SubprocessError("cannot determine child executable path");

    const uint64_t delivery_before = metrics::counters().delivery_crossings();

    TopicDomain domain;
    domain.listen(socket_path);

    json cell;
    cell["config"] = config_to_json_obj(cfg);
    cell["socket_path"] = socket_path;
    cell["result_path"] = result_path;
    const pid_t child = spawn_subscriber(exe, cell.dump());

    // the child connects only after its executor is live and subscribed
    if (!domain.wait_for_peer(std::chrono::milliseconds(15000))) {
        wait_child(child, 1.0);
        throw SubprocessError("subscriber never connected");
    }

    const auto desc = make_benchmark_system(cfg, BenchHalf::PublisherOnly);
    auto ex = Executor::create(executor_options_for(cfg));
    ex->start(domain, desc);

    sleep_s(cfg.warmup_s);
    auto samples = collect_samples(cfg.duration_s, {});

    auto stats = ex->shutdown();
    domain.shutdown();  // EOF tells the subscriber to stop and report

    const int child_rc = wait_child(child, cfg.duration_s + 30.0);
    if (child_rc != 0)
        throw SubprocessError("subscriber exited with status " + std::to_string(child_rc));
    ChildReport child_report = read_child_report(result_path);

    const std::array both = {samples, child_report.samples};
    result.rates = metrics::aggregate(both, stats.fallback_count + child_report.fallbacks);
    fill_callback_results(stats, result.callbacks);
    result.callbacks.insert(result.callbacks.end(), child_report.callbacks.begin(),
                            child_report.callbacks.end());
    result.waitset_lock_acquisitions =
        stats.waitset_lock_acquisitions + child_report.waitset_lock_acquisitions;
    result.delivery_crossings = (metrics::counters().delivery_crossings() - delivery_before) +
                                child_report.delivery_crossings;
    result.valid = stats.clean;
    result.error = stats.error;
    for (const auto& cb : result.callbacks)
        if (cb.executions == 0) {
            result.valid = false;
            result.error = "IncompleteRun: callback " + cb.id + " never executed";
        }
    return result;
#endif
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (auto v = cfg.validate(); !v.ok())
        throw std::invalid_argument("invalid experiment config:\n" + v.to_string());
    if (opts.log)
        opts.log(std::string("cell executor=") + to_string(cfg.executor) + " mode=" +
                 to_string(cfg.process_mode) + " n=" + std::to_string(cfg.n_callbacks));
    if (cfg.process_mode == ProcessMode::Intra) return run_intra(cfg);
    return run_inter(cfg, opts);
}

int run_subscriber_role() {
#ifndef __linux__
    return 2;
#else
    const char* env = std::getenv(kCellConfigEnv);
    if (!env || !*env) {
        std::fprintf(stderr, "missing %s\n", kCellConfigEnv);
        return 2;
    }
    json cell = json::parse(env, nullptr, false);
    if (cell.is_discarded()) {
        std::fprintf(stderr, "unparsable %s\n", kCellConfigEnv);
        return 2;
    }
    const ExperimentConfig cfg = config_from_json_obj(cell.at("config"));
    const std::string socket_path = cell.at("socket_path").get<std::string>();
    const std::string result_path = cell.at("result_path").get<std::string>();

    const uint64_t delivery_before = metrics::counters().delivery_crossings();

    TopicDomain domain;
    const auto desc = make_benchmark_system(cfg, BenchHalf::SubscriberOnly);
    auto ex = Executor::create(executor_options_for(cfg));
    ex->start(domain, desc);   // queues exist before any frame can arrive
    domain.connect(socket_path);

    sleep_s(cfg.warmup_s);
    // sample until the publisher closes the stream (plus a hard deadline)
    const double max_s = cfg.duration_s + 60.0;
    auto samples = collect_samples(max_s, [&domain] { return domain.any_peer_connected(); });

    auto stats = ex->shutdown();
    domain.shutdown();

    json out;
    out["samples"] = json::array();
    for (const auto& s : samples) out["samples"].push_back(sample_to_json(s));
    out["callbacks"] = json::array();
    std::vector<CallbackResult> cbs;
    fill_callback_results(stats, cbs);
    for (const auto& cb : cbs) {
        json c;
        c["id"] = cb.id;
        c["executions"] = cb.executions;
        c["overruns"] = cb.overruns;
        c["max_concurrency"] = cb.max_concurrency;
        c["thread_identity_count"] = cb.thread_identity_count;
        c["queue_drops"] = cb.queue_drops;
        if (!cb.enforcement.empty()) c["enforcement"] = cb.enforcement;
        out["callbacks"].push_back(std::move(c));
    }
    out["fallbacks"] = stats.fallback_count;
    out["delivery_crossings"] = metrics::counters().delivery_crossings() - delivery_before;
    out["waitset_lock_acquisitions"] = stats.waitset_lock_acquisitions;

    std::ofstream of(result_path);
    if (!of) return 3;
    of << out.dump();
    return of.good() ? 0 : 3;
#endif
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<SweepCell> enumerate_cells(const std::vector<int>& n_list,
                                       const std::vector<ExecutorKind>& executors,
                                       const std::vector<ProcessMode>& modes, int mte_workers) {
    std::vector<SweepCell> cells;
    for (ExecutorKind e : executors)
        for (ProcessMode m : modes)
            for (int n : n_list)
                cells.push_back({e, e == ExecutorKind::MultiThreaded ? mte_workers : 0, m, n});
    return cells;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::vector<int>& n_list,
                            const std::vector<ExecutorKind>& executors,
                            const std::vector<ProcessMode>& modes, const SweepOptions& opts) {
    if (n_list.empty() || executors.empty() || modes.empty())
        throw std::invalid_argument("sweep lists must be non-empty");
    const auto cells = enumerate_cells(n_list, executors, modes, base.workers);
    std::vector<SweepRow> rows;
    bool first = true;
    for (const auto& cell : cells) {
        if (!first && opts.idle_gap_s > 0) sleep_s(opts.idle_gap_s);
        first = false;

        ExperimentConfig cfg = base;
        cfg.executor = cell.executor;
        cfg.workers = cell.workers;
        cfg.process_mode = cell.mode;
        cfg.n_callbacks = cell.n;

        SweepRow row;
        row.cell = cell;
        try {
            const auto result = run_experiment(cfg, opts.run);
            row.uks_per_s = result.rates.user_kernel_switches_per_s;
            row.cs_per_s = result.rates.context_switches_per_s;
            row.rss_peak = result.rates.rss_peak_bytes;
            row.fallbacks = result.rates.fallback_count;
            row.valid = result.valid;
        } catch (const std::exception& e) {
            row.valid = false;
            if (opts.run.log) opts.run.log(std::string("cell failed: ") + e.what());
        }
        rows.push_back(row);
        if (opts.on_cell) opts.on_cell(cell, row);
    }
    return rows;
}

std::string row_to_csv(const SweepRow& row) {
    std::ostringstream os;
    os << to_string(row.cell.executor) << ',' << row.cell.workers << ','
       << to_string(row.cell.mode) << ',' << row.cell.n << ',' << std::fixed
       << std::setprecision(3) << row.uks_per_s << ',' << row.cs_per_s << ',' << row.rss_peak
       << ',' << row.fallbacks << ',' << (row.valid ? 1 : 0);
    return os.str();
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << kSweepCsvHeader << '\n';
    for (const auto& row : rows) os << row_to_csv(row) << '\n';
}

std::vector<SweepRow> parse_sweep_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaMismatch("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSweepCsvHeader)
        throw SchemaMismatch("unexpected header: " + line);
    std::vector<SweepRow> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw SchemaMismatch("line " + std::to_string(lineno) + ": expected 9 fields");
        SweepRow row;
        auto ex = executor_kind_from_string(fields[0]);
        auto mode = process_mode_from_string(fields[2]);
        if (!ex || !mode)
            throw SchemaMismatch("line " + std::to_string(lineno) + ": bad executor/mode");
        try {
            row.cell.executor = *ex;
            row.cell.workers = std::stoi(fields[1]);
            row.cell.mode = *mode;
            row.cell.n = std::stoi(fields[3]);
            row.uks_per_s = std::stod(fields[4]);
            row.cs_per_s = std::stod(fields[5]);
            row.rss_peak = std::stoull(fields[6]);
            row.fallbacks = std::stoull(fields[7]);
            row.valid = std::stoi(fields[8]) != 0;
        } catch (const std::exception&) {
            throw SchemaMismatch("line " + std::to_string(lineno) + ": bad numeric field");
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ratios
// ---------------------------------------------------------------------------

namespace {

double metric_of(const SweepRow& row, SwitchMetric m) {
    return m == SwitchMetric::UserKernel ? row.uks_per_s : row.cs_per_s;
}

}  // namespace

RatioReport ratio_report(const std::vector<SweepRow>& rows) {
    RatioReport report;

    // baseline: valid single-threaded cell per (n, mode)
    std::map<std::pair<int, int>, const SweepRow*> baseline;  // (mode, n)
    for (const auto& row : rows)
        if (row.cell.executor == ExecutorKind::SingleThreaded && row.valid)
            baseline[{static_cast<int>(row.cell.mode), row.cell.n}] = &row;

    bool any_non_baseline = false;
    for (const auto& row : rows) {
        if (!row.valid) continue;
        if (row.cell.executor != ExecutorKind::SingleThreaded) any_non_baseline = true;
        auto it = baseline.find({static_cast<int>(row.cell.mode), row.cell.n});
        if (it == baseline.end())
            throw MissingBaseline("no single_threaded baseline for mode=" +
                                  std::string(to_string(row.cell.mode)) +
                                  " n=" + std::to_string(row.cell.n));
        for (SwitchMetric m : {SwitchMetric::UserKernel, SwitchMetric::ContextSwitch}) {
            const double base = metric_of(*it->second, m);
            if (base <= 0) continue;
            report.entries.push_back(
                {row.cell.executor, row.cell.mode, m, row.cell.n, metric_of(row, m) / base});
        }
    }
    report.baseline_only = !any_non_baseline;

    // summaries per (executor, mode, metric)
    std::map<std::tuple<int, int, int>, std::vector<const RatioEntry*>> grouped;
    for (const auto& e : report.entries)
        grouped[{static_cast<int>(e.executor), static_cast<int>(e.mode),
                 static_cast<int>(e.metric)}]
            .push_back(&e);
    for (auto& [key, entries] : grouped) {
        RatioSummary s;
        s.executor = entries.front()->executor;
        s.mode = entries.front()->mode;
        s.metric = entries.front()->metric;
        const RatioEntry* lowest = entries.front();
        const RatioEntry* highest = entries.front();
        for (const auto* e : entries) {
            if (e->ratio > s.max_ratio) {
                s.max_ratio = e->ratio;
                s.max_ratio_n = e->n;
            }
            if (e->n < lowest->n) lowest = e;
            if (e->n > highest->n) highest = e;
        }
        s.n_low = lowest->n;
        s.n_high = highest->n;
        s.flatness = lowest->ratio > 0 ? highest->ratio / lowest->ratio : 0;
        report.summaries.push_back(s);
    }
    return report;
}

std::string RatioReport::to_text() const {
    std::ostringstream os;
    os << "ratios vs single_threaded baseline\n";
    if (baseline_only) {
        os << "baseline-only table: no other executors to ratio\n";
        return os.str();
    }
    for (const auto& s : summaries) {
        os << std::fixed << std::setprecision(3);
        os << to_string(s.executor) << ' ' << to_string(s.mode) << ' ' << to_string(s.metric)
           << ": max " << s.max_ratio << "x at N=" << s.max_ratio_n << "; flatness ratio(N="
           << s.n_high << ")/ratio(N=" << s.n_low << ") = " << s.flatness << '\n';
    }
    return os.str();
}

}  // namespace rtexec::bench
