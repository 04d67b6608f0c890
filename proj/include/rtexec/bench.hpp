#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rtexec/executors.hpp"
#include "rtexec/metrics.hpp"
#include "rtexec/model.hpp"

namespace rtexec::bench {

/// Environment variable holding the serialized cell config for the
/// subscriber-role child process.
inline constexpr const char* kCellConfigEnv = "RTEXEC_CELL_CONFIG";

enum class ProcessMode { Intra, Inter };
const char* to_string(ProcessMode m);
std::optional<ProcessMode> process_mode_from_string(const std::string& s);

class SubprocessError : public std::runtime_error {
public:
    explicit SubprocessError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
    ExecutorKind executor = ExecutorKind::SingleThreaded;
    int workers = 0;  // MultiThreaded; 0 = probed hardware concurrency
    int n_callbacks = 1;
    ProcessMode process_mode = ProcessMode::Intra;
    uint64_t publish_period_ns = 10'000'000;  // 10 ms
    double duration_s = 30;
    double warmup_s = 2;  // excluded from the measurement window
    uint32_t payload_bytes = 8;
    uint64_t handler_busywork_ns = 0;
    bool strict = true;
    bool stagger_timer_phases = true;
    std::map<CallbackId, SchedAttr> sched_attrs;  // optional per-callback table
    uint64_t seed = 0;

    ValidationResult validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& json_text);
};

struct CallbackResult {
    CallbackId id;
    uint64_t executions = 0;
    uint64_t overruns = 0;
    int max_concurrency = 0;
    size_t thread_identity_count = 0;
    uint64_t queue_drops = 0;
    std::string enforcement;  // "applied" / "fallback" / "mismatch" / ""
};

struct ExperimentResult {
    ExperimentConfig config;
    metrics::RateReport rates;
    std::vector<CallbackResult> callbacks;
    uint64_t waitset_lock_acquisitions = 0;
    uint64_t delivery_crossings = 0;  // instrumented socket reads+writes, this run
    bool valid = false;
    std::string error;

    std::string to_json() const;
};

/// The benchmark node pair: a publisher node with `n` timers (one per group)
/// publishing every `period_ns` to per-index topics, and a subscriber node
/// with `n` subscriptions (one per group). `half` selects one side for
/// inter-process runs; both halves declare the same topic list so numeric
/// topic ids agree across processes.
enum class BenchHalf { Both, PublisherOnly, SubscriberOnly };
SystemDescription make_benchmark_system(const ExperimentConfig& cfg,
                                        BenchHalf half = BenchHalf::Both);

struct RunOptions {
    /// Executable spawned for the subscriber role in inter-process mode;
    /// empty means this process's own binary.
    std::string child_exe;
    /// Directory for sockets and child result files; empty = TMPDIR.
    std::string scratch_dir;
    std::function<void(const std::string&)> log;  // progress lines, may be null
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Entry point for the child process (`run --role subscriber`): reads the
/// cell config from the environment, runs the subscriber half until the
/// publisher closes the stream, writes its measurements to the agreed file.
/// Returns a process exit code.
int run_subscriber_role();

// --------------------------------------------------------------------------
// Sweeps
// --------------------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "executor,workers,mode,n,uks_per_s,cs_per_s,rss_peak,fallbacks,valid";

struct SweepCell {
    ExecutorKind executor;
    int workers = 0;
    ProcessMode mode;
    int n = 0;
};

struct SweepRow {
    SweepCell cell;
    double uks_per_s = 0;
    double cs_per_s = 0;
    uint64_t rss_peak = 0;
    uint64_t fallbacks = 0;
    bool valid = false;
};

/// Cross product of the lists, sequential; cell count depends only on the
/// lists. Partial failures are recorded per row and never abort the sweep.
std::vector<SweepCell> enumerate_cells(const std::vector<int>& n_list,
                                       const std::vector<ExecutorKind>& executors,
                                       const std::vector<ProcessMode>& modes,
                                       int mte_workers = 0);

struct SweepOptions {
    RunOptions run;
    double idle_gap_s = 1.0;  // let OS accounting settle between cells
    std::function<void(const SweepCell&, const SweepRow&)> on_cell;
};

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::vector<int>& n_list,
                            const std::vector<ExecutorKind>& executors,
                            const std::vector<ProcessMode>& modes, const SweepOptions& opts = {});

std::string row_to_csv(const SweepRow& row);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

class SchemaMismatch : public std::runtime_error {
public:
    explicit SchemaMismatch(const std::string& what) : std::runtime_error(what) {}
};

std::vector<SweepRow> parse_sweep_csv(std::istream& in);  // throws SchemaMismatch

// --------------------------------------------------------------------------
// Ratios against the single-threaded baseline
// --------------------------------------------------------------------------

class MissingBaseline : public std::runtime_error {
public:
    explicit MissingBaseline(const std::string& what) : std::runtime_error(what) {}
};

enum class SwitchMetric { UserKernel, ContextSwitch };
const char* to_string(SwitchMetric m);

struct RatioEntry {
    ExecutorKind executor;
    ProcessMode mode;
    SwitchMetric metric;
    int n = 0;
    double ratio = 0;
};

struct RatioSummary {
    ExecutorKind executor;
    ProcessMode mode;
    SwitchMetric metric;
    double max_ratio = 0;
    int max_ratio_n = 0;
    /// ratio at the largest N over ratio at the smallest N in the table
    double flatness = 0;
    int n_low = 0, n_high = 0;
};

struct RatioReport {
    std::vector<RatioEntry> entries;
    std::vector<RatioSummary> summaries;
    bool baseline_only = false;  // no non-baseline executors in the table

    std::string to_text() const;
};

/// Requires a valid single-threaded cell for every (n, mode) being ratioed.
RatioReport ratio_report(const std::vector<SweepRow>& rows);

}  // namespace rtexec::bench
