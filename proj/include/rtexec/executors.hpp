#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtexec/model.hpp"
#include "rtexec/schedctl.hpp"
#include "rtexec/transport.hpp"

namespace rtexec {

enum class ExecutorKind { SingleThreaded, MultiThreaded, CallbackIsolated };
const char* to_string(ExecutorKind k);
std::optional<ExecutorKind> executor_kind_from_string(const std::string& s);

class CallbackContext;
using HandlerFn = std::function<void(CallbackContext&)>;

struct ExecutorOptions {
    ExecutorKind kind = ExecutorKind::SingleThreaded;

    /// MultiThreaded worker count; 0 means probed hardware concurrency.
    int workers = 0;

    /// CallbackIsolated: strict mode maps one callback to one thread and
    /// refuses multi-member groups; permissive mode maps one thread per group.
    bool strict = true;

    bool apply_sched_attrs = true;   // CallbackIsolated only
    bool stagger_timer_phases = true;
    bool record_intervals = false;
    std::chrono::milliseconds shutdown_grace{2000};

    /// User functions per callback id; replace the default
    /// busywork-then-publish behaviour entirely.
    std::map<CallbackId, HandlerFn> handlers;
    /// Overrides the SchedAttr carried in the CallbackSpec.
    std::map<CallbackId, SchedAttr> sched_overrides;
};

class IsolationViolation : public std::runtime_error {
public:
    explicit IsolationViolation(const std::string& what) : std::runtime_error(what) {}
};

struct ExecInterval {
    uint64_t start_ns = 0;
    uint64_t end_ns = 0;
    uint64_t tid = 0;
    uint64_t cycle = 0;  // single-threaded wait cycle the execution belonged to
};

struct CallbackStats {
    CallbackId id;
    GroupId group;
    bool is_timer = false;
    uint64_t executions = 0;
    uint64_t overruns = 0;
    int max_concurrency = 0;
    uint64_t busy_ns = 0;
    uint64_t queue_drops = 0;
    std::vector<uint64_t> thread_ids;  // distinct executing threads
    std::optional<schedctl::EnforceOutcome> enforcement;
    std::vector<ExecInterval> intervals;  // only when record_intervals
};

struct ExecutorStats {
    ExecutorKind kind = ExecutorKind::SingleThreaded;
    std::vector<CallbackStats> callbacks;
    uint64_t wait_cycles = 0;
    uint64_t waitset_generation = 0;
    uint64_t waitset_lock_acquisitions = 0;
    uint64_t waitset_lock_contended = 0;
    uint64_t fallback_count = 0;
    std::vector<CallbackId> timed_out;
    bool clean = true;
    std::string error;

    const CallbackStats* find(const CallbackId& id) const;
    uint64_t executions_total() const;
};

/// Handed to handlers while they execute.
class CallbackContext {
public:
    const CallbackSpec& spec() const;
    /// The message that triggered this activation; nullptr for timers.
    const Message* message() const { return message_; }
    /// Publishes to every topic this callback declares; returns the merged summary.
    DeliverySummary publish(std::span<const std::byte> payload);

private:
    friend class ExecutorImpl;
    CallbackContext(void* cell, const Message* msg) : cell_(cell), message_(msg) {}
    void* cell_;
    const Message* message_;
};

/// A running set of callback threads over one TopicDomain. Control calls
/// (start/stats/shutdown) belong to a single control thread; handlers must
/// not call them (asserted).
class Executor {
public:
    virtual ~Executor() = default;

    /// Registers the description's topics and callbacks against `domain`,
    /// spawns the executor threads and returns once they are live (for the
    /// callback-isolated kind: once every thread finished applying its
    /// scheduling attributes). Throws IsolationViolation in strict mode when
    /// a group has more than one member.
    virtual void start(TopicDomain& domain, const SystemDescription& desc) = 0;

    virtual ExecutorStats stats() const = 0;

    /// Stops and joins all threads within the grace period; idempotent, the
    /// second call returns the same final stats. Threads that never yield
    /// are detached and reported in `timed_out`.
    virtual ExecutorStats shutdown() = 0;

    virtual ExecutorKind kind() const = 0;

    static std::unique_ptr<Executor> create(const ExecutorOptions& options);
};

namespace detail {

/// One single-threaded wait cycle's execution order over a readiness
/// snapshot: every due timer in registration order, then one message per
/// non-empty subscription in registration order. Indices are registration
/// indices; `is_timer` classifies them.
std::vector<uint32_t> single_thread_cycle_order(const std::vector<bool>& is_timer,
                                                const std::vector<bool>& ready);

}  // namespace detail

}  // namespace rtexec
