#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace rtexec {

using CallbackId = std::string;
using GroupId = std::string;
using NodeId = std::string;
using TopicName = std::string;

// --------------------------------------------------------------------------
// Scheduling attributes
// --------------------------------------------------------------------------

enum class SchedPolicy { Deadline, FifoRt, Fair };

const char* to_string(SchedPolicy p);
std::optional<SchedPolicy> sched_policy_from_string(const std::string& s);

/// Per-thread OS scheduling request: policy, policy-specific parameters and
/// core affinity. An empty affinity set means unrestricted.
struct SchedAttr {
    SchedPolicy policy = SchedPolicy::Fair;

    // Deadline (CBS reservation triple)
    uint64_t runtime_ns = 0;
    uint64_t deadline_ns = 0;
    uint64_t period_ns = 0;

    // FifoRt
    int priority = 0;

    // Fair
    int nice = 0;

    std::set<int> affinity;

    static SchedAttr deadline(uint64_t runtime_ns, uint64_t deadline_ns, uint64_t period_ns);
    static SchedAttr fifo_rt(int priority);
    static SchedAttr fair(int nice = 0);

    bool operator==(const SchedAttr&) const = default;
};

struct Violation {
    std::string field;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Total check of the SchedAttr invariants. `core_count`, when known, bounds
/// the affinity indices.
ValidationResult validate_sched_attr(const SchedAttr& attr,
                                     std::optional<int> core_count = std::nullopt);

// --------------------------------------------------------------------------
// Callbacks, groups, nodes
// --------------------------------------------------------------------------

struct TimerKind {
    std::chrono::nanoseconds period{0};
};

struct SubscriptionKind {
    TopicName topic;
};

using CallbackKind = std::variant<TimerKind, SubscriptionKind>;

/// Opaque work description. Benchmark handlers busy-spin for `busywork` and
/// then publish `payload_bytes` of zeros to each declared publication topic.
/// User code can attach a real function per callback id at executor start;
/// that function replaces the default behaviour entirely.
struct HandlerSpec {
    std::chrono::nanoseconds busywork{0};
    uint32_t payload_bytes = 8;
};

struct CallbackSpec {
    CallbackId id;
    CallbackKind kind;
    GroupId group;
    HandlerSpec handler;
    std::optional<SchedAttr> sched;
    std::optional<std::chrono::nanoseconds> wcet_hint;

    bool is_timer() const { return std::holds_alternative<TimerKind>(kind); }
    const TimerKind* timer() const { return std::get_if<TimerKind>(&kind); }
    const SubscriptionKind* subscription() const { return std::get_if<SubscriptionKind>(&kind); }
};

struct CallbackGroup {
    GroupId id;
    bool mutually_exclusive = true;  // reentrant groups are out of the model
    std::vector<CallbackId> members;
};

struct NodeSpec {
    NodeId id;
    std::vector<CallbackSpec> callbacks;
    // (publishing callback id, topic) pairs
    std::vector<std::pair<CallbackId, TopicName>> publications;
};

/// A whole process graph: declared topics, groups and nodes. This is the
/// in-memory form of the JSON system description file.
struct SystemDescription {
    std::vector<TopicName> topics;
    std::vector<CallbackGroup> groups;
    std::vector<NodeSpec> nodes;
};

/// Referential integrity: unique ids, known groups, known topics, group
/// member lists consistent with the callbacks' group fields, timer period > 0.
ValidationResult validate_system(const SystemDescription& desc);

// --------------------------------------------------------------------------
// Callback graph
// --------------------------------------------------------------------------

class CycleError : public std::runtime_error {
public:
    explicit CycleError(std::vector<CallbackId> cycle);
    const std::vector<CallbackId>& cycle() const { return cycle_; }

private:
    std::vector<CallbackId> cycle_;
};

class DanglingTopicError : public std::runtime_error {
public:
    explicit DanglingTopicError(const std::string& what) : std::runtime_error(what) {}
};

struct BuildGraphOptions {
    // Subscriptions on topics nobody publishes are a warning by default;
    // publisher-only benchmark processes are legitimate.
    bool dangling_topic_is_error = false;
};

/// DAG of callbacks. Edge (a -> b) iff a publishes a topic b subscribes to.
struct CallbackGraph {
    std::vector<CallbackId> vertices;                      // registration order
    std::vector<std::pair<uint32_t, uint32_t>> edges;      // sorted, deduplicated
    std::vector<uint32_t> topo_order;                      // vertex indices
    std::vector<std::string> warnings;

    std::optional<uint32_t> index_of(const CallbackId& id) const;
    uint32_t topo_index(uint32_t vertex) const;  // position within topo_order

private:
    friend CallbackGraph build_graph(const SystemDescription&, const BuildGraphOptions&);
    std::unordered_map<CallbackId, uint32_t> index_;
    std::vector<uint32_t> topo_pos_;
};

/// Throws CycleError on cyclic input, std::invalid_argument when
/// validate_system fails, DanglingTopicError only if escalated via options.
CallbackGraph build_graph(const SystemDescription& desc, const BuildGraphOptions& opts = {});

// --------------------------------------------------------------------------
// Isolation constraints
// --------------------------------------------------------------------------

struct GroupSizeViolation {
    GroupId group;
    size_t members;
};

struct ReentrancyRisk {
    CallbackId callback;
    std::chrono::nanoseconds min_interarrival;
    std::chrono::nanoseconds wcet_hint;
};

struct ConstraintReport {
    std::vector<GroupSizeViolation> group_violations;
    std::vector<ReentrancyRisk> reentrancy_risks;

    bool empty() const { return group_violations.empty() && reentrancy_risks.empty(); }
    std::string to_string() const;
};

/// Static form of the two design constraints: every group holds exactly one
/// callback, and a declared WCET never reaches the callback's minimum
/// inter-arrival time. Inter-arrival propagates along graph edges as the
/// minimum upstream timer period; callbacks with no upstream timer are not
/// checkable statically and are skipped.
ConstraintReport validate_isolation_constraints(const SystemDescription& desc,
                                                const CallbackGraph& graph);

}  // namespace rtexec
