#include "rtexec/model.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace rtexec {

const char* to_string(SchedPolicy p) {
    switch (p) {
        case SchedPolicy::Deadline: return "deadline";
        case SchedPolicy::FifoRt: return "fifo_rt";
        case SchedPolicy::Fair: return "fair";
    }
    return "?";
}

std::optional<SchedPolicy> sched_policy_from_string(const std::string& s) {
    if (s == "deadline") return SchedPolicy::Deadline;
    if (s == "fifo_rt") return SchedPolicy::FifoRt;
    if (s == "fair") return SchedPolicy::Fair;
    return std::nullopt;
}

SchedAttr SchedAttr::deadline(uint64_t runtime_ns, uint64_t deadline_ns, uint64_t period_ns) {
    SchedAttr a;
    a.policy = SchedPolicy::Deadline;
    a.runtime_ns = runtime_ns;
    a.deadline_ns = deadline_ns;
    a.period_ns = period_ns;
    return a;
}

SchedAttr SchedAttr::fifo_rt(int priority) {
    SchedAttr a;
    a.policy = SchedPolicy::FifoRt;
    a.priority = priority;
    return a;
}

SchedAttr SchedAttr::fair(int nice) {
    SchedAttr a;
    a.policy = SchedPolicy::Fair;
    a.nice = nice;
    return a;
}

std::string ValidationResult::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.field << ": " << v.message << "\n";
    return os.str();
}

ValidationResult validate_sched_attr(const SchedAttr& attr, std::optional<int> core_count) {
    ValidationResult r;
    auto add = [&](std::string field, std::string msg) {
        r.violations.push_back({std::move(field), std::move(msg)});
    };

    switch (attr.policy) {
        case SchedPolicy::Deadline:
            if (attr.runtime_ns == 0) add("runtime_ns", "runtime_ns must be > 0");
            if (attr.runtime_ns > attr.deadline_ns) add("runtime_ns", "runtime_ns > deadline_ns");
            if (attr.deadline_ns > attr.period_ns) add("deadline_ns", "deadline_ns > period_ns");
            break;
        case SchedPolicy::FifoRt:
            if (attr.priority < 1) add("priority", "priority below 1");
            if (attr.priority > 99) add("priority", "priority above 99");
            break;
        case SchedPolicy::Fair:
            if (attr.nice < -20) add("nice", "nice below -20");
            if (attr.nice > 19) add("nice", "nice above 19");
            break;
    }
    for (int cpu : attr.affinity) {
        if (cpu < 0) {
            add("affinity", "negative cpu index " + std::to_string(cpu));
        } else if (core_count && cpu >= *core_count) {
            add("affinity", "cpu index " + std::to_string(cpu) + " >= core count " +
                                std::to_string(*core_count));
        }
    }
    return r;
}

ValidationResult validate_system(const SystemDescription& desc) {
    ValidationResult r;
    auto add = [&](std::string field, std::string msg) {
        r.violations.push_back({std::move(field), std::move(msg)});
    };

    std::unordered_set<TopicName> topics(desc.topics.begin(), desc.topics.end());
    if (topics.size() != desc.topics.size()) add("topics", "duplicate topic names");

    std::unordered_map<GroupId, const CallbackGroup*> groups;
    for (const auto& g : desc.groups) {
        if (!groups.emplace(g.id, &g).second) add("groups", "duplicate group id " + g.id);
    }

    std::unordered_set<NodeId> node_ids;
    std::unordered_map<CallbackId, const CallbackSpec*> callbacks;
    for (const auto& node : desc.nodes) {
        if (!node_ids.insert(node.id).second) add("nodes", "duplicate node id " + node.id);
        for (const auto& cb : node.callbacks) {
            if (!callbacks.emplace(cb.id, &cb).second)
                add("callbacks", "duplicate callback id " + cb.id);
            if (!groups.count(cb.group))
                add("callbacks", "callback " + cb.id + " references unknown group " + cb.group);
            if (const auto* t = cb.timer(); t && t->period.count() <= 0)
                add("callbacks", "timer " + cb.id + " period_ns must be > 0");
            if (const auto* s = cb.subscription(); s && !topics.count(s->topic))
                add("callbacks", "subscription " + cb.id + " on undeclared topic " + s->topic);
        }
        for (const auto& [cb_id, topic] : node.publications) {
            if (!topics.count(topic))
                add("publications", "publication to undeclared topic " + topic);
            bool local = std::any_of(node.callbacks.begin(), node.callbacks.end(),
                                     [&](const CallbackSpec& c) { return c.id == cb_id; });
            if (!local)
                add("publications",
                    "publication references callback " + cb_id + " not in node " + node.id);
        }
    }

    // group member lists must agree with the callbacks' group fields
    for (const auto& g : desc.groups) {
        for (const auto& m : g.members) {
            auto it = callbacks.find(m);
            if (it == callbacks.end())
                add("groups", "group " + g.id + " lists unknown callback " + m);
            else if (it->second->group != g.id)
                add("groups", "callback " + m + " lists group " + it->second->group +
                                  " but appears in group " + g.id);
        }
    }
    for (const auto& [id, cb] : callbacks) {
        auto it = groups.find(cb->group);
        if (it == groups.end()) continue;
        const auto& members = it->second->members;
        if (std::find(members.begin(), members.end(), id) == members.end())
            add("groups", "callback " + id + " missing from member list of group " + cb->group);
    }
    return r;
}

CycleError::CycleError(std::vector<CallbackId> cycle)
    : std::runtime_error([&cycle] {
          std::string s = "cycle detected:";
          for (const auto& v : cycle) s += " " + v;
          return s;
      }()),
      cycle_(std::move(cycle)) {}

std::optional<uint32_t> CallbackGraph::index_of(const CallbackId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

uint32_t CallbackGraph::topo_index(uint32_t vertex) const { return topo_pos_.at(vertex); }

CallbackGraph build_graph(const SystemDescription& desc, const BuildGraphOptions& opts) {
    if (auto v = validate_system(desc); !v.ok())
        throw std::invalid_argument("invalid system description:\n" + v.to_string());

    CallbackGraph g;
    for (const auto& node : desc.nodes)
        for (const auto& cb : node.callbacks) {
            g.index_.emplace(cb.id, static_cast<uint32_t>(g.vertices.size()));
            g.vertices.push_back(cb.id);
        }

    // topic -> publisher vertices, topic -> subscriber vertices
    std::map<TopicName, std::vector<uint32_t>> publishers;
    std::map<TopicName, std::vector<uint32_t>> subscribers;
    for (const auto& node : desc.nodes) {
        for (const auto& [cb_id, topic] : node.publications)
            publishers[topic].push_back(*g.index_of(cb_id));
        for (const auto& cb : node.callbacks)
            if (const auto* s = cb.subscription()) subscribers[s->topic].push_back(*g.index_of(cb.id));
    }

    for (const auto& [topic, subs] : subscribers) {
        auto it = publishers.find(topic);
        if (it == publishers.end()) {
            std::string w = "topic " + topic + " has subscriptions but no publisher";
            if (opts.dangling_topic_is_error) throw DanglingTopicError(w);
            g.warnings.push_back(w);
            continue;
        }
        for (uint32_t pub : it->second)
            for (uint32_t sub : subs) g.edges.emplace_back(pub, sub);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());

    // Kahn with a min-index frontier: deterministic topological order.
    const auto n = static_cast<uint32_t>(g.vertices.size());
    std::vector<uint32_t> indegree(n, 0);
    std::vector<std::vector<uint32_t>> out(n);
    for (auto [a, b] : g.edges) {
        out[a].push_back(b);
        indegree[b]++;
    }
    std::priority_queue<uint32_t, std::vector<uint32_t>, std::greater<>> ready;
    for (uint32_t v = 0; v < n; ++v)
        if (indegree[v] == 0) ready.push(v);
    while (!ready.empty()) {
        uint32_t v = ready.top();
        ready.pop();
        g.topo_order.push_back(v);
        for (uint32_t w : out[v])
            if (--indegree[w] == 0) ready.push(w);
    }

    if (g.topo_order.size() != n) {
        // walk the residual graph to surface one concrete cycle
        std::vector<int> state(n, 0);  // 0 unseen, 1 on stack, 2 done
        std::vector<uint32_t> stack;
        std::vector<CallbackId> cycle;
        auto dfs = [&](auto&& self, uint32_t v) -> bool {
            state[v] = 1;
            stack.push_back(v);
            for (uint32_t w : out[v]) {
                if (indegree[w] == 0) continue;  // not part of the residue
                if (state[w] == 1) {
                    auto it = std::find(stack.begin(), stack.end(), w);
                    for (; it != stack.end(); ++it) cycle.push_back(g.vertices[*it]);
                    return true;
                }
                if (state[w] == 0 && self(self, w)) return true;
            }
            stack.pop_back();
            state[v] = 2;
            return false;
        };
        for (uint32_t v = 0; v < n && cycle.empty(); ++v)
            if (indegree[v] > 0 && state[v] == 0) dfs(dfs, v);
        throw CycleError(std::move(cycle));
    }

    g.topo_pos_.resize(n);
    for (uint32_t i = 0; i < n; ++i) g.topo_pos_[g.topo_order[i]] = i;
    return g;
}

std::string ConstraintReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : group_violations)
        os << "group " << v.group << " has " << v.members << " members\n";
    for (const auto& r : reentrancy_risks)
        os << "callback " << r.callback << ": possible reentrancy/overrun, wcet_hint "
           << r.wcet_hint.count() << " ns >= min inter-arrival " << r.min_interarrival.count()
           << " ns\n";
    return os.str();
}

ConstraintReport validate_isolation_constraints(const SystemDescription& desc,
                                                const CallbackGraph& graph) {
    ConstraintReport report;
    for (const auto& g : desc.groups)
        if (g.members.size() > 1) report.group_violations.push_back({g.id, g.members.size()});

    std::unordered_map<CallbackId, const CallbackSpec*> specs;
    for (const auto& node : desc.nodes)
        for (const auto& cb : node.callbacks) specs.emplace(cb.id, &cb);

    // min inter-arrival per vertex, propagated in topological order
    constexpr auto kUnknown = std::chrono::nanoseconds::max();
    std::vector<std::chrono::nanoseconds> interarrival(graph.vertices.size(), kUnknown);
    std::vector<std::vector<uint32_t>> preds(graph.vertices.size());
    for (auto [a, b] : graph.edges) preds[b].push_back(a);

    for (uint32_t v : graph.topo_order) {
        const auto* spec = specs.at(graph.vertices[v]);
        if (const auto* t = spec->timer()) {
            interarrival[v] = t->period;
        } else {
            for (uint32_t p : preds[v]) interarrival[v] = std::min(interarrival[v], interarrival[p]);
        }
    }

    for (uint32_t v = 0; v < graph.vertices.size(); ++v) {
        const auto* spec = specs.at(graph.vertices[v]);
        if (!spec->wcet_hint || interarrival[v] == kUnknown) continue;
        if (*spec->wcet_hint >= interarrival[v])
            report.reentrancy_risks.push_back({spec->id, interarrival[v], *spec->wcet_hint});
    }
    return report;
}

}  // namespace rtexec
