#include "rtexec/system_json.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rtexec {

using nlohmann::json;

namespace {

json sched_to_json(const SchedAttr& a) {
    json j;
    j["policy"] = to_string(a.policy);
    switch (a.policy) {
        case SchedPolicy::Deadline:
            j["runtime_ns"] = a.runtime_ns;
            j["deadline_ns"] = a.deadline_ns;
            j["period_ns"] = a.period_ns;
            break;
        case SchedPolicy::FifoRt:
            j["priority"] = a.priority;
            break;
        case SchedPolicy::Fair:
            j["nice"] = a.nice;
            break;
    }
    if (!a.affinity.empty()) j["affinity"] = a.affinity;
    return j;
}

SchedAttr sched_from_json(const json& j) {
    auto policy = sched_policy_from_string(j.at("policy").get<std::string>());
    if (!policy) throw SystemParseError("unknown sched policy: " + j.at("policy").dump());
    SchedAttr a;
    a.policy = *policy;
    switch (a.policy) {
        case SchedPolicy::Deadline:
            a.runtime_ns = j.at("runtime_ns").get<uint64_t>();
            a.deadline_ns = j.at("deadline_ns").get<uint64_t>();
            a.period_ns = j.at("period_ns").get<uint64_t>();
            break;
        case SchedPolicy::FifoRt:
            a.priority = j.at("priority").get<int>();
            break;
        case SchedPolicy::Fair:
            a.nice = j.value("nice", 0);
            break;
    }
    for (const auto& c : j.value("affinity", json::array())) a.affinity.insert(c.get<int>());
    return a;
}

json callback_to_json(const CallbackSpec& cb) {
    json j;
    j["id"] = cb.id;
    if (const auto* t = cb.timer()) {
        j["kind"] = {{"type", "timer"}, {"period_ns", t->period.count()}};
    } else {
        j["kind"] = {{"type", "subscription"}, {"topic", cb.subscription()->topic}};
    }
    j["group"] = cb.group;
    j["handler"] = {{"busywork_ns", cb.handler.busywork.count()},
                    {"payload_bytes", cb.handler.payload_bytes}};
    if (cb.sched) j["sched"] = sched_to_json(*cb.sched);
    if (cb.wcet_hint) j["wcet_hint_ns"] = cb.wcet_hint->count();
    return j;
}

CallbackSpec callback_from_json(const json& j) {
    CallbackSpec cb;
    cb.id = j.at("id").get<std::string>();
    const auto& kind = j.at("kind");
    const auto type = kind.at("type").get<std::string>();
    if (type == "timer") {
        cb.kind = TimerKind{std::chrono::nanoseconds(kind.at("period_ns").get<int64_t>())};
    } else if (type == "subscription") {
        cb.kind = SubscriptionKind{kind.at("topic").get<std::string>()};
    } else {
        throw SystemParseError("unknown callback kind: " + type);
    }
    cb.group = j.at("group").get<std::string>();
    if (j.contains("handler")) {
        const auto& h = j.at("handler");
        cb.handler.busywork = std::chrono::nanoseconds(h.value("busywork_ns", int64_t{0}));
        cb.handler.payload_bytes = h.value("payload_bytes", uint32_t{8});
    }
    if (j.contains("sched")) cb.sched = sched_from_json(j.at("sched"));
    if (j.contains("wcet_hint_ns"))
        cb.wcet_hint = std::chrono::nanoseconds(j.at("wcet_hint_ns").get<int64_t>());
    return cb;
}

}  // namespace

std::string sched_attr_to_json(const SchedAttr& attr) { return sched_to_json(attr).dump(); }

SchedAttr sched_attr_from_json(const std::string& json_text) {
    try {
        return sched_from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw SystemParseError(std::string("bad sched attr: ") + e.what());
    }
}

SystemDescription load_system(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SystemParseError(std::string("malformed JSON: ") + e.what());
    }
    try {
        SystemDescription desc;
        for (const auto& t : j.value("topics", json::array()))
            desc.topics.push_back(t.get<std::string>());
        for (const auto& g : j.value("groups", json::array())) {
            CallbackGroup group;
            group.id = g.at("id").get<std::string>();
            group.mutually_exclusive = g.value("mutually_exclusive", true);
            for (const auto& m : g.value("members", json::array()))
                group.members.push_back(m.get<std::string>());
            desc.groups.push_back(std::move(group));
        }
        for (const auto& n : j.value("nodes", json::array())) {
            NodeSpec node;
            node.id = n.at("id").get<std::string>();
            for (const auto& cb : n.value("callbacks", json::array()))
                node.callbacks.push_back(callback_from_json(cb));
            for (const auto& p : n.value("publications", json::array()))
                node.publications.emplace_back(p.at("callback").get<std::string>(),
                                               p.at("topic").get<std::string>());
            desc.nodes.push_back(std::move(node));
        }
        return desc;
    } catch (const json::exception& e) {
        throw SystemParseError(std::string("bad system description: ") + e.what());
    }
}

SystemDescription load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SystemParseError("cannot open " + path);
    return load_system(in);
}

std::string system_to_json(const SystemDescription& desc, int indent) {
    json j;
    j["topics"] = desc.topics;
    j["groups"] = json::array();
    for (const auto& g : desc.groups)
        j["groups"].push_back(
            {{"id", g.id}, {"mutually_exclusive", g.mutually_exclusive}, {"members", g.members}});
    j["nodes"] = json::array();
    for (const auto& n : desc.nodes) {
        json node;
        node["id"] = n.id;
        node["callbacks"] = json::array();
        for (const auto& cb : n.callbacks) node["callbacks"].push_back(callback_to_json(cb));
        node["publications"] = json::array();
        for (const auto& [cb, topic] : n.publications)
            node["publications"].push_back({{"callback", cb}, {"topic", topic}});
        j["nodes"].push_back(std::move(node));
    }
    return j.dump(indent);
}

void save_system_file(const SystemDescription& desc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SystemParseError("cannot write " + path);
    out << system_to_json(desc) << "\n";
}

}  // namespace rtexec
