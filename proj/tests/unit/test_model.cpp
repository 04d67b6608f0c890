#include <doctest.h>

#include <random>

#include "rtexec/bench.hpp"
#include "rtexec/model.hpp"

using namespace rtexec;
using namespace std::chrono_literals;

namespace {

SystemDescription two_callback_chain() {
    SystemDescription desc;
    desc.topics = {"/x"};
    desc.groups = {{"gt", true, {"T"}}, {"gs", true, {"S"}}};
    NodeSpec node;
    node.id = "n";
    CallbackSpec t;
    t.id = "T";
    t.kind = TimerKind{10ms};
    t.group = "gt";
    CallbackSpec s;
    s.id = "S";
    s.kind = SubscriptionKind{"/x"};
    s.group = "gs";
    node.callbacks = {t, s};
    node.publications = {{"T", "/x"}};
    desc.nodes = {node};
    return desc;
}

bool has_violation_on(const ValidationResult& r, const std::string& field) {
    for (const auto& v : r.violations)
        if (v.field == field) return true;
    return false;
}

// direct predicate, used as the property-test oracle
bool attr_valid(const SchedAttr& a, std::optional<int> cores) {
    bool ok = true;
    switch (a.policy) {
        case SchedPolicy::Deadline:
            ok = a.runtime_ns > 0 && a.runtime_ns <= a.deadline_ns && a.deadline_ns <= a.period_ns;
            break;
        case SchedPolicy::FifoRt: ok = a.priority >= 1 && a.priority <= 99; break;
        case SchedPolicy::Fair: ok = a.nice >= -20 && a.nice <= 19; break;
    }
    for (int c : a.affinity) {
        if (c < 0) ok = false;
        if (cores && c >= *cores) ok = false;
    }
    return ok;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("sched attr accepts the cbs shape") {
    CHECK(validate_sched_attr(SchedAttr::deadline(2'000'000, 8'000'000, 10'000'000)).ok());
}

TEST_CASE("sched attr rejects runtime above deadline") {
    const auto r = validate_sched_attr(SchedAttr::deadline(12'000'000, 8'000'000, 10'000'000));
    CHECK_FALSE(r.ok());
    CHECK(has_violation_on(r, "runtime_ns"));
    CHECK(r.to_string().find("runtime_ns > deadline_ns") != std::string::npos);
}

TEST_CASE("sched attr priority bounds") {
    CHECK_FALSE(validate_sched_attr(SchedAttr::fifo_rt(0)).ok());
    CHECK(validate_sched_attr(SchedAttr::fifo_rt(1)).ok());
    CHECK(validate_sched_attr(SchedAttr::fifo_rt(99)).ok());
    CHECK_FALSE(validate_sched_attr(SchedAttr::fifo_rt(100)).ok());
    const auto r = validate_sched_attr(SchedAttr::fifo_rt(0));
    CHECK(r.to_string().find("priority below 1") != std::string::npos);
}

TEST_CASE("sched attr nice bounds and affinity vs core count") {
    CHECK_FALSE(validate_sched_attr(SchedAttr::fair(-21)).ok());
    CHECK(validate_sched_attr(SchedAttr::fair(19)).ok());
    auto a = SchedAttr::fair(0);
    a.affinity = {0, 5};
    CHECK(validate_sched_attr(a).ok());  // no enforcement target, no core bound
    CHECK_FALSE(validate_sched_attr(a, 2).ok());
    a.affinity = {0, 1};
    CHECK(validate_sched_attr(a, 2).ok());
}

TEST_CASE("sched attr validation matches the direct predicate") {
    std::mt19937_64 rng(20240811);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int i = 0; i < 600; ++i) {
        SchedAttr a;
        switch (pick(0, 2)) {
            case 0:
                a.policy = SchedPolicy::Deadline;
                a.runtime_ns = static_cast<uint64_t>(pick(0, 12)) * 1'000'000;
                a.deadline_ns = static_cast<uint64_t>(pick(0, 12)) * 1'000'000;
                a.period_ns = static_cast<uint64_t>(pick(0, 12)) * 1'000'000;
                break;
            case 1:
                a.policy = SchedPolicy::FifoRt;
                a.priority = pick(-5, 105);
                break;
            default:
                a.policy = SchedPolicy::Fair;
                a.nice = pick(-25, 25);
                break;
        }
        if (pick(0, 1)) a.affinity.insert(pick(-1, 4));
        std::optional<int> cores;
        if (pick(0, 1)) cores = pick(1, 4);
        CAPTURE(i);
        CHECK(validate_sched_attr(a, cores).ok() == attr_valid(a, cores));
    }
}

TEST_CASE("two-vertex chain builds one edge in topo order") {
    const auto graph = build_graph(two_callback_chain());
    REQUIRE(graph.vertices.size() == 2);
    REQUIRE(graph.edges.size() == 1);
    const auto t = *graph.index_of("T");
    const auto s = *graph.index_of("S");
    CHECK(graph.edges[0] == std::make_pair(t, s));
    CHECK(graph.topo_order == std::vector<uint32_t>{t, s});
    CHECK(graph.warnings.empty());
}

TEST_CASE("two-callback cycle is rejected with the cycle listed") {
    SystemDescription desc;
    desc.topics = {"/x", "/y"};
    desc.groups = {{"ga", true, {"A"}}, {"gb", true, {"B"}}};
    NodeSpec node;
    node.id = "n";
    CallbackSpec a;
    a.id = "A";
    a.kind = SubscriptionKind{"/y"};
    a.group = "ga";
    CallbackSpec b;
    b.id = "B";
    b.kind = SubscriptionKind{"/x"};
    b.group = "gb";
    node.callbacks = {a, b};
    node.publications = {{"A", "/x"}, {"B", "/y"}};
    desc.nodes = {node};

    try {
        build_graph(desc);
        FAIL("expected CycleError");
    } catch (const CycleError& e) {
        auto cycle = e.cycle();
        std::sort(cycle.begin(), cycle.end());
        CHECK(cycle == std::vector<CallbackId>{"A", "B"});
    }
}

TEST_CASE("the n=4 benchmark pair yields 8 vertices and 4 disjoint edges") {
    bench::ExperimentConfig cfg;
    cfg.n_callbacks = 4;
    const auto graph = build_graph(bench::make_benchmark_system(cfg));
    CHECK(graph.vertices.size() == 8);
    REQUIRE(graph.edges.size() == 4);
    std::set<uint32_t> endpoints;
    for (auto [a, b] : graph.edges) {
        endpoints.insert(a);
        endpoints.insert(b);
    }
    CHECK(endpoints.size() == 8);  // disjoint
}

TEST_CASE("build_graph is deterministic and orders every edge") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 30; ++round) {
        // layered random DAG: topics only flow from earlier to later layers
        SystemDescription desc;
        const int layers = 3;
        const int per_layer = 1 + static_cast<int>(rng() % 3);
        NodeSpec node;
        node.id = "n";
        for (int l = 0; l < layers; ++l)
            for (int i = 0; i < per_layer; ++i) {
                const std::string id = "c" + std::to_string(l) + "_" + std::to_string(i);
                const std::string topic = "/t" + std::to_string(l) + "_" + std::to_string(i);
                desc.topics.push_back(topic);
                desc.groups.push_back({"g" + id, true, {id}});
                CallbackSpec cb;
                cb.id = id;
                cb.group = "g" + id;
                if (l == 0) {
                    cb.kind = TimerKind{10ms};
                } else {
                    // subscribe to a random topic from the previous layer
                    const int j = static_cast<int>(rng() % per_layer);
                    cb.kind = SubscriptionKind{"/t" + std::to_string(l - 1) + "_" +
                                               std::to_string(j)};
                }
                node.publications.emplace_back(id, topic);
                node.callbacks.push_back(cb);
            }
        desc.nodes = {node};

        const auto g1 = build_graph(desc);
        const auto g2 = build_graph(desc);
        CHECK(g1.edges == g2.edges);
        CHECK(g1.topo_order == g2.topo_order);
        for (auto [a, b] : g1.edges) CHECK(g1.topo_index(a) < g1.topo_index(b));
    }
}

TEST_CASE("dangling subscription warns by default and can be escalated") {
    auto desc = two_callback_chain();
    desc.nodes[0].publications.clear();  // nobody publishes /x anymore
    const auto graph = build_graph(desc);
    REQUIRE(graph.warnings.size() == 1);
    CHECK(graph.warnings[0].find("/x") != std::string::npos);
    CHECK(graph.edges.empty());

    BuildGraphOptions opts;
    opts.dangling_topic_is_error = true;
    CHECK_THROWS_AS(build_graph(desc, opts), DanglingTopicError);
}

TEST_CASE("validate_system catches broken references") {
    auto desc = two_callback_chain();
    desc.nodes[0].callbacks[1].group = "missing";
    CHECK_FALSE(validate_system(desc).ok());

    desc = two_callback_chain();
    desc.nodes[0].callbacks[1].kind = SubscriptionKind{"/nope"};
    CHECK_FALSE(validate_system(desc).ok());

    desc = two_callback_chain();
    desc.nodes[0].callbacks[0].id = "S";  // duplicate id
    CHECK_FALSE(validate_system(desc).ok());

    desc = two_callback_chain();
    std::get<TimerKind>(desc.nodes[0].callbacks[0].kind).period = 0ns;
    CHECK_FALSE(validate_system(desc).ok());

    desc = two_callback_chain();
    desc.groups[0].members = {"T", "S"};  // disagrees with S.group == gs
    CHECK_FALSE(validate_system(desc).ok());
}

TEST_CASE("multi-member group is flagged by the constraint report") {
    auto desc = two_callback_chain();
    desc.groups = {{"g", true, {"T", "S"}}};
    desc.nodes[0].callbacks[0].group = "g";
    desc.nodes[0].callbacks[1].group = "g";
    const auto graph = build_graph(desc);
    const auto report = validate_isolation_constraints(desc, graph);
    REQUIRE(report.group_violations.size() == 1);
    CHECK(report.group_violations[0].group == "g");
    CHECK(report.group_violations[0].members == 2);
    CHECK(report.to_string().find("group g has 2 members") != std::string::npos);
}

TEST_CASE("wcet hints against inter-arrival, including chain propagation") {
    auto desc = two_callback_chain();

    SUBCASE("timer hint exceeding its period is a risk") {
        desc.nodes[0].callbacks[0].wcet_hint = 12ms;
        const auto report = validate_isolation_constraints(desc, build_graph(desc));
        REQUIRE(report.reentrancy_risks.size() == 1);
        CHECK(report.reentrancy_risks[0].callback == "T");
        CHECK(report.reentrancy_risks[0].min_interarrival == 10ms);
    }
    SUBCASE("small hints pass") {
        desc.nodes[0].callbacks[0].wcet_hint = 1ms;
        desc.nodes[0].callbacks[1].wcet_hint = 1ms;
        CHECK(validate_isolation_constraints(desc, build_graph(desc)).empty());
    }
    SUBCASE("subscription inherits the upstream timer period") {
        desc.nodes[0].callbacks[1].wcet_hint = 12ms;
        const auto report = validate_isolation_constraints(desc, build_graph(desc));
        REQUIRE(report.reentrancy_risks.size() == 1);
        CHECK(report.reentrancy_risks[0].callback == "S");
        CHECK(report.reentrancy_risks[0].min_interarrival == 10ms);
    }
    SUBCASE("subscription with no upstream timer is not statically checkable") {
        desc.nodes[0].publications.clear();
        desc.nodes[0].callbacks[1].wcet_hint = 12h;
        CHECK(validate_isolation_constraints(desc, build_graph(desc)).empty());
    }
}

}  // TEST_SUITE
