#include <doctest.h>

#include <sstream>

#include "rtexec/bench.hpp"
#include "rtexec/system_json.hpp"

#ifndef RTEXEC_TEST_DATA_DIR
#define RTEXEC_TEST_DATA_DIR "tests/data"
#endif

using namespace rtexec;

TEST_SUITE("system_json") {

TEST_CASE("system description round-trips through json") {
    bench::ExperimentConfig cfg;
    cfg.n_callbacks = 3;
    auto desc = bench::make_benchmark_system(cfg);
    desc.nodes[0].callbacks[0].sched = SchedAttr::deadline(1'000'000, 5'000'000, 10'000'000);
    desc.nodes[0].callbacks[1].sched = SchedAttr::fifo_rt(42);
    auto fair = SchedAttr::fair(5);
    fair.affinity = {0, 1};
    desc.nodes[0].callbacks[2].sched = fair;
    desc.nodes[1].callbacks[0].wcet_hint = std::chrono::microseconds(250);

    const auto text = system_to_json(desc);
    std::istringstream in(text);
    const auto back = load_system(in);
    CHECK(system_to_json(back) == text);
    CHECK(back.nodes[0].callbacks[1].sched->priority == 42);
    CHECK(back.nodes[0].callbacks[2].sched->affinity == std::set<int>{0, 1});
    CHECK(back.nodes[1].callbacks[0].wcet_hint == std::chrono::microseconds(250));
}

TEST_CASE("sched attr fragment round-trips") {
    auto a = SchedAttr::deadline(2'000'000, 8'000'000, 10'000'000);
    a.affinity = {1};
    CHECK(sched_attr_from_json(sched_attr_to_json(a)) == a);
    CHECK(sched_attr_from_json(sched_attr_to_json(SchedAttr::fair(-3))) == SchedAttr::fair(-3));
}

TEST_CASE("malformed input throws SystemParseError") {
    std::istringstream garbage("{not json");
    CHECK_THROWS_AS(load_system(garbage), SystemParseError);

    std::istringstream missing_keys(R"({"nodes":[{"callbacks":[{}]}]})");
    CHECK_THROWS_AS(load_system(missing_keys), SystemParseError);

    std::istringstream bad_kind(
        R"({"topics":[],"groups":[{"id":"g","members":["c"]}],
            "nodes":[{"id":"n","callbacks":[{"id":"c","kind":{"type":"service"},"group":"g"}]}]})");
    CHECK_THROWS_AS(load_system(bad_kind), SystemParseError);

    CHECK_THROWS_AS(load_system_file("/nonexistent/path.json"), SystemParseError);
}

TEST_CASE("shipped data files parse and validate") {
    const std::string dir = RTEXEC_TEST_DATA_DIR;
    const auto good = load_system_file(dir + "/benchmark_n4.json");
    CHECK(validate_system(good).ok());
    CHECK(build_graph(good).edges.size() == 4);

    const auto multi = load_system_file(dir + "/multi_member_group.json");
    CHECK(validate_system(multi).ok());
    const auto report = validate_isolation_constraints(multi, build_graph(multi));
    CHECK(report.group_violations.size() == 1);

    const auto cyc = load_system_file(dir + "/cyclic.json");
    CHECK_THROWS_AS(build_graph(cyc), CycleError);
}

}  // TEST_SUITE
