#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "rtexec/schedctl.hpp"

using namespace rtexec;
using schedctl::Availability;
using schedctl::EnforceKind;

namespace {

bool known(Availability a) {
    return a == Availability::Available || a == Availability::Denied ||
           a == Availability::UnsupportedPlatform;
}

// scheduling state is per-thread on linux; keep the test runner's thread clean
template <typename F>
auto on_scratch_thread(F&& f) {
    decltype(f()) out{};
    std::thread t([&] { out = f(); });
    t.join();
    return out;
}

}  // namespace

TEST_SUITE("schedctl") {

TEST_CASE("probe is total and reports a core count") {
    const auto report = schedctl::probe_capabilities();
    CHECK(known(report.deadline));
    CHECK(known(report.fifo_rt));
    CHECK(known(report.fair));
    CHECK(known(report.affinity));
    CHECK(report.core_count >= 1);
    CHECK(report.to_json().find("core_count") != std::string::npos);
    // probing twice gives the same picture (side-effect free)
    const auto again = schedctl::probe_capabilities();
    CHECK(again.deadline == report.deadline);
    CHECK(again.fifo_rt == report.fifo_rt);
    CHECK(again.fair == report.fair);
}

TEST_CASE("applying fair nice is idempotent with matching read-back") {
    const auto outcome = on_scratch_thread([] {
        auto first = schedctl::apply_to_current_thread(SchedAttr::fair(5));
        auto second = schedctl::apply_to_current_thread(SchedAttr::fair(5));
        CHECK(first.kind == second.kind);
        CHECK(first.actual.policy == second.actual.policy);
        CHECK(first.actual.nice == second.actual.nice);
        return first;
    });
    if (outcome.kind == EnforceKind::Applied) {
        CHECK(outcome.actual.policy == "other");
        CHECK(outcome.actual.nice == 5);
    }
}

TEST_CASE("affinity enforcement pins the thread to the requested cpu") {
    const auto caps = schedctl::probe_capabilities();
    if (caps.affinity != Availability::Available || caps.core_count < 2) {
        MESSAGE("SKIP: affinity control unavailable here");
        return;
    }
    const int target = caps.core_count - 1;
    auto attr = SchedAttr::fair(0);
    attr.affinity = {target};

    const bool all_on_target = on_scratch_thread([&] {
        const auto outcome = schedctl::apply_to_current_thread(attr);
        if (outcome.kind != EnforceKind::Applied) return false;
        if (outcome.actual.affinity != std::set<int>{target}) return false;
        for (int i = 0; i < 100; ++i) {
            if (schedctl::current_cpu() != target) return false;
            std::this_thread::yield();
        }
        return true;
    });
    CHECK(all_on_target);
}

TEST_CASE("denied or unsupported policies fall back to fair and say so") {
    const auto caps = schedctl::probe_capabilities();
    const auto outcome = on_scratch_thread(
        [] { return schedctl::apply_to_current_thread(SchedAttr::fifo_rt(50)); });
    if (caps.fifo_rt == Availability::Available) {
        CHECK(outcome.kind == EnforceKind::Applied);
        CHECK(outcome.actual.policy == "fifo");
        CHECK(outcome.actual.priority == 50);
    } else {
        CHECK(outcome.kind == EnforceKind::Fallback);
        CHECK(outcome.actual.policy == "other");  // kept running under fair
        CHECK_FALSE(outcome.detail.empty());
    }
}

TEST_CASE("forced fallback takes the fallback path without touching the os") {
    ::setenv(schedctl::kForceFallbackEnv, "1", 1);
    const auto outcome = on_scratch_thread(
        [] { return schedctl::apply_to_current_thread(SchedAttr::fair(0)); });
    ::unsetenv(schedctl::kForceFallbackEnv);
    CHECK(outcome.kind == EnforceKind::Fallback);
    CHECK(outcome.detail.find(schedctl::kForceFallbackEnv) != std::string::npos);

    ::setenv(schedctl::kForceFallbackEnv, "1", 1);
    const auto probed = schedctl::probe_capabilities();
    ::unsetenv(schedctl::kForceFallbackEnv);
    CHECK(probed.fallback_forced);
    CHECK(probed.fifo_rt == Availability::Denied);
}

TEST_CASE("invalid attrs are a programming error") {
    CHECK_THROWS_AS(schedctl::apply_to_current_thread(SchedAttr::fifo_rt(0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(schedctl::apply_to_current_thread(SchedAttr::deadline(10, 5, 20)),
                    std::invalid_argument);
}

TEST_CASE("deadline application respects the probed capability") {
    const auto caps = schedctl::probe_capabilities();
    const auto outcome = on_scratch_thread([] {
        return schedctl::apply_to_current_thread(
            SchedAttr::deadline(2'000'000, 8'000'000, 10'000'000));
    });
    if (caps.deadline == Availability::Available) {
        CHECK(outcome.kind == EnforceKind::Applied);
        CHECK(outcome.actual.policy == "deadline");
        CHECK(outcome.actual.runtime_ns == 2'000'000);
    } else {
        CHECK(outcome.kind == EnforceKind::Fallback);
    }
}

}  // TEST_SUITE
