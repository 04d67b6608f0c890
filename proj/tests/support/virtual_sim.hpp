#pragma once

// Virtual-time models of the single-threaded wait-cycle semantics, for
// checking the executor's dispatch ordering against an independently written
// reference. All times are integer virtual nanoseconds; ties are exact.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "rtexec/executors.hpp"

namespace simtest {

struct SimCallback {
    bool is_timer = false;
    int64_t period = 0;  // timers
    int64_t phase = 0;   // first deadline = phase + period
    int64_t exec = 0;    // execution duration
    std::vector<int64_t> arrivals;  // subscriptions: message arrival times, sorted
};

struct SimScenario {
    std::vector<SimCallback> callbacks;
    int64_t horizon = 100;
    size_t max_executions = 400;
};

struct SimExec {
    uint32_t callback = 0;
    int64_t start = 0;

    bool operator==(const SimExec&) const = default;
};

namespace detail_sim {

struct State {
    std::vector<int64_t> next_deadline;           // timers
    std::vector<std::deque<int64_t>> queues;      // subscriptions
    std::vector<size_t> next_arrival;             // index into arrivals
};

inline State init(const SimScenario& sc) {
    State st;
    st.next_deadline.resize(sc.callbacks.size(), INT64_MAX);
    st.queues.resize(sc.callbacks.size());
    st.next_arrival.resize(sc.callbacks.size(), 0);
    for (size_t i = 0; i < sc.callbacks.size(); ++i)
        if (sc.callbacks[i].is_timer)
            st.next_deadline[i] = sc.callbacks[i].phase + sc.callbacks[i].period;
    return st;
}

// move arrivals with time <= t into the queues
inline void deliver(const SimScenario& sc, State& st, int64_t t) {
    for (size_t i = 0; i < sc.callbacks.size(); ++i) {
        const auto& arr = sc.callbacks[i].arrivals;
        while (st.next_arrival[i] < arr.size() && arr[st.next_arrival[i]] <= t)
            st.queues[i].push_back(arr[st.next_arrival[i]++]);
    }
}

// earliest instant after t at which anything becomes ready
inline std::optional<int64_t> next_wake(const SimScenario& sc, const State& st, int64_t t) {
    int64_t best = INT64_MAX;
    for (size_t i = 0; i < sc.callbacks.size(); ++i) {
        if (sc.callbacks[i].is_timer) best = std::min(best, st.next_deadline[i]);
        const auto& arr = sc.callbacks[i].arrivals;
        if (st.next_arrival[i] < arr.size()) best = std::min(best, arr[st.next_arrival[i]]);
    }
    if (best == INT64_MAX || best <= t) return std::nullopt;
    return best;
}

}  // namespace detail_sim

/// Reference simulator, written straight from the wait-cycle contract: block
/// until something is ready; snapshot; run every due timer in registration
/// order, then one message per non-empty subscription in registration order;
/// repeat. Deliberately shares no code with the executor.
inline std::vector<SimExec> simulate_reference(const SimScenario& sc) {
    auto st = detail_sim::init(sc);
    std::vector<SimExec> trace;
    int64_t t = 0;
    while (trace.size() < sc.max_executions) {
        detail_sim::deliver(sc, st, t);

        std::vector<uint32_t> due_timers, ready_subs;
        for (uint32_t i = 0; i < sc.callbacks.size(); ++i) {
            if (sc.callbacks[i].is_timer && st.next_deadline[i] <= t) due_timers.push_back(i);
            if (!sc.callbacks[i].is_timer && !st.queues[i].empty()) ready_subs.push_back(i);
        }

        if (due_timers.empty() && ready_subs.empty()) {
            auto wake = detail_sim::next_wake(sc, st, t);
            if (!wake || *wake > sc.horizon) break;
            t = *wake;
            continue;
        }

        for (uint32_t i : due_timers) st.next_deadline[i] += sc.callbacks[i].period;
        for (uint32_t i : due_timers) {
            trace.push_back({i, t});
            t += sc.callbacks[i].exec;
            detail_sim::deliver(sc, st, t);
            if (trace.size() >= sc.max_executions) return trace;
        }
        for (uint32_t i : ready_subs) {
            st.queues[i].pop_front();
            trace.push_back({i, t});
            t += sc.callbacks[i].exec;
            detail_sim::deliver(sc, st, t);
            if (trace.size() >= sc.max_executions) return trace;
        }
    }
    return trace;
}

/// Same wait-cycle state machine but the per-cycle order comes from the
/// production dispatch core the single-threaded executor runs on.
inline std::vector<SimExec> simulate_with_dispatch_core(const SimScenario& sc) {
    auto st = detail_sim::init(sc);
    std::vector<SimExec> trace;
    std::vector<bool> is_timer(sc.callbacks.size());
    for (size_t i = 0; i < sc.callbacks.size(); ++i) is_timer[i] = sc.callbacks[i].is_timer;

    int64_t t = 0;
    while (trace.size() < sc.max_executions) {
        detail_sim::deliver(sc, st, t);

        std::vector<bool> ready(sc.callbacks.size(), false);
        bool any = false;
        for (uint32_t i = 0; i < sc.callbacks.size(); ++i) {
            if (sc.callbacks[i].is_timer)
                ready[i] = st.next_deadline[i] <= t;
            else
                ready[i] = !st.queues[i].empty();
            any = any || ready[i];
        }

        if (!any) {
            auto wake = detail_sim::next_wake(sc, st, t);
            if (!wake || *wake > sc.horizon) break;
            t = *wake;
            continue;
        }

        const auto order = rtexec::detail::single_thread_cycle_order(is_timer, ready);
        for (uint32_t i : order)
            if (sc.callbacks[i].is_timer) st.next_deadline[i] += sc.callbacks[i].period;
        for (uint32_t i : order) {
            if (!sc.callbacks[i].is_timer) st.queues[i].pop_front();
            trace.push_back({i, t});
            t += sc.callbacks[i].exec;
            detail_sim::deliver(sc, st, t);
            if (trace.size() >= sc.max_executions) return trace;
        }
    }
    return trace;
}

inline SimScenario random_scenario(uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    SimScenario sc;
    sc.horizon = 100;
    const int n = pick(1, 4);
    int events = 0;
    for (int i = 0; i < n; ++i) {
        SimCallback cb;
        cb.exec = pick(0, 7);
        if (pick(0, 1) == 0) {
            cb.is_timer = true;
            cb.period = pick(5, 40);
            cb.phase = pick(0, 10);
        } else {
            const int k = pick(0, 5);
            for (int j = 0; j < k && events < 20; ++j, ++events)
                cb.arrivals.push_back(pick(0, 80));
            std::sort(cb.arrivals.begin(), cb.arrivals.end());
        }
        sc.callbacks.push_back(std::move(cb));
    }
    return sc;
}

}  // namespace simtest
