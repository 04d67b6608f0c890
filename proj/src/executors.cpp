#include "rtexec/executors.hpp"

#include <algorithm>
#include <cassert>
#include <condition_variable>
#include <mutex>
#include <set>
#include <thread>

#ifdef __linux__
#include <sys/syscall.h>
#include <unistd.h>
#endif

#include "rtexec/metrics.hpp"

namespace rtexec {

const char* to_string(ExecutorKind k) {
    switch (k) {
        case ExecutorKind::SingleThreaded: return "single_threaded";
        case ExecutorKind::MultiThreaded: return "multi_threaded";
        case ExecutorKind::CallbackIsolated: return "callback_isolated";
    }
    return "?";
}

std::optional<ExecutorKind> executor_kind_from_string(const std::string& s) {
    if (s == "single_threaded" || s == "ste") return ExecutorKind::SingleThreaded;
    if (s == "multi_threaded" || s == "mte") return ExecutorKind::MultiThreaded;
    if (s == "callback_isolated" || s == "cie") return ExecutorKind::CallbackIsolated;
    return std::nullopt;
}

const CallbackStats* ExecutorStats::find(const CallbackId& id) const {
    for (const auto& c : callbacks)
        if (c.id == id) return &c;
    return nullptr;
}

uint64_t ExecutorStats::executions_total() const {
    uint64_t total = 0;
    for (const auto& c : callbacks) total += c.executions;
    return total;
}

namespace detail {

std::vector<uint32_t> single_thread_cycle_order(const std::vector<bool>& is_timer,
                                                const std::vector<bool>& ready) {
    std::vector<uint32_t> order;
    for (uint32_t i = 0; i < ready.size(); ++i)
        if (is_timer[i] && ready[i]) order.push_back(i);
    for (uint32_t i = 0; i < ready.size(); ++i)
        if (!is_timer[i] && ready[i]) order.push_back(i);
    return order;
}

}  // namespace detail

namespace {

using Clock = std::chrono::steady_clock;

uint64_t tp_ns(Clock::time_point tp) {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(tp.time_since_epoch()).count());
}

uint64_t mono_ns() { return tp_ns(Clock::now()); }

uint64_t this_tid() {
#ifdef __linux__
    thread_local const uint64_t tid = static_cast<uint64_t>(::syscall(SYS_gettid));
    return tid;
#else
    return std::hash<std::thread::id>{}(std::this_thread::get_id());
#endif
}

void busy_spin(std::chrono::nanoseconds dur) {
    if (dur.count() <= 0) return;
    const auto until = Clock::now() + dur;
    while (Clock::now() < until) {
        // burn cycles; clock reads stay in user space
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ExecutorImpl
// ---------------------------------------------------------------------------

class ExecutorImpl final : public Executor {
public:
    explicit ExecutorImpl(ExecutorOptions opts) : opts_(std::move(opts)) {}

    ~ExecutorImpl() override {
        try {
            if (started_.load()) shutdown();
        } catch (...) {
        }
    }

    void start(TopicDomain& domain, const SystemDescription& desc) override;
    ExecutorStats stats() const override;
    ExecutorStats shutdown() override;
    ExecutorKind kind() const override { return opts_.kind; }

    struct Cell {
        CallbackSpec spec;
        uint32_t reg_index = 0;
        uint32_t group_index = 0;
        bool is_timer = false;
        std::vector<Publisher> pubs;
        std::vector<std::byte> default_payload;
        std::shared_ptr<SubscriptionQueue> queue;
        HandlerFn handler;
        std::optional<SchedAttr> sched;

        std::chrono::nanoseconds period{0};
        Clock::time_point next_deadline{};

        // private wakeup channel (callback-isolated threads)
        std::mutex own_mu;
        std::condition_variable own_cv;

        std::atomic<uint64_t> executions{0};
        std::atomic<uint64_t> overruns{0};
        std::atomic<uint64_t> busy_ns{0};
        std::atomic<int> in_flight{0};
        std::atomic<int> max_concurrency{0};
        std::atomic<uint64_t> prev_start_ns{0};
        std::atomic<uint64_t> prev_end_ns{0};

        std::mutex meta_mu;
        std::set<uint64_t> tids;
        std::vector<ExecInterval> intervals;
        std::optional<schedctl::EnforceOutcome> enforcement;

        ExecutorImpl* owner = nullptr;
    };

    DeliverySummary cell_publish(Cell& cell, std::span<const std::byte> payload) {
        DeliverySummary sum;
        for (auto& p : cell.pubs) {
            const auto one = p.publish(payload);
            sum.intra += one.intra;
            sum.inter += one.inter;
            sum.drops += one.drops;
        }
        return sum;
    }

private:
    void build_cells(TopicDomain& domain, const SystemDescription& desc);
    void run_one(Cell& cb, const Message* msg, uint64_t cycle);
    void record_handler_error(const CallbackId& id, const std::string& what);
    void wake_all();

    // instrumented wait-set lock
    std::unique_lock<std::mutex> lock_waitset() {
        std::unique_lock lk(ws_mu_, std::try_to_lock);
        if (!lk.owns_lock()) {
            ws_contended_.fetch_add(1, std::memory_order_relaxed);
            metrics::counters().waitset_lock_contended.fetch_add(1, std::memory_order_relaxed);
            lk.lock();
        }
        ws_acquisitions_.fetch_add(1, std::memory_order_relaxed);
        metrics::counters().waitset_lock_acquisitions.fetch_add(1, std::memory_order_relaxed);
        return lk;
    }

    static bool timer_overrun(const Cell& cb, uint64_t deadline_ns) {
        // the firing became due before the previous execution completed
        return cb.executions.load(std::memory_order_relaxed) > 0 &&
               deadline_ns <= cb.prev_end_ns.load(std::memory_order_relaxed);
    }

    static bool msg_overrun(const Cell& cb, const Message& m) {
        // the message arrived while the previous execution was running
        return cb.executions.load(std::memory_order_relaxed) > 0 &&
               m.enqueue_timestamp_ns >= cb.prev_start_ns.load(std::memory_order_relaxed) &&
               m.enqueue_timestamp_ns <= cb.prev_end_ns.load(std::memory_order_relaxed);
    }

    void ste_loop();
    void mte_loop();
    void cie_timer_loop(Cell& cb);
    void cie_sub_loop(Cell& cb);
    void cie_group_loop(std::vector<Cell*> members);
    void apply_cell_attr(Cell& cb);

    void register_worker_tid() {
        std::lock_guard lk(tids_mu_);
        worker_tids_.insert(this_tid());
    }
    void signal_ready() {
        std::lock_guard lk(ready_mu_);
        ++ready_count_;
        ready_cv_.notify_all();
    }

    ExecutorStats make_stats() const;

    ExecutorOptions opts_;
    std::vector<std::unique_ptr<Cell>> cells_;
    std::vector<uint32_t> timer_indices_;
    std::vector<uint32_t> sub_indices_;
    std::vector<std::thread> threads_;
    std::vector<std::string> thread_labels_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> started_{false};

    mutable std::mutex ws_mu_;
    std::condition_variable ws_cv_;
    std::vector<bool> group_busy_;
    std::vector<GroupId> group_ids_;
    std::atomic<uint64_t> generation_{0};
    std::atomic<uint64_t> cycles_{0};
    std::atomic<uint64_t> ws_acquisitions_{0};
    std::atomic<uint64_t> ws_contended_{0};
    std::atomic<uint64_t> fallbacks_{0};

    std::mutex ready_mu_;
    std::condition_variable ready_cv_;
    size_t ready_count_ = 0;

    std::mutex done_mu_;
    std::condition_variable done_cv_;
    size_t done_count_ = 0;
    std::vector<bool> thread_done_;

    mutable std::mutex control_mu_;
    std::optional<ExecutorStats> final_stats_;

    mutable std::mutex error_mu_;
    std::string error_;

    mutable std::mutex tids_mu_;
    std::set<uint64_t> worker_tids_;
};

const CallbackSpec& CallbackContext::spec() const {
    return static_cast<const ExecutorImpl::Cell*>(cell_)->spec;
}

DeliverySummary CallbackContext::publish(std::span<const std::byte> payload) {
    auto* cell = static_cast<ExecutorImpl::Cell*>(cell_);
    return cell->owner->cell_publish(*cell, payload);
}

void ExecutorImpl::build_cells(TopicDomain& domain, const SystemDescription& desc) {
    for (const auto& t : desc.topics) domain.register_topic(t);

    std::map<GroupId, uint32_t> group_index;
    for (const auto& g : desc.groups) {
        group_index.emplace(g.id, static_cast<uint32_t>(group_ids_.size()));
        group_ids_.push_back(g.id);
    }
    group_busy_.assign(group_ids_.size(), false);

    const bool install_hooks = opts_.kind != ExecutorKind::CallbackIsolated;

    for (const auto& node : desc.nodes) {
        for (const auto& cb : node.callbacks) {
            auto cell = std::make_unique<Cell>();
            cell->owner = this;
            cell->spec = cb;
            cell->reg_index = static_cast<uint32_t>(cells_.size());
            cell->group_index = group_index.at(cb.group);
            if (const auto* t = cb.timer()) {
                cell->is_timer = true;
                cell->period = t->period;
                timer_indices_.push_back(cell->reg_index);
            } else {
                const auto topic = domain.topic(cb.subscription()->topic);
                cell->queue = domain.subscribe(topic);
                sub_indices_.push_back(cell->reg_index);
            }
            for (const auto& [pub_cb, topic_name] : node.publications)
                if (pub_cb == cb.id) cell->pubs.push_back(domain.make_publisher(domain.topic(topic_name)));
            cell->default_payload.assign(cb.handler.payload_bytes, std::byte{0});

            if (auto it = opts_.handlers.find(cb.id); it != opts_.handlers.end()) {
                cell->handler = it->second;
            } else {
                Cell* raw = cell.get();
                cell->handler = [raw](CallbackContext& ctx) {
                    busy_spin(raw->spec.handler.busywork);
                    if (!raw->pubs.empty()) ctx.publish(raw->default_payload);
                };
            }
            if (auto it = opts_.sched_overrides.find(cb.id); it != opts_.sched_overrides.end())
                cell->sched = it->second;
            else
                cell->sched = cb.sched;

            cells_.push_back(std::move(cell));
        }
    }

    if (install_hooks) {
        const bool broadcast = opts_.kind == ExecutorKind::MultiThreaded;
        for (auto& cell : cells_) {
            if (!cell->queue) continue;
            cell->queue->set_ready_hook([this, broadcast] {
                {
                    auto lk = lock_waitset();  // serialize with scan-then-wait
                    (void)lk;
                }
                if (broadcast)
                    ws_cv_.notify_all();
                else
                    ws_cv_.notify_one();
            });
        }
    }

    // deterministic timer phases: the i-th timer starts i/T of its own
    // period late, so wake-ups spread across the period instead of aligning
    const auto base = Clock::now();
    const size_t n_timers = timer_indices_.size();
    for (size_t i = 0; i < n_timers; ++i) {
        Cell& c = *cells_[timer_indices_[i]];
        auto phase = std::chrono::nanoseconds{0};
        if (opts_.stagger_timer_phases && n_timers > 1)
            phase = c.period * static_cast<int64_t>(i) / static_cast<int64_t>(n_timers);
        c.next_deadline = base + c.period + phase;
    }
}

void ExecutorImpl::start(TopicDomain& domain, const SystemDescription& desc) {
    if (started_.exchange(true)) throw std::logic_error("executor already started");

    if (auto v = validate_system(desc); !v.ok())
        throw std::invalid_argument("invalid system description:\n" + v.to_string());

    std::optional<int> cores;
    if (int n = schedctl::probe_core_count(); n > 0) cores = n;
    for (const auto& node : desc.nodes)
        for (const auto& cb : node.callbacks) {
            const SchedAttr* attr = nullptr;
            if (auto it = opts_.sched_overrides.find(cb.id); it != opts_.sched_overrides.end())
                attr = &it->second;
            else if (cb.sched)
                attr = &*cb.sched;
            if (attr)
                if (auto v = validate_sched_attr(*attr, cores); !v.ok())
                    throw std::invalid_argument("invalid SchedAttr for " + cb.id + ":\n" +
                                                v.to_string());
        }

    if (opts_.kind == ExecutorKind::CallbackIsolated && opts_.strict) {
        std::string offenders;
        for (const auto& g : desc.groups)
            if (g.members.size() > 1)
                offenders += " " + g.id + "(" + std::to_string(g.members.size()) + ")";
        if (!offenders.empty())
            throw IsolationViolation("strict mode requires single-member groups; violating:" +
                                     offenders);
    }

    build_cells(domain, desc);

    std::vector<std::function<void()>> jobs;
    switch (opts_.kind) {
        case ExecutorKind::SingleThreaded:
            thread_labels_.push_back("ste");
            jobs.push_back([this] { ste_loop(); });
            break;
        case ExecutorKind::MultiThreaded: {
            int workers = opts_.workers;
            if (workers <= 0) workers = std::max(1u, std::thread::hardware_concurrency());
            for (int i = 0; i < workers; ++i) {
                thread_labels_.push_back("mte-worker-" + std::to_string(i));
                jobs.push_back([this] { mte_loop(); });
            }
            break;
        }
        case ExecutorKind::CallbackIsolated: {
            // one thread per group; strict mode has singleton groups
            std::map<uint32_t, std::vector<Cell*>> by_group;
            for (auto& c : cells_) by_group[c->group_index].push_back(c.get());
            for (auto& [gi, members] : by_group) {
                if (members.size() == 1) {
                    Cell* c = members.front();
                    thread_labels_.push_back(c->spec.id);
                    if (c->is_timer)
                        jobs.push_back([this, c] { cie_timer_loop(*c); });
                    else
                        jobs.push_back([this, c] { cie_sub_loop(*c); });
                } else {
                    thread_labels_.push_back("group-" + group_ids_[gi]);
                    auto copy = members;
                    jobs.push_back([this, copy] { cie_group_loop(copy); });
                }
            }
            break;
        }
    }

    thread_done_.assign(jobs.size(), false);
    threads_.reserve(jobs.size());
    for (size_t i = 0; i < jobs.size(); ++i)
        threads_.emplace_back([this, i, job = jobs[i]] {
            job();
            std::lock_guard lk(done_mu_);
            thread_done_[i] = true;
            ++done_count_;
            done_cv_.notify_all();
        });

    // wait until every thread is live (and, for callback-isolated, has
    // finished applying its scheduling attributes)
    std::unique_lock lk(ready_mu_);
    ready_cv_.wait(lk, [this] { return ready_count_ >= threads_.size(); });
}

void ExecutorImpl::run_one(Cell& cb, const Message* msg, uint64_t cycle) {
    const int now_in = cb.in_flight.fetch_add(1, std::memory_order_acq_rel) + 1;
    int seen = cb.max_concurrency.load(std::memory_order_relaxed);
    while (now_in > seen &&
           !cb.max_concurrency.compare_exchange_weak(seen, now_in, std::memory_order_relaxed)) {
    }

    const uint64_t start = mono_ns();
    CallbackContext ctx(&cb, msg);
    try {
        cb.handler(ctx);
    } catch (const std::exception& e) {
        record_handler_error(cb.spec.id, e.what());
    } catch (...) {
        record_handler_error(cb.spec.id, "unknown exception");
    }
    const uint64_t end = mono_ns();

    cb.busy_ns.fetch_add(end - start, std::memory_order_relaxed);
    cb.prev_start_ns.store(start, std::memory_order_relaxed);
    cb.prev_end_ns.store(end, std::memory_order_relaxed);
    cb.executions.fetch_add(1, std::memory_order_release);
    {
        std::lock_guard mk(cb.meta_mu);
        cb.tids.insert(this_tid());
        if (opts_.record_intervals) cb.intervals.push_back({start, end, this_tid(), cycle});
    }
    cb.in_flight.fetch_sub(1, std::memory_order_acq_rel);
}

void ExecutorImpl::record_handler_error(const CallbackId& id, const std::string& what) {
    {
        std::lock_guard lk(error_mu_);
        if (error_.empty()) error_ = "handler " + id + " threw: " + what;
    }
    stop_.store(true, std::memory_order_release);
    wake_all();
}

void ExecutorImpl::wake_all() {
    {
        std::lock_guard lk(ws_mu_);
    }
    ws_cv_.notify_all();
    for (auto& c : cells_) {
        {
            std::lock_guard lk(c->own_mu);
        }
        c->own_cv.notify_all();
        if (c->queue) c->queue->wake_waiters();
    }
}

// --------------------------- single-threaded -------------------------------

void ExecutorImpl::ste_loop() {
    register_worker_tid();
    signal_ready();

    const size_t n = cells_.size();
    std::vector<bool> is_timer(n, false), ready(n, false);
    for (const auto& c : cells_) is_timer[c->reg_index] = c->is_timer;

    auto lk = lock_waitset();
    while (!stop_.load(std::memory_order_acquire)) {
        const auto now = Clock::now();
        bool any = false;
        auto nearest = Clock::time_point::max();
        for (const auto& c : cells_) {
            bool r;
            if (c->is_timer) {
                r = c->next_deadline <= now;
                if (!r) nearest = std::min(nearest, c->next_deadline);
            } else {
                r = c->queue->size() > 0;
            }
            ready[c->reg_index] = r;
            any |= r;
        }

        if (!any) {
            if (nearest == Clock::time_point::max()) {
                metrics::counters().thread_parks.fetch_add(1, std::memory_order_relaxed);
                ws_cv_.wait(lk);
            } else {
                metrics::counters().timer_parks.fetch_add(1, std::memory_order_relaxed);
                ws_cv_.wait_until(lk, nearest);
            }
            continue;
        }

        const auto order = detail::single_thread_cycle_order(is_timer, ready);
        const uint64_t cycle = cycles_.fetch_add(1, std::memory_order_relaxed) + 1;
        generation_.fetch_add(1, std::memory_order_relaxed);

        // consume one deadline per due timer at snapshot time
        std::vector<std::pair<Cell*, uint64_t>> work;
        work.reserve(order.size());
        for (uint32_t idx : order) {
            Cell* c = cells_[idx].get();
            if (c->is_timer) {
                work.emplace_back(c, tp_ns(c->next_deadline));
                c->next_deadline += c->period;
            } else {
                work.emplace_back(c, 0);
            }
        }
        lk.unlock();

        for (auto [c, deadline] : work) {
            if (stop_.load(std::memory_order_acquire)) break;
            if (c->is_timer) {
                if (timer_overrun(*c, deadline)) c->overruns.fetch_add(1, std::memory_order_relaxed);
                run_one(*c, nullptr, cycle);
            } else {
                auto msg = c->queue->poll();
                if (msg) {
                    if (msg_overrun(*c, *msg)) c->overruns.fetch_add(1, std::memory_order_relaxed);
                    run_one(*c, &*msg, cycle);
                }
            }
        }
        lk = lock_waitset();
    }
    lk.unlock();

}

// ---------------------------- multi-threaded -------------------------------

void ExecutorImpl::mte_loop() {
    register_worker_tid();
    signal_ready();

    auto lk = lock_waitset();
    while (!stop_.load(std::memory_order_acquire)) {
        const auto now = Clock::now();
        Cell* pick = nullptr;
        uint64_t deadline = 0;
        auto nearest = Clock::time_point::max();

        for (uint32_t idx : timer_indices_) {
            Cell* c = cells_[idx].get();
            if (group_busy_[c->group_index]) continue;
            if (c->next_deadline <= now) {
                pick = c;
                break;
            }
            nearest = std::min(nearest, c->next_deadline);
        }
        if (!pick) {
            for (uint32_t idx : sub_indices_) {
                Cell* c = cells_[idx].get();
                if (group_busy_[c->group_index]) continue;
                if (c->queue->size() > 0) {
                    pick = c;
                    break;
                }
            }
        }

        if (!pick) {
            if (nearest == Clock::time_point::max()) {
                metrics::counters().thread_parks.fetch_add(1, std::memory_order_relaxed);
                ws_cv_.wait(lk);
            } else {
                metrics::counters().timer_parks.fetch_add(1, std::memory_order_relaxed);
                ws_cv_.wait_until(lk, nearest);
            }
            continue;
        }

        if (pick->is_timer) {
            deadline = tp_ns(pick->next_deadline);
            pick->next_deadline += pick->period;
        }
        group_busy_[pick->group_index] = true;
        lk.unlock();

        if (pick->is_timer) {
            if (timer_overrun(*pick, deadline)) pick->overruns.fetch_add(1, std::memory_order_relaxed);
            run_one(*pick, nullptr, 0);
        } else {
            auto msg = pick->queue->poll();
            if (msg) {
                if (msg_overrun(*pick, *msg)) pick->overruns.fetch_add(1, std::memory_order_relaxed);
                run_one(*pick, &*msg, 0);
            }
        }

        lk = lock_waitset();
        group_busy_[pick->group_index] = false;
        generation_.fetch_add(1, std::memory_order_relaxed);  // wait-set rebuild
        ws_cv_.notify_all();
    }
    lk.unlock();

}

// --------------------------- callback-isolated -----------------------------

void ExecutorImpl::apply_cell_attr(Cell& cb) {
    if (!opts_.apply_sched_attrs || !cb.sched) return;
    auto outcome = schedctl::apply_to_current_thread(*cb.sched);
    if (!outcome.applied()) fallbacks_.fetch_add(1, std::memory_order_relaxed);
    std::lock_guard lk(cb.meta_mu);
    cb.enforcement = std::move(outcome);
}

void ExecutorImpl::cie_timer_loop(Cell& cb) {
    register_worker_tid();
    apply_cell_attr(cb);
    signal_ready();

    std::unique_lock lk(cb.own_mu);
    while (!stop_.load(std::memory_order_acquire)) {
        if (cb.next_deadline > Clock::now()) {
            metrics::counters().timer_parks.fetch_add(1, std::memory_order_relaxed);
            cb.own_cv.wait_until(lk, cb.next_deadline);
            continue;  // re-check stop and time
        }
        const uint64_t deadline = tp_ns(cb.next_deadline);
        cb.next_deadline += cb.period;
        lk.unlock();

        // a deadline that passed before the previous completion is a
        // deferred activation, never a concurrent one
        if (timer_overrun(cb, deadline)) cb.overruns.fetch_add(1, std::memory_order_relaxed);
        run_one(cb, nullptr, 0);

        lk.lock();
    }
    lk.unlock();

}

void ExecutorImpl::cie_sub_loop(Cell& cb) {
    register_worker_tid();
    apply_cell_attr(cb);
    signal_ready();

    while (!stop_.load(std::memory_order_acquire)) {
        auto msg = cb.queue->await(&stop_);
        if (!msg) break;  // closed or interrupted
        if (msg_overrun(cb, *msg)) cb.overruns.fetch_add(1, std::memory_order_relaxed);
        run_one(cb, &*msg, 0);
    }

}

void ExecutorImpl::cie_group_loop(std::vector<Cell*> members) {
    register_worker_tid();
    // permissive mode: the group thread carries the first declared attr
    for (Cell* c : members)
        if (c->sched) {
            apply_cell_attr(*c);
            break;
        }
    signal_ready();

    Cell& lead = *members.front();  // its cv doubles as the group wakeup channel
    for (Cell* c : members)
        if (c->queue)
            c->queue->set_ready_hook([&lead] {
                {
                    std::lock_guard lk(lead.own_mu);
                }
                lead.own_cv.notify_one();
            });

    std::vector<bool> is_timer(members.size(), false), ready(members.size(), false);
    for (size_t i = 0; i < members.size(); ++i) is_timer[i] = members[i]->is_timer;

    std::unique_lock lk(lead.own_mu);
    while (!stop_.load(std::memory_order_acquire)) {
        const auto now = Clock::now();
        bool any = false;
        auto nearest = Clock::time_point::max();
        for (size_t i = 0; i < members.size(); ++i) {
            Cell* c = members[i];
            bool r;
            if (c->is_timer) {
                r = c->next_deadline <= now;
                if (!r) nearest = std::min(nearest, c->next_deadline);
            } else {
                r = c->queue->size() > 0;
            }
            ready[i] = r;
            any |= r;
        }
        if (!any) {
            if (nearest == Clock::time_point::max()) {
                metrics::counters().thread_parks.fetch_add(1, std::memory_order_relaxed);
                lead.own_cv.wait(lk);
            } else {
                metrics::counters().timer_parks.fetch_add(1, std::memory_order_relaxed);
                lead.own_cv.wait_until(lk, nearest);
            }
            continue;
        }
        const auto order = detail::single_thread_cycle_order(is_timer, ready);
        std::vector<std::pair<Cell*, uint64_t>> work;
        for (uint32_t i : order) {
            Cell* c = members[i];
            if (c->is_timer) {
                work.emplace_back(c, tp_ns(c->next_deadline));
                c->next_deadline += c->period;
            } else {
                work.emplace_back(c, 0);
            }
        }
        lk.unlock();
        for (auto [c, deadline] : work) {
            if (stop_.load(std::memory_order_acquire)) break;
            if (c->is_timer) {
                if (timer_overrun(*c, deadline)) c->overruns.fetch_add(1, std::memory_order_relaxed);
                run_one(*c, nullptr, 0);
            } else {
                auto msg = c->queue->poll();
                if (msg) {
                    if (msg_overrun(*c, *msg)) c->overruns.fetch_add(1, std::memory_order_relaxed);
                    run_one(*c, &*msg, 0);
                }
            }
        }
        lk.lock();
    }
    lk.unlock();

}

// ------------------------------- control -----------------------------------

ExecutorStats ExecutorImpl::make_stats() const {
    ExecutorStats s;
    s.kind = opts_.kind;
    for (const auto& c : cells_) {
        CallbackStats cs;
        cs.id = c->spec.id;
        cs.group = c->spec.group;
        cs.is_timer = c->is_timer;
        cs.executions = c->executions.load(std::memory_order_acquire);
        cs.overruns = c->overruns.load(std::memory_order_relaxed);
        cs.max_concurrency = c->max_concurrency.load(std::memory_order_relaxed);
        cs.busy_ns = c->busy_ns.load(std::memory_order_relaxed);
        cs.queue_drops = c->queue ? c->queue->drops() : 0;
        {
            std::lock_guard mk(c->meta_mu);
            cs.thread_ids.assign(c->tids.begin(), c->tids.end());
            cs.enforcement = c->enforcement;
            cs.intervals = c->intervals;
        }
        s.callbacks.push_back(std::move(cs));
    }
    s.wait_cycles = cycles_.load(std::memory_order_relaxed);
    s.waitset_generation = generation_.load(std::memory_order_relaxed);
    s.waitset_lock_acquisitions = ws_acquisitions_.load(std::memory_order_relaxed);
    s.waitset_lock_contended = ws_contended_.load(std::memory_order_relaxed);
    s.fallback_count = fallbacks_.load(std::memory_order_relaxed);
    {
        std::lock_guard lk(error_mu_);
        s.error = error_;
    }
    s.clean = s.error.empty();
    return s;
}

ExecutorStats ExecutorImpl::stats() const {
    {
        std::lock_guard lk(control_mu_);
        if (final_stats_) return *final_stats_;
    }
    return make_stats();
}

ExecutorStats ExecutorImpl::shutdown() {
    {
        std::lock_guard tk(tids_mu_);
        assert(!worker_tids_.count(this_tid()) &&
               "executor control operations must not be called from handlers");
    }
    std::lock_guard lk(control_mu_);
    if (final_stats_) return *final_stats_;

    stop_.store(true, std::memory_order_release);
    wake_all();

    const auto grace_end = Clock::now() + opts_.shutdown_grace;
    {
        std::unique_lock dk(done_mu_);
        done_cv_.wait_until(dk, grace_end, [this] { return done_count_ >= threads_.size(); });
    }
    std::vector<CallbackId> timed_out;
    for (size_t i = 0; i < threads_.size(); ++i) {
        bool finished;
        {
            std::lock_guard dk(done_mu_);
            finished = thread_done_[i];
        }
        if (finished) {
            threads_[i].join();
        } else {
            timed_out.push_back(thread_labels_[i]);
            threads_[i].detach();
        }
    }
    // unhook queues so later publishers cannot call into a dead executor
    for (auto& c : cells_)
        if (c->queue) c->queue->set_ready_hook({});

    auto s = make_stats();
    s.timed_out = timed_out;
    if (!timed_out.empty()) {
        s.clean = false;
        if (s.error.empty()) {
            s.error = "shutdown timed out waiting for:";
            for (const auto& id : timed_out) s.error += " " + id;
        }
    }
    final_stats_ = s;
    return s;
}

std::unique_ptr<Executor> Executor::create(const ExecutorOptions& options) {
    return std::make_unique<ExecutorImpl>(options);
}

}  // namespace rtexec
