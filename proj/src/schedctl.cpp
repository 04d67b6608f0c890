#include "rtexec/schedctl.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

#ifdef __linux__
#include <sched.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

#include <json.hpp>

namespace rtexec::schedctl {

const char* to_string(Availability a) {
    switch (a) {
        case Availability::Available: return "available";
        case Availability::Denied: return "denied";
        case Availability::UnsupportedPlatform: return "unsupported-platform";
    }
    return "?";
}

const char* to_string(EnforceKind k) {
    switch (k) {
        case EnforceKind::Applied: return "applied";
        case EnforceKind::Fallback: return "fallback";
        case EnforceKind::Mismatch: return "mismatch";
    }
    return "?";
}

Availability CapabilityReport::for_policy(SchedPolicy p) const {
    switch (p) {
        case SchedPolicy::Deadline: return deadline;
        case SchedPolicy::FifoRt: return fifo_rt;
        case SchedPolicy::Fair: return fair;
    }
    return Availability::UnsupportedPlatform;
}

std::string CapabilityReport::to_json() const {
    nlohmann::json j;
    j["deadline"] = to_string(deadline);
    j["fifo_rt"] = to_string(fifo_rt);
    j["fair"] = to_string(fair);
    j["affinity"] = to_string(affinity);
    j["core_count"] = core_count;
    j["fallback_forced"] = fallback_forced;
    return j.dump(2);
}

namespace {

bool fallback_forced() {
    const char* v = std::getenv(kForceFallbackEnv);
    return v && *v;
}

#ifdef __linux__

// glibc exposes no wrapper for sched_setattr/sched_getattr
struct KernelSchedAttr {
    uint32_t size;
    uint32_t sched_policy;
    uint64_t sched_flags;
    int32_t sched_nice;
    uint32_t sched_priority;
    uint64_t sched_runtime;
    uint64_t sched_deadline;
    uint64_t sched_period;
};

#ifndef SCHED_DEADLINE
#define SCHED_DEADLINE 6
#endif

int sys_sched_setattr(const KernelSchedAttr& attr) {
    return static_cast<int>(::syscall(SYS_sched_setattr, 0, &attr, 0));
}

int sys_sched_getattr(KernelSchedAttr& attr) {
    return static_cast<int>(
        ::syscall(SYS_sched_getattr, 0, &attr, sizeof(KernelSchedAttr), 0));
}

pid_t my_tid() { return static_cast<pid_t>(::syscall(SYS_gettid)); }

Availability classify_errno(int err) {
    if (err == EPERM || err == EACCES) return Availability::Denied;
    return Availability::UnsupportedPlatform;
}

int set_deadline(uint64_t runtime_ns, uint64_t deadline_ns, uint64_t period_ns) {
    KernelSchedAttr attr{};
    attr.size = sizeof(attr);
    attr.sched_policy = SCHED_DEADLINE;
    attr.sched_runtime = runtime_ns;
    attr.sched_deadline = deadline_ns;
    attr.sched_period = period_ns;
    return sys_sched_setattr(attr);
}

int set_fifo(int priority) {
    sched_param sp{};
    sp.sched_priority = priority;
    return ::sched_setscheduler(0, SCHED_FIFO, &sp);  // thread-scoped on Linux
}

int set_fair(int nice) {
    sched_param sp{};
    if (::sched_setscheduler(0, SCHED_OTHER, &sp) != 0) return -1;
    if (::setpriority(PRIO_PROCESS, static_cast<id_t>(my_tid()), nice) != 0) return -1;
    return 0;
}

int set_affinity(const std::set<int>& cpus) {
    cpu_set_t set;
    CPU_ZERO(&set);
    for (int c : cpus) CPU_SET(c, &set);
    return ::sched_setaffinity(0, sizeof(set), &set);
}

int probed_core_count() {
    cpu_set_t set;
    CPU_ZERO(&set);
    if (::sched_getaffinity(0, sizeof(set), &set) == 0) return CPU_COUNT(&set);
    long n = ::sysconf(_SC_NPROCESSORS_ONLN);
    return n > 0 ? static_cast<int>(n) : 1;
}

#endif  // __linux__

}  // namespace

int probe_core_count() {
#ifdef __linux__
    return probed_core_count();
#else
    return static_cast<int>(std::thread::hardware_concurrency());
#endif
}

ThreadSchedState read_current_thread_state() {
    ThreadSchedState st;
#ifdef __linux__
    const int policy = ::sched_getscheduler(0);
    switch (policy) {
        case SCHED_FIFO: st.policy = "fifo"; break;
        case SCHED_RR: st.policy = "rr"; break;
        case SCHED_DEADLINE: st.policy = "deadline"; break;
        case SCHED_OTHER: st.policy = "other"; break;
        default: st.policy = policy < 0 ? "unknown" : std::to_string(policy); break;
    }
    sched_param sp{};
    if (::sched_getparam(0, &sp) == 0) st.priority = sp.sched_priority;
    errno = 0;
    const int nice = ::getpriority(PRIO_PROCESS, static_cast<id_t>(my_tid()));
    if (errno == 0) st.nice = nice;
    KernelSchedAttr attr{};
    if (sys_sched_getattr(attr) == 0 && attr.sched_policy == SCHED_DEADLINE) {
        st.runtime_ns = attr.sched_runtime;
        st.deadline_ns = attr.sched_deadline;
        st.period_ns = attr.sched_period;
    }
    cpu_set_t set;
    CPU_ZERO(&set);
    if (::sched_getaffinity(0, sizeof(set), &set) == 0)
        for (int c = 0; c < CPU_SETSIZE; ++c)
            if (CPU_ISSET(c, &set)) st.affinity.insert(c);
#else
    st.policy = "unsupported";
#endif
    return st;
}

int current_cpu() {
#ifdef __linux__
    return ::sched_getcpu();
#else
    return -1;
#endif
}

CapabilityReport probe_capabilities() {
    CapabilityReport report;
    report.fallback_forced = fallback_forced();
#ifdef __linux__
    report.core_count = probed_core_count();
    if (report.fallback_forced) {
        report.deadline = Availability::Denied;
        report.fifo_rt = Availability::Denied;
        report.fair = Availability::Available;
        report.affinity = Availability::Denied;
        return report;
    }
    // scratch thread: attempts never outlive it, main thread untouched
    std::thread probe([&report] {
        if (set_deadline(1'000'000, 10'000'000, 10'000'000) == 0) {
            report.deadline = Availability::Available;
            sched_param sp{};
            ::sched_setscheduler(0, SCHED_OTHER, &sp);  // revert
        } else {
            report.deadline = classify_errno(errno);
        }
        if (set_fifo(1) == 0) {
            report.fifo_rt = Availability::Available;
            sched_param sp{};
            ::sched_setscheduler(0, SCHED_OTHER, &sp);
        } else {
            report.fifo_rt = classify_errno(errno);
        }
        if (set_fair(1) == 0) {
            report.fair = Availability::Available;
            ::setpriority(PRIO_PROCESS, static_cast<id_t>(my_tid()), 0);
        } else {
            report.fair = classify_errno(errno);
        }
        cpu_set_t original;
        CPU_ZERO(&original);
        const bool have_original = ::sched_getaffinity(0, sizeof(original), &original) == 0;
        if (set_affinity({0}) == 0) {
            report.affinity = Availability::Available;
            if (have_original) ::sched_setaffinity(0, sizeof(original), &original);
        } else {
            report.affinity = classify_errno(errno);
        }
    });
    probe.join();
#else
    report.core_count = static_cast<int>(std::thread::hardware_concurrency());
    report.fair = Availability::Available;  // best effort via std::thread only
#endif
    return report;
}

EnforceOutcome apply_to_current_thread(const SchedAttr& attr) {
    if (auto v = validate_sched_attr(attr); !v.ok())
        throw std::invalid_argument("invalid SchedAttr: " + v.to_string());

    EnforceOutcome out;
    out.intended = attr;

    if (fallback_forced()) {
        out.kind = EnforceKind::Fallback;
        out.detail = std::string("fallback forced via ") + kForceFallbackEnv;
        out.actual = read_current_thread_state();
        return out;
    }

#ifdef __linux__
    int rc = -1;
    switch (attr.policy) {
        case SchedPolicy::Deadline:
            rc = set_deadline(attr.runtime_ns, attr.deadline_ns, attr.period_ns);
            break;
        case SchedPolicy::FifoRt:
            rc = set_fifo(attr.priority);
            break;
        case SchedPolicy::Fair:
            rc = set_fair(attr.nice);
            break;
    }
    if (rc != 0) {
        const int err = errno;
        out.kind = EnforceKind::Fallback;
        out.detail = std::string(to_string(attr.policy)) + ": " + std::strerror(err);
        set_fair(0);  // keep running under the fair scheduler
        out.actual = read_current_thread_state();
        return out;
    }

    if (!attr.affinity.empty()) out.affinity_applied = set_affinity(attr.affinity) == 0;

    out.actual = read_current_thread_state();

    bool match = true;
    switch (attr.policy) {
        case SchedPolicy::Deadline:
            match = out.actual.policy == "deadline" && out.actual.runtime_ns == attr.runtime_ns &&
                    out.actual.deadline_ns == attr.deadline_ns &&
                    out.actual.period_ns == attr.period_ns;
            break;
        case SchedPolicy::FifoRt:
            match = out.actual.policy == "fifo" && out.actual.priority == attr.priority;
            break;
        case SchedPolicy::Fair:
            match = out.actual.policy == "other" && out.actual.nice == attr.nice;
            break;
    }
    if (!attr.affinity.empty()) match = match && out.affinity_applied && out.actual.affinity == attr.affinity;

    out.kind = match ? EnforceKind::Applied : EnforceKind::Mismatch;
    if (!match) out.detail = "read-back disagrees with request";
    return out;
#else
    out.kind = EnforceKind::Fallback;
    out.detail = "no scheduling control on this platform";
    out.actual = read_current_thread_state();
    return out;
#endif
}

}  // namespace rtexec::schedctl
