#pragma once

#include <optional>
#include <string>

#include "rtexec/model.hpp"

namespace rtexec::schedctl {

/// Set to any non-empty value to skip all OS scheduling calls and take the
/// fallback path deterministically (CI without privileges).
inline constexpr const char* kForceFallbackEnv = "RTEXEC_FORCE_SCHED_FALLBACK";

enum class Availability { Available, Denied, UnsupportedPlatform };
const char* to_string(Availability a);

struct CapabilityReport {
    Availability deadline = Availability::UnsupportedPlatform;
    Availability fifo_rt = Availability::UnsupportedPlatform;
    Availability fair = Availability::UnsupportedPlatform;
    Availability affinity = Availability::UnsupportedPlatform;
    int core_count = 0;
    bool fallback_forced = false;

    Availability for_policy(SchedPolicy p) const;
    std::string to_json() const;
};

/// Side-effect free: attempts run on a scratch thread and are reverted.
CapabilityReport probe_capabilities();

/// Cores usable by this process (affinity mask size); cheap, no thread spawn.
int probe_core_count();

enum class EnforceKind { Applied, Fallback, Mismatch };
const char* to_string(EnforceKind k);

/// Read-back of the calling thread's OS scheduling state.
struct ThreadSchedState {
    std::string policy;  // "deadline", "fifo", "other", ...
    int priority = 0;
    int nice = 0;
    uint64_t runtime_ns = 0, deadline_ns = 0, period_ns = 0;
    std::set<int> affinity;
};

struct EnforceOutcome {
    EnforceKind kind = EnforceKind::Fallback;
    SchedAttr intended;
    ThreadSchedState actual;
    bool affinity_applied = false;
    std::string detail;

    bool applied() const { return kind == EnforceKind::Applied; }
};

/// Applies `attr` to the calling thread and verifies by reading the state
/// back. Denial degrades to Fair{nice 0} and is reported, never hidden;
/// a read-back that disagrees with the request is reported as Mismatch.
/// Throws std::invalid_argument when validate_sched_attr rejects the attr
/// (programming error, the caller was required to validate).
EnforceOutcome apply_to_current_thread(const SchedAttr& attr);

/// Current thread's OS view (policy, params, affinity).
ThreadSchedState read_current_thread_state();

/// CPU the calling thread is running on right now, -1 if unknown.
int current_cpu();

}  // namespace rtexec::schedctl
