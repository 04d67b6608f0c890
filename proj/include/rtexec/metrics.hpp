#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtexec::metrics {

// --------------------------------------------------------------------------
// Instrumented counters
// --------------------------------------------------------------------------

/// Process-wide monotone counters of framework-issued kernel interactions.
/// One increment per blocking/IO interaction: a transport write() call, a
/// read() call, a timed wait on a timer deadline that actually blocked, a
/// wait for a message/work that actually blocked, and a wait-set lock
/// acquisition that had to block. Uncontended lock fast paths and vDSO clock
/// reads do not cross into the kernel and are not counted.
struct Counters {
    std::atomic<uint64_t> transport_writes{0};
    std::atomic<uint64_t> transport_reads{0};
    std::atomic<uint64_t> timer_parks{0};
    std::atomic<uint64_t> thread_parks{0};
    std::atomic<uint64_t> waitset_lock_acquisitions{0};  // all, incl. uncontended
    std::atomic<uint64_t> waitset_lock_contended{0};     // blocked acquisitions

    uint64_t kernel_crossings() const {
        return transport_writes.load(std::memory_order_relaxed) +
               transport_reads.load(std::memory_order_relaxed) +
               timer_parks.load(std::memory_order_relaxed) +
               thread_parks.load(std::memory_order_relaxed) +
               waitset_lock_contended.load(std::memory_order_relaxed);
    }

    /// Crossings caused by message delivery alone (socket IO).
    uint64_t delivery_crossings() const {
        return transport_writes.load(std::memory_order_relaxed) +
               transport_reads.load(std::memory_order_relaxed);
    }

    /// Voluntary context-switch proxy: every counted park descheduled the
    /// thread. Blocking reads park between frames; writes normally do not.
    uint64_t voluntary_parks() const {
        return timer_parks.load(std::memory_order_relaxed) +
               thread_parks.load(std::memory_order_relaxed) +
               waitset_lock_contended.load(std::memory_order_relaxed) +
               transport_reads.load(std::memory_order_relaxed);
    }
};

Counters& counters();  // process singleton

// --------------------------------------------------------------------------
// Sampling
// --------------------------------------------------------------------------

struct MetricsSample {
    int64_t t_ns = 0;  // monotonic
    uint64_t voluntary_cs = 0;
    uint64_t involuntary_cs = 0;
    bool os_cs_available = false;
    uint64_t kernel_crossings = 0;
    uint64_t rss_bytes = 0;
};

enum class CsSource { Os, Instrumented };
const char* to_string(CsSource s);

/// Whether the platform exposes per-thread context-switch accounting
/// (probed once; /proc task status fields, getrusage as fallback).
bool os_cs_accounting_available();

/// Consistent snapshot. OS context switches are summed over all process
/// threads; when the platform exposes no accounting the voluntary field
/// carries the instrumented park proxy and os_cs_available is false.
MetricsSample sample_process();

/// One row per sample, header `t_ns,voluntary_cs,involuntary_cs,kernel_crossings,rss_bytes`.
void write_samples_csv(std::ostream& os, std::span<const MetricsSample> samples);

// --------------------------------------------------------------------------
// Rate aggregation
// --------------------------------------------------------------------------

class WindowTooShort : public std::runtime_error {
public:
    explicit WindowTooShort(const std::string& what) : std::runtime_error(what) {}
};

struct RateReport {
    double window_s = 0;
    double user_kernel_switches_per_s = 0;
    double context_switches_per_s = 0;
    uint64_t rss_peak_bytes = 0;
    uint64_t fallback_count = 0;
    CsSource cs_source = CsSource::Os;

    std::string to_json() const;
};

/// First/last-delta rates per process, summed across processes. Every
/// process needs >= 2 samples spanning >= 1 s.
RateReport aggregate(std::span<const std::vector<MetricsSample>> processes,
                     uint64_t fallback_count = 0);

}  // namespace rtexec::metrics
