#include "rtexec/metrics.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#ifdef __linux__
#include <dirent.h>
#include <sys/resource.h>
#include <unistd.h>
#endif

#include <json.hpp>

namespace rtexec::metrics {

Counters& counters() {
    static Counters c;
    return c;
}

const char* to_string(CsSource s) { return s == CsSource::Os ? "os" : "instrumented"; }

namespace {

int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

#ifdef __linux__

// Parses "key:\tvalue" lines out of a /proc status file.
bool parse_status_field(const std::string& path, const char* key, uint64_t& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    const size_t keylen = std::strlen(key);
    while (std::getline(in, line)) {
        if (line.compare(0, keylen, key) == 0) {
            out = std::strtoull(line.c_str() + keylen, nullptr, 10);
            return true;
        }
    }
    return false;
}

bool read_task_cs(uint64_t& voluntary, uint64_t& involuntary) {
    DIR* dir = opendir("/proc/self/task");
    if (!dir) return false;
    voluntary = 0;
    involuntary = 0;
    bool any = false;
    while (dirent* ent = readdir(dir)) {
        if (ent->d_name[0] == '.') continue;
        std::string path = std::string("/proc/self/task/") + ent->d_name + "/status";
        uint64_t v = 0, iv = 0;
        if (parse_status_field(path, "voluntary_ctxt_switches:", v) &&
            parse_status_field(path, "nonvoluntary_ctxt_switches:", iv)) {
            voluntary += v;
            involuntary += iv;
            any = true;
        }
    }
    closedir(dir);
    return any;
}

uint64_t read_rss_bytes() {
    uint64_t kb = 0;
    if (parse_status_field("/proc/self/status", "VmRSS:", kb)) return kb * 1024;
    struct rusage ru{};
    if (getrusage(RUSAGE_SELF, &ru) == 0) return static_cast<uint64_t>(ru.ru_maxrss) * 1024;
    return 0;
}

bool probe_os_cs_accounting() {
    uint64_t v = 0, iv = 0;
    if (read_task_cs(v, iv)) return true;
    // Some sandboxes expose getrusage but keep the counters frozen at zero;
    // force a voluntary switch and see whether anything moves.
    struct rusage before{}, after{};
    getrusage(RUSAGE_SELF, &before);
    for (int i = 0; i < 20; ++i) usleep(500);
    getrusage(RUSAGE_SELF, &after);
    return after.ru_nvcsw > before.ru_nvcsw;
}

#else

bool read_task_cs(uint64_t&, uint64_t&) { return false; }
uint64_t read_rss_bytes() { return 0; }
bool probe_os_cs_accounting() { return false; }

#endif

}  // namespace

bool os_cs_accounting_available() {
    static const bool available = probe_os_cs_accounting();
    return available;
}

MetricsSample sample_process() {
    MetricsSample s;
    s.t_ns = now_ns();
    s.kernel_crossings = counters().kernel_crossings();
    s.rss_bytes = read_rss_bytes();
    if (os_cs_accounting_available()) {
        uint64_t v = 0, iv = 0;
        if (read_task_cs(v, iv)) {
            s.voluntary_cs = v;
            s.involuntary_cs = iv;
            s.os_cs_available = true;
            return s;
        }
#ifdef __linux__
        struct rusage ru{};
        if (getrusage(RUSAGE_SELF, &ru) == 0) {
            s.voluntary_cs = static_cast<uint64_t>(ru.ru_nvcsw);
            s.involuntary_cs = static_cast<uint64_t>(ru.ru_nivcsw);
            s.os_cs_available = true;
            return s;
        }
#endif
    }
    s.voluntary_cs = counters().voluntary_parks();
    s.involuntary_cs = 0;
    s.os_cs_available = false;
    return s;
}

void write_samples_csv(std::ostream& os, std::span<const MetricsSample> samples) {
    os << "t_ns,voluntary_cs,involuntary_cs,kernel_crossings,rss_bytes\n";
    for (const auto& s : samples)
        os << s.t_ns << ',' << s.voluntary_cs << ',' << s.involuntary_cs << ','
           << s.kernel_crossings << ',' << s.rss_bytes << '\n';
}

std::string RateReport::to_json() const {
    nlohmann::json j;
    j["window_s"] = window_s;
    j["user_kernel_switches_per_s"] = user_kernel_switches_per_s;
    j["context_switches_per_s"] = context_switches_per_s;
    j["rss_peak_bytes"] = rss_peak_bytes;
    j["fallback_count"] = fallback_count;
    j["cs_source"] = to_string(cs_source);
    return j.dump();
}

RateReport aggregate(std::span<const std::vector<MetricsSample>> processes,
                     uint64_t fallback_count) {
    if (processes.empty()) throw WindowTooShort("no processes");
    RateReport r;
    r.fallback_count = fallback_count;
    for (const auto& samples : processes) {
        if (samples.size() < 2) throw WindowTooShort("need >= 2 samples per process");
        const auto& first = samples.front();
        const auto& last = samples.back();
        const double window = static_cast<double>(last.t_ns - first.t_ns) / 1e9;
        if (window < 1.0)
            throw WindowTooShort("window " + std::to_string(window) + " s < 1 s");
        r.window_s = std::max(r.window_s, window);
        r.user_kernel_switches_per_s +=
            static_cast<double>(last.kernel_crossings - first.kernel_crossings) / window;
        const uint64_t cs_first = first.voluntary_cs + first.involuntary_cs;
        const uint64_t cs_last = last.voluntary_cs + last.involuntary_cs;
        r.context_switches_per_s += static_cast<double>(cs_last - cs_first) / window;
        if (!last.os_cs_available) r.cs_source = CsSource::Instrumented;
        uint64_t peak = 0;
        for (const auto& s : samples) peak = std::max(peak, s.rss_bytes);
        r.rss_peak_bytes += peak;
    }
    return r;
}

}  // namespace rtexec::metrics
