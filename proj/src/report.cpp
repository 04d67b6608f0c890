#include "rtexec/report.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace rtexec::report {

namespace {

using bench::ProcessMode;
using bench::SweepRow;

struct SeriesKey {
    ExecutorKind executor;
    ProcessMode mode;
    auto operator<=>(const SeriesKey&) const = default;
};

std::string series_label(const SeriesKey& k) {
    return std::string(to_string(k.executor)) + " " + to_string(k.mode);
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt_tick(double v) {
    std::ostringstream os;
    if (v >= 1e9)
        os << std::setprecision(3) << v / 1e9 << "G";
    else if (v >= 1e6)
        os << std::setprecision(3) << v / 1e6 << "M";
    else if (v >= 1e3)
        os << std::setprecision(3) << v / 1e3 << "k";
    else
        os << std::setprecision(3) << v;
    return os.str();
}

std::string render_one(const std::vector<SweepRow>& rows, const std::string& title,
                       const std::string& y_label, double (*value)(const SweepRow&)) {
    constexpr double W = 640, H = 420;
    constexpr double ml = 70, mr = 170, mt = 40, mb = 50;
    const double pw = W - ml - mr, ph = H - mt - mb;

    std::map<SeriesKey, std::vector<std::pair<int, double>>> series;
    int n_min = INT_MAX, n_max = 0;
    double v_max = 0;
    for (const auto& row : rows) {
        if (!row.valid) continue;
        series[{row.cell.executor, row.cell.mode}].emplace_back(row.cell.n, value(row));
        n_min = std::min(n_min, row.cell.n);
        n_max = std::max(n_max, row.cell.n);
        v_max = std::max(v_max, value(row));
    }
    for (auto& [k, pts] : series) std::sort(pts.begin(), pts.end());
    if (series.empty() || n_max == 0) {
        n_min = 0;
        n_max = 1;
    }
    if (v_max <= 0) v_max = 1;
    v_max *= 1.05;
    if (n_min == n_max) n_max = n_min + 1;

    auto x_of = [&](double n) { return ml + (n - n_min) / double(n_max - n_min) * pw; };
    auto y_of = [&](double v) { return mt + ph - v / v_max * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
       << title << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"black\"/>\n";

    // y ticks
    for (int i = 0; i <= 4; ++i) {
        const double v = v_max * i / 4;
        const double y = y_of(v);
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt_tick(v)
           << "</text>\n";
    }
    // x ticks at observed N values
    std::vector<int> ns;
    for (const auto& [k, pts] : series)
        for (auto [n, v] : pts) ns.push_back(n);
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    for (int n : ns) {
        const double x = x_of(n);
        os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\""
           << mt + ph + 4 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << n
           << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">N callbacks per node"
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << mt + ph / 2
       << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
       << mt + ph / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";

    // series
    int color = 0;
    double legend_y = mt + 10;
    for (const auto& [key, pts] : series) {
        const char* c = kPalette[color++ % 8];
        std::ostringstream path;
        for (size_t i = 0; i < pts.size(); ++i)
            path << (i ? " " : "") << x_of(pts[i].first) << ',' << y_of(pts[i].second);
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\""
           << path.str() << "\"/>\n";
        for (auto [n, v] : pts)
            os << "<circle cx=\"" << x_of(n) << "\" cy=\"" << y_of(v) << "\" r=\"3\" fill=\"" << c
               << "\"/>\n";
        os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << legend_y << "\" x2=\""
           << ml + pw + 34 << "\" y2=\"" << legend_y << "\" stroke=\"" << c
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << legend_y + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << series_label(key)
           << "</text>\n";
        legend_y += 18;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace

std::vector<PlotFile> render_plots(const std::vector<SweepRow>& rows) {
    std::vector<PlotFile> files;
    files.push_back({"uks_per_s_vs_n.svg",
                     render_one(rows, "User-kernel switches per second vs N",
                                "user-kernel switches / s",
                                [](const SweepRow& r) { return r.uks_per_s; })});
    files.push_back({"cs_per_s_vs_n.svg",
                     render_one(rows, "Context switches per second vs N", "context switches / s",
                                [](const SweepRow& r) { return r.cs_per_s; })});
    files.push_back({"rss_peak_vs_n.svg",
                     render_one(rows, "Memory consumption vs N", "peak RSS (bytes)",
                                [](const SweepRow& r) { return double(r.rss_peak); })});
    return files;
}

std::string render_summary(const std::vector<bench::SweepRow>& rows) {
    std::ostringstream os;
    size_t valid = 0;
    for (const auto& r : rows) valid += r.valid ? 1 : 0;
    os << "cells: " << rows.size() << " (" << valid << " valid)\n";
    try {
        os << bench::ratio_report(rows).to_text();
    } catch (const bench::MissingBaseline& e) {
        os << "ratios unavailable: " << e.what() << '\n';
    }
    return os.str();
}

}  // namespace rtexec::report
