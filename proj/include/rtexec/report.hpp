#pragma once

#include <string>
#include <vector>

#include "rtexec/bench.hpp"

namespace rtexec::report {

/// One rendered figure: switch or memory metric vs N, one polyline per
/// executor x mode series. Self-contained SVG, no external tooling.
struct PlotFile {
    std::string filename;
    std::string svg;
};

/// The three overhead figures from a sweep table: user-kernel switches/s,
/// context switches/s and peak RSS, each against N.
std::vector<PlotFile> render_plots(const std::vector<bench::SweepRow>& rows);

/// Ratio lines plus the flatness statistic; `baseline-only` when the table
/// holds nothing to ratio against the single-threaded executor.
std::string render_summary(const std::vector<bench::SweepRow>& rows);

}  // namespace rtexec::report
