#pragma once

#include <string>
#include <vector>

namespace uasrl::harness {

struct CurvePoint {
    double step = 0.0;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Two-sided 95% Student-t critical value for df degrees of freedom.
double t_critical_95(std::size_t df);

/// Aggregates per-seed (step, value) curves into mean plus a 95% t-interval
/// band. Mismatched step grids are resampled onto the union grid by linear
/// interpolation; `resampled` reports whether that happened.
std::vector<CurvePoint> aggregate_curves(
    const std::vector<std::vector<std::pair<double, double>>>& seed_curves, bool* resampled);

/// Reads every <run_dir>/<algo>/seed_*/metrics.jsonl and writes one CSV per
/// (algorithm, metric) pair with columns step,mean,ci_low,ci_high.
/// Returns the paths written.
std::vector<std::string> export_plots(const std::vector<std::string>& run_dirs,
                                      const std::string& out_dir);

} // namespace uasrl::harness
