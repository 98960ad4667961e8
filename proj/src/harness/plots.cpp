#include "uasrl/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "uasrl/errors.hpp"

namespace uasrl::harness {

namespace fs = std::filesystem;

double t_critical_95(std::size_t df) {
    // two-sided 95% quantiles of Student's t
    static const double table[] = {
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    };
    if (df == 0) throw ContractError("t_critical_95: df must be >= 1");
    if (df <= 30) return table[df - 1];
    return 1.960;
}

namespace {

double interpolate(const std::vector<std::pair<double, double>>& curve, double step) {
    if (curve.empty()) throw ContractError("aggregate_curves: empty seed curve");
    if (step <= curve.front().first) return curve.front().second;
    if (step >= curve.back().first) return curve.back().second;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].first >= step) {
            const auto& [x0, y0] = curve[i - 1];
            const auto& [x1, y1] = curve[i];
            if (x1 == x0) return y1;
            const double w = (step - x0) / (x1 - x0);
            return y0 + w * (y1 - y0);
        }
    }
    return curve.back().second;
}

} // namespace

std::vector<CurvePoint> aggregate_curves(
    const std::vector<std::vector<std::pair<double, double>>>& seed_curves, bool* resampled) {
    if (seed_curves.empty()) throw ContractError("aggregate_curves: no seed curves");
    if (resampled) *resampled = false;

    std::set<double> grid(seed_curves[0].size() ? std::set<double>() : std::set<double>());
    bool same_grid = true;
    for (const auto& c : seed_curves) {
        for (const auto& [s, v] : c) grid.insert(s);
    }
    for (const auto& c : seed_curves) {
        if (c.size() != grid.size()) same_grid = false;
    }
    if (!same_grid && resampled) *resampled = true;

    const std::size_t k = seed_curves.size();
    std::vector<CurvePoint> out;
    out.reserve(grid.size());
    for (double step : grid) {
        std::vector<double> vals(k);
        for (std::size_t i = 0; i < k; ++i) vals[i] = interpolate(seed_curves[i], step);
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(k);
        CurvePoint p;
        p.step = step;
        p.mean = mean;
        if (k == 1) {
            p.ci_low = p.ci_high = mean;
        } else {
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(k - 1); // sample variance
            const double half = t_critical_95(k - 1) * std::sqrt(var / static_cast<double>(k));
            p.ci_low = mean - half;
            p.ci_high = mean + half;
        }
        out.push_back(p);
    }
    return out;
}

std::vector<std::string> export_plots(const std::vector<std::string>& run_dirs,
                                      const std::string& out_dir) {
    if (run_dirs.empty()) throw ConfigError("export_plots: at least one run directory required");
    // (algorithm, metric) -> per-seed curves
    std::map<std::pair<std::string, std::string>,
             std::vector<std::vector<std::pair<double, double>>>>
        curves;
    const std::vector<std::string> metrics = {"eval_return", "eval_wr"};

    for (const auto& dir : run_dirs) {
        if (!fs::exists(dir)) throw ConfigError("export_plots: no such run directory " + dir);
        for (const auto& algo_entry : fs::directory_iterator(dir)) {
            if (!algo_entry.is_directory()) continue;
            const std::string algo = algo_entry.path().filename().string();
            std::vector<fs::path> seed_dirs;
            for (const auto& seed_entry : fs::directory_iterator(algo_entry.path())) {
                if (seed_entry.is_directory() &&
                    seed_entry.path().filename().string().rfind("seed_", 0) == 0) {
                    seed_dirs.push_back(seed_entry.path());
                }
            }
            std::sort(seed_dirs.begin(), seed_dirs.end());
            for (const auto& sd : seed_dirs) {
                const fs::path mpath = sd / "metrics.jsonl";
                if (!fs::exists(mpath)) continue;
                std::map<std::string, std::vector<std::pair<double, double>>> per_metric;
                std::ifstream is(mpath);
                std::string line;
                while (std::getline(is, line)) {
                    if (line.empty()) continue;
                    auto j = nlohmann::json::parse(line);
                    for (const auto& m : metrics) {
                        if (j.contains(m) && !j[m].is_null()) {
                            per_metric[m].emplace_back(j["step"].get<double>(),
                                                       j[m].get<double>());
                        }
                    }
                }
                for (const auto& m : metrics) {
                    if (!per_metric[m].empty()) {
                        curves[{algo, m}].push_back(std::move(per_metric[m]));
                    }
                }
            }
        }
    }
    if (curves.empty()) throw ConfigError("export_plots: no metrics found under the run dirs");

    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (auto& [key, seed_curves] : curves) {
        bool resampled = false;
        auto agg = aggregate_curves(seed_curves, &resampled);
        if (resampled) {
            std::cerr << "[plot] warning: " << key.first << "/" << key.second
                      << ": seed step grids differ; resampled onto the union grid\n";
        }
        const fs::path path = fs::path(out_dir) / (key.first + "_" + key.second + ".csv");
        std::ofstream os(path, std::ios::trunc);
        os << "step,mean,ci_low,ci_high\n";
        os.precision(17);
        for (const auto& p : agg) {
            os << p.step << "," << p.mean << "," << p.ci_low << "," << p.ci_high << "\n";
        }
        written.push_back(path.string());
    }
    return written;
}

} // namespace uasrl::harness
