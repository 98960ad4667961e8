#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "uasrl/harness/plots.hpp"
#include "uasrl/harness/run.hpp"
#include "uasrl/harness/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

std::string apply_out_root(const std::string& out_dir) {
    if (out_dir.empty() || std::filesystem::path(out_dir).is_absolute()) return out_dir;
    const char* root = std::getenv("UASRL_OUT_ROOT");
    if (!root || !*root) return out_dir;
    return (std::filesystem::path(root) / out_dir).string();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unified-action-space multi-agent RL toolkit"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, out_dir = "plots";
    std::size_t jobs = 1, episodes = 32;
    std::uint64_t eval_seed = 9000;
    std::vector<std::string> run_dirs;
    std::string suite;
    std::size_t bf_n = 2, bf_a0 = 4, bf_a1 = 6, bf_resolution = 40;

    auto* train = app.add_subcommand("train", "run training for every algorithm/seed in a config");
    train->add_option("config", config_path, "experiment config file")->required();
    train->add_option("--jobs", jobs, "parallel seed workers");

    auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("config", config_path, "experiment config file")->required();
    eval->add_option("--episodes", episodes, "evaluation episodes");
    eval->add_option("--seed", eval_seed, "evaluation seed base");

    auto* verify = app.add_subcommand("verify", "run an oracle suite");
    verify->add_option("suite", suite, "gradcheck|proposition|igm|masks")->required();

    auto* plot = app.add_subcommand("plot", "export learning-curve CSVs from run directories");
    plot->add_option("run_dirs", run_dirs, "one or more training output directories")->required();
    plot->add_option("--out", out_dir, "output directory for CSV files");

    auto* bruteforce = app.add_subcommand("bruteforce",
                                          "simplex-grid search of the shared-policy optimum");
    bruteforce->add_option("--n", bf_n, "agents per group");
    bruteforce->add_option("--a0", bf_a0, "group-0 action count");
    bruteforce->add_option("--a1", bf_a1, "group-1 action count");
    bruteforce->add_option("--resolution", bf_resolution, "simplex grid resolution");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            uasrl::harness::ExperimentConfig cfg;
            try {
                cfg = uasrl::harness::ExperimentConfig::from_file(config_path);
                cfg.out_dir = apply_out_root(cfg.out_dir);
                cfg.validate();
            } catch (const uasrl::ConfigError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitValidation;
            }
            auto records = uasrl::harness::run_experiment(cfg, jobs);
            bool ok = true;
            for (const auto& r : records) {
                std::cout << r.algorithm << " seed=" << r.seed << " status=" << r.status;
                if (r.status == "ok") {
                    std::cout << " final_eval_return=" << r.final_eval_return
                              << " final_eval_wr=" << r.final_eval_wr;
                } else {
                    std::cout << " error=" << r.error;
                    ok = false;
                }
                std::cout << "\n";
            }
            return ok ? kExitOk : kExitRuntime;
        }
        if (*eval) {
            uasrl::harness::ExperimentConfig cfg;
            try {
                cfg = uasrl::harness::ExperimentConfig::from_file(config_path);
                cfg.validate();
            } catch (const uasrl::ConfigError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitValidation;
            }
            auto report = uasrl::harness::evaluate_checkpoint(checkpoint_path, cfg, episodes,
                                                              eval_seed);
            std::cout << "episodes=" << report.episodes << " wr=" << report.wr
                      << " mean_return=" << report.mean_return
                      << " mean_length=" << report.mean_length << "\n";
            return kExitOk;
        }
        if (*verify) {
            uasrl::harness::VerifyReport report;
            try {
                report = uasrl::harness::verify_suite(suite);
            } catch (const uasrl::ConfigError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitValidation;
            }
            std::cout << report.to_json().dump(2) << "\n";
            return report.passed ? kExitOk : kExitVerification;
        }
        if (*plot) {
            auto written = uasrl::harness::export_plots(run_dirs, apply_out_root(out_dir));
            for (const auto& p : written) std::cout << p << "\n";
            return kExitOk;
        }
        if (*bruteforce) {
            auto result = uasrl::envs::brute_force_shared_optimum(bf_n, bf_a0, bf_a1,
                                                                  bf_resolution);
            nlohmann::json j;
            j["max_reward"] = result.max_reward;
            j["analytic"] = result.analytic;
            j["gap"] = result.gap;
            j["argmax"] = result.argmax;
            j["grid_points"] = result.evaluated;
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const uasrl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
