#pragma once

#include <string>
#include <vector>

#include "uasrl/grad/checkpoint.hpp"
#include "uasrl/harness/config.hpp"

namespace uasrl::harness {

struct RunRecord {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string metrics_path;
    std::vector<std::string> checkpoint_paths;
    double wall_clock_sec = 0.0;
    std::string status = "ok"; // ok | failed
    std::string error;
    double final_eval_return = NAN;
    double final_eval_wr = NAN;

    nlohmann::json to_json() const;
};

/// Executes every (algorithm, seed) pair of the config. Metrics stream to
/// <out>/<algo>/seed_<seed>/metrics.jsonl; the stream is a pure function of
/// (config, seed) — wall clock and paths live in run_record.json only.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

/// JSON line for one metrics record; field set is fixed per algo family.
std::string metrics_to_jsonl(const algos::MetricsRecord& rec, AlgoFamily family);

struct EvalReport {
    double wr = 0.0;
    double mean_return = 0.0;
    double mean_length = 0.0;
    std::size_t episodes = 0;
};

/// Greedy evaluation of a stored checkpoint against an environment config.
/// The checkpoint's architecture header must match the environment.
EvalReport evaluate_checkpoint(const std::string& checkpoint_path, const ExperimentConfig& config,
                               std::size_t episodes, std::uint64_t seed = 9000);

} // namespace uasrl::harness
