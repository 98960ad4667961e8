#include "uasrl/harness/run.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "uasrl/algos/umappo.hpp"
#include "uasrl/algos/uqmix.hpp"

namespace uasrl::harness {

namespace fs = std::filesystem;

nlohmann::json RunRecord::to_json() const {
    nlohmann::json j;
    j["algorithm"] = algorithm;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["metrics_path"] = metrics_path;
    j["checkpoint_paths"] = checkpoint_paths;
    j["wall_clock_sec"] = wall_clock_sec;
    j["status"] = status;
    j["error"] = error;
    j["final_eval_return"] = std::isnan(final_eval_return) ? nlohmann::json()
                                                           : nlohmann::json(final_eval_return);
    j["final_eval_wr"] =
        std::isnan(final_eval_wr) ? nlohmann::json() : nlohmann::json(final_eval_wr);
    return j;
}

namespace {

nlohmann::json num_or_null(double v) {
    return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
}

} // namespace

std::string metrics_to_jsonl(const algos::MetricsRecord& rec, AlgoFamily family) {
    nlohmann::json j;
    j["step"] = rec.step;
    j["episode"] = rec.episode;
    j["loss_total"] = num_or_null(rec.loss_total);
    if (family == AlgoFamily::Mappo) {
        j["loss_actor"] = num_or_null(rec.loss_actor);
        j["loss_value"] = num_or_null(rec.loss_value);
        j["entropy"] = num_or_null(rec.entropy);
    } else {
        j["loss_td"] = num_or_null(rec.loss_td);
        j["epsilon"] = num_or_null(rec.epsilon);
    }
    j["loss_cgi"] = num_or_null(rec.loss_cgi);
    j["eval_wr"] = rec.has_eval ? num_or_null(rec.eval_wr) : nlohmann::json();
    j["eval_return"] = rec.has_eval ? num_or_null(rec.eval_return) : nlohmann::json();
    j["seed"] = rec.seed;
    return j.dump();
}

namespace {

struct WorkItem {
    AlgoVariant variant;
    std::uint64_t seed;
};

RunRecord execute_run(const ExperimentConfig& config, const AlgoVariant& variant,
                      std::uint64_t seed) {
    RunRecord record;
    record.algorithm = variant.name;
    record.seed = seed;
    record.config_hash = config.hash();

    const fs::path run_dir =
        fs::path(config.out_dir) / variant.name / ("seed_" + std::to_string(seed));
    fs::create_directories(run_dir);
    const fs::path metrics_path = run_dir / "metrics.jsonl";
    record.metrics_path = metrics_path.string();

    const auto t0 = std::chrono::steady_clock::now();
    try {
        std::ofstream metrics(metrics_path, std::ios::trunc | std::ios::binary);
        if (!metrics) throw ConfigError("cannot open metrics file " + metrics_path.string());

        double last_eval_return = NAN, last_eval_wr = NAN;
        std::uint64_t next_checkpoint = config.checkpoint_interval;
        auto factory = config.env_factory(variant.flags);

        auto save = [&](const grad::ParameterSet& params, const nlohmann::json& arch,
                        const std::string& tag) {
            const fs::path p = run_dir / ("checkpoint_" + tag + ".ckpt");
            grad::save_checkpoint(p.string(), params, arch);
            record.checkpoint_paths.push_back(p.string());
        };

        if (variant.family == AlgoFamily::Mappo) {
            algos::UMappoSettings settings;
            settings.hyper = config.umappo;
            settings.flags = variant.flags;
            settings.seed = seed;
            settings.eval_interval = config.eval_interval;
            settings.eval_episodes = config.eval_episodes;
            algos::UMappoTrainer trainer(factory, settings);
            trainer.run([&](const algos::MetricsRecord& rec) {
                metrics << metrics_to_jsonl(rec, variant.family) << "\n";
                if (rec.has_eval) {
                    last_eval_return = rec.eval_return;
                    last_eval_wr = rec.eval_wr;
                }
                if (config.checkpoint_interval > 0 && rec.step >= next_checkpoint) {
                    save(trainer.parameters(), trainer.architecture(),
                         "step" + std::to_string(rec.step));
                    while (next_checkpoint <= rec.step) next_checkpoint += config.checkpoint_interval;
                }
            });
            save(trainer.parameters(), trainer.architecture(), "final");
            if (config.export_replays) {
                trainer.last_episode().export_jsonl((run_dir / "last_episode.jsonl").string());
            }
        } else {
            algos::UQmixSettings settings;
            settings.hyper = config.uqmix;
            settings.flags = variant.flags;
            settings.seed = seed;
            settings.eval_interval = config.eval_interval;
            settings.eval_episodes = config.eval_episodes;
            algos::UQmixTrainer trainer(factory, settings);
            trainer.run([&](const algos::MetricsRecord& rec) {
                metrics << metrics_to_jsonl(rec, variant.family) << "\n";
                if (rec.has_eval) {
                    last_eval_return = rec.eval_return;
                    last_eval_wr = rec.eval_wr;
                }
                if (config.checkpoint_interval > 0 && rec.step >= next_checkpoint) {
                    save(trainer.parameters(), trainer.architecture(),
                         "step" + std::to_string(rec.step));
                    while (next_checkpoint <= rec.step) next_checkpoint += config.checkpoint_interval;
                }
            });
            save(trainer.parameters(), trainer.architecture(), "final");
            if (config.export_replays) {
                trainer.last_episode().export_jsonl((run_dir / "last_episode.jsonl").string());
            }
        }
        record.final_eval_return = last_eval_return;
        record.final_eval_wr = last_eval_wr;
        record.status = "ok";
    } catch (const std::exception& e) {
        record.status = "failed";
        record.error = e.what();
    }
    record.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream rr(run_dir / "run_record.json", std::ios::trunc);
    rr << record.to_json().dump(2) << "\n";
    return record;
}

void write_summaries(const ExperimentConfig& config, const std::vector<RunRecord>& records) {
    for (const auto& algo : config.algorithms) {
        std::vector<double> returns, wrs;
        nlohmann::json per_seed = nlohmann::json::array();
        for (const auto& r : records) {
            if (r.algorithm != algo) continue;
            per_seed.push_back(r.to_json());
            if (r.status == "ok" && !std::isnan(r.final_eval_return)) {
                returns.push_back(r.final_eval_return);
                wrs.push_back(r.final_eval_wr);
            }
        }
        auto mean_std = [](const std::vector<double>& v) {
            nlohmann::json j;
            if (v.empty()) return nlohmann::json{{"mean", nullptr}, {"std", nullptr}};
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            j["mean"] = mean;
            j["std"] = std::sqrt(var);
            return j;
        };
        nlohmann::json summary;
        summary["algorithm"] = algo;
        summary["config_hash"] = config.hash();
        summary["seeds"] = config.seeds;
        summary["final_eval_return"] = mean_std(returns);
        summary["final_eval_wr"] = mean_std(wrs);
        summary["runs"] = std::move(per_seed);
        const fs::path p = fs::path(config.out_dir) / algo / "summary.json";
        fs::create_directories(p.parent_path());
        std::ofstream os(p, std::ios::trunc);
        os << summary.dump(2) << "\n";
    }
}

} // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, std::size_t jobs) {
    config.validate();
    fs::create_directories(config.out_dir);
    {
        std::ofstream os(fs::path(config.out_dir) / "config_resolved.json", std::ios::trunc);
        nlohmann::json j = config.canonical();
        j["hash"] = config.hash();
        os << j.dump(2) << "\n";
    }

    std::vector<WorkItem> work;
    for (const auto& name : config.algorithms) {
        const AlgoVariant variant = parse_algorithm(name);
        for (std::uint64_t seed : config.seeds) work.push_back({variant, seed});
    }
    std::vector<RunRecord> records(work.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < work.size(); ++i) {
            records[i] = execute_run(config, work[i].variant, work[i].seed);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= work.size()) break;
                records[i] = execute_run(config, work[i].variant, work[i].seed);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::min(jobs, work.size()); ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    write_summaries(config, records);
    return records;
}

EvalReport evaluate_checkpoint(const std::string& checkpoint_path, const ExperimentConfig& config,
                               std::size_t episodes, std::uint64_t seed) {
    auto ckpt = grad::load_checkpoint(checkpoint_path);
    const auto& meta = ckpt.metadata;
    if (!meta.contains("uas_dim") || !meta.contains("obs_dim") || !meta.contains("hidden")) {
        throw ConfigError("checkpoint lacks an architecture header");
    }
    algos::AblationFlags flags{.use_uas = meta.value("use_uas", true),
                               .use_cgi = meta.value("use_cgi", true)};
    auto env = config.env_factory(flags)();
    const auto& info = env->info();
    if (meta["uas_dim"].get<std::size_t>() != info.uas.size ||
        meta["obs_dim"].get<std::size_t>() != info.obs_dim ||
        meta.value("n_agents", info.n_agents) != info.n_agents) {
        throw ConfigError("checkpoint architecture does not match the environment config");
    }
    nets::TrunkConfig tcfg{.obs_dim = info.obs_dim, .uas_dim = info.uas.size,
                           .hidden = meta["hidden"].get<std::size_t>()};
    auto ev = algos::evaluate_policy(*env, ckpt.params, tcfg, seed, episodes,
                                     algos::PolicyMode::Greedy);
    return {ev.wr, ev.mean_return, ev.mean_length, ev.episodes};
}

} // namespace uasrl::harness
