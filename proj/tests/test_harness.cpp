#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "testutil.hpp"
#include "uasrl/algos/umappo.hpp"
#include "uasrl/harness/plots.hpp"
#include "uasrl/harness/run.hpp"
#include "uasrl/harness/verify.hpp"

using namespace uasrl;
using namespace uasrl::harness;

namespace fs = std::filesystem;

namespace {

std::string tiny_config(const std::string& out_dir, const std::string& algo = "u-qmix") {
    return R"([env]
name = "proposition"
n = 2
a0 = 2
a1 = 2
obs_mode = "id"

[algo]
name = ")" + algo + R"("
buffer_size = 64
batch_size = 8

[train]
total_steps = 120
seeds = [1, 2]
eval_interval = 60
eval_episodes = 4
out = ")" + out_dir + R"("
)";
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("algorithm names map onto ablation flags") {
    CHECK(parse_algorithm("mappo").flags.use_uas == false);
    CHECK(parse_algorithm("mappo").flags.use_cgi == false);
    CHECK(parse_algorithm("mappo+uas").flags.use_uas == true);
    CHECK(parse_algorithm("mappo+uas").flags.use_cgi == false);
    CHECK(parse_algorithm("qmix+cgi").flags.use_uas == false);
    CHECK(parse_algorithm("qmix+cgi").flags.use_cgi == true);
    CHECK(parse_algorithm("u-qmix").flags.use_uas == true);
    CHECK(parse_algorithm("u-qmix").flags.use_cgi == true);
    CHECK(parse_algorithm("u-mappo").family == AlgoFamily::Mappo);
    CHECK_THROWS_AS(parse_algorithm("dqn"), ConfigError);
    CHECK_THROWS_AS(parse_algorithm("qmix+foo"), ConfigError);
}

TEST_CASE("config parsing, validation and canonical hashing") {
    auto cfg = ExperimentConfig::from_string(tiny_config("runs/x"));
    cfg.validate();
    CHECK(cfg.env_name == "proposition");
    CHECK(cfg.prop_agents_per_group == 2);
    CHECK(cfg.uqmix.batch_size == 8);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(cfg.total_steps == 120);
    CHECK(cfg.umappo.total_steps == 120);

    // reordering keys/sections leaves the hash unchanged
    auto reordered = ExperimentConfig::from_string(R"(
[train]
seeds = [1, 2]
eval_episodes = 4
eval_interval = 60
total_steps = 120
out = "runs/x"

[algo]
batch_size = 8
buffer_size = 64
name = "u-qmix"

[env]
obs_mode = "id"
a1 = 2
a0 = 2
n = 2
name = "proposition"
)");
    CHECK(cfg.hash() == reordered.hash());

    auto changed = cfg;
    changed.uqmix.lambda_i = 0.5;
    CHECK(cfg.hash() != changed.hash());
    // the output directory is not semantic
    auto moved = cfg;
    moved.out_dir = "elsewhere";
    CHECK(cfg.hash() == moved.hash());
}

TEST_CASE("invalid configs list their violations") {
    auto cfg = ExperimentConfig::from_string(tiny_config("runs/x"));
    cfg.algorithms = {"nonsense"};
    cfg.seeds.clear();
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("nonsense") != std::string::npos);
        CHECK(msg.find("seeds") != std::string::npos);
    }
    CHECK_THROWS_AS(ExperimentConfig::from_string("[env]\nname = \n???"), ConfigError);
}

TEST_CASE("published hyperparameter defaults") {
    ExperimentConfig cfg;
    CHECK(cfg.umappo.lr == 5e-4);
    CHECK(cfg.umappo.eps_p == 0.2);
    CHECK(cfg.umappo.eps_v == 0.2);
    CHECK(cfg.umappo.lambda_e == 0.01);
    CHECK(cfg.umappo.lambda_v == 1.0);
    CHECK(cfg.umappo.lambda_i == 0.8);
    CHECK(cfg.umappo.gamma == 0.99);
    CHECK(cfg.uqmix.lr == 3e-4);
    CHECK(cfg.uqmix.lambda_i == 0.06);
    CHECK(cfg.uqmix.buffer_size == 5000);
    CHECK(cfg.uqmix.batch_size == 32);
    CHECK(cfg.uqmix.eps_start == 1.0);
    CHECK(cfg.uqmix.eps_end == 0.05);
    CHECK(cfg.uqmix.eps_anneal_steps == 50'000);
    CHECK(cfg.uqmix.lr_decay_factor == 0.5);
    CHECK(cfg.uqmix.lr_decay_episodes == 50'000);
    CHECK(cfg.eval_interval == 10'000);
    CHECK(cfg.eval_episodes == 32);
}

TEST_CASE("metrics records serialize family-specific fields with nulls") {
    algos::MetricsRecord rec;
    rec.step = 10;
    rec.episode = 3;
    rec.loss_total = 1.5;
    rec.loss_td = 1.5;
    rec.epsilon = 0.9;
    rec.seed = 7;
    auto line = nlohmann::json::parse(metrics_to_jsonl(rec, AlgoFamily::Qmix));
    CHECK(line["loss_td"] == 1.5);
    CHECK(line["eval_wr"].is_null());
    CHECK(!line.contains("loss_actor"));
    rec.has_eval = true;
    rec.eval_wr = 0.25;
    auto line2 = nlohmann::json::parse(metrics_to_jsonl(rec, AlgoFamily::Qmix));
    CHECK(line2["eval_wr"] == 0.25);
}

TEST_CASE("run_experiment writes metrics, checkpoints and summaries; reruns are byte-identical") {
    const fs::path out = fs::temp_directory_path() / "uasrl_run_test";
    fs::remove_all(out);
    auto cfg = ExperimentConfig::from_string(tiny_config(out.string()));
    cfg.validate();
    auto records = run_experiment(cfg, 2);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        CHECK(r.status == "ok");
        CHECK(fs::exists(r.metrics_path));
        REQUIRE(!r.checkpoint_paths.empty());
        CHECK(fs::exists(r.checkpoint_paths.back()));
        CHECK(r.config_hash == cfg.hash());
    }
    CHECK(fs::exists(out / "u-qmix" / "summary.json"));
    CHECK(fs::exists(out / "config_resolved.json"));

    const std::string first = slurp(records[0].metrics_path);
    CHECK(!first.empty());
    // rerun into a fresh directory: streams must match byte for byte
    const fs::path out2 = fs::temp_directory_path() / "uasrl_run_test2";
    fs::remove_all(out2);
    auto cfg2 = cfg;
    cfg2.out_dir = out2.string();
    auto records2 = run_experiment(cfg2, 1);
    CHECK(slurp(records2[0].metrics_path) == first);
    CHECK(slurp(records2[1].metrics_path) == slurp(records[1].metrics_path));

    // evaluating the final checkpoint against the right config works...
    auto report = evaluate_checkpoint(records[0].checkpoint_paths.back(), cfg, 4);
    CHECK(report.episodes == 4);
    // ...and is rejected against a mismatched environment
    auto bad_cfg = cfg;
    bad_cfg.prop_a1 = 6;
    CHECK_THROWS_AS(evaluate_checkpoint(records[0].checkpoint_paths.back(), bad_cfg, 4),
                    ConfigError);
    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST_CASE("a handcrafted per-id policy evaluates to WR 1.0 on the coordination game") {
    envs::PropositionConfig pc{2, 4, 6, envs::ObsMode::Id, act::Layout::Unified};
    envs::PropositionGame game(pc);
    const auto& info = game.info();
    nets::TrunkConfig tcfg{.obs_dim = info.obs_dim, .uas_dim = info.uas.size, .hidden = 64};
    auto params = testutil::perfect_proposition_trunk(tcfg, 2, info.uas.ally_offset,
                                                      info.uas.enemy_offset);
    auto ev = algos::evaluate_policy(game, params, tcfg, 555, 32, algos::PolicyMode::Greedy);
    CHECK(ev.wr == 1.0);
    CHECK(ev.mean_return == 1.0);
    CHECK(ev.mean_length == 1.0);
}

TEST_CASE("random-weights policies sit on the WR floor of the skirmish map") {
    envs::SkirmishConfig sc;
    sc.layout = act::Layout::Unified;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        grad::Rng rng(seed);
        envs::Skirmish env(sc);
        nets::TrunkConfig tcfg{.obs_dim = env.info().obs_dim, .uas_dim = env.info().uas.size,
                               .hidden = 64};
        auto params = nets::make_trunk(tcfg, rng);
        auto ev = algos::evaluate_policy(env, params, tcfg, seed * 100, 32,
                                         algos::PolicyMode::Greedy);
        CHECK(ev.wr < 0.2);
    }
}

TEST_CASE("evaluation mutates neither parameters nor the training stream") {
    envs::PropositionConfig pc{2, 2, 2, envs::ObsMode::Id, act::Layout::Unified};
    algos::EnvFactory factory = [pc]() { return std::make_unique<envs::PropositionGame>(pc); };
    algos::UMappoSettings settings;
    settings.seed = 5;
    algos::UMappoTrainer a(factory, settings);
    algos::UMappoTrainer b(factory, settings);
    for (int i = 0; i < 5; ++i) {
        a.train_iteration();
        b.train_iteration();
    }
    auto params_before = a.parameters().clone();
    a.evaluate(8); // extra evaluations on one trainer only
    a.evaluate(8);
    CHECK(grad::parameters_equal(params_before, a.parameters()));
    // both trainers continue identically afterward
    for (int i = 0; i < 5; ++i) {
        CHECK(a.train_iteration().loss_total == b.train_iteration().loss_total);
    }
}

TEST_CASE("plot aggregation: degenerate band, row counts and t-scaling") {
    // single seed: band collapses onto the mean
    auto single = aggregate_curves({{{0, 1.0}, {10, 2.0}}}, nullptr);
    REQUIRE(single.size() == 2);
    CHECK(single[1].ci_low == single[1].mean);
    CHECK(single[1].ci_high == single[1].mean);

    // five seeds, ten points: ten rows with the seed mean
    std::vector<std::vector<std::pair<double, double>>> five;
    for (int s = 0; s < 5; ++s) {
        std::vector<std::pair<double, double>> curve;
        for (int p = 0; p < 10; ++p) curve.emplace_back(p * 10.0, s * 1.0);
        five.push_back(curve);
    }
    bool resampled = true;
    auto agg = aggregate_curves(five, &resampled);
    CHECK(!resampled);
    REQUIRE(agg.size() == 10);
    for (const auto& p : agg) CHECK(p.mean == doctest::Approx(2.0));

    // alternating +-1 values give sample std sqrt(k/(k-1)), so the half
    // width is exactly t(k-1) / sqrt(k-1)
    auto band_width = [](std::size_t k) {
        std::vector<std::vector<std::pair<double, double>>> curves;
        for (std::size_t s = 0; s < k; ++s) {
            const double delta = (s % 2 == 0) ? 1.0 : -1.0;
            curves.push_back({{0.0, 5.0 + delta}});
        }
        auto a = aggregate_curves(curves, nullptr);
        return (a[0].ci_high - a[0].ci_low) / 2.0;
    };
    for (std::size_t k : {2, 4, 8, 16}) {
        const double expect = t_critical_95(k - 1) / std::sqrt(static_cast<double>(k - 1));
        CHECK(band_width(k) == doctest::Approx(expect).epsilon(1e-9));
    }
    // more seeds shrink the band
    CHECK(band_width(16) < band_width(4));
    CHECK(band_width(4) < band_width(2));

    // mismatched grids are resampled with a warning flag
    bool warn = false;
    auto mixed = aggregate_curves({{{0, 1.0}, {10, 2.0}}, {{0, 1.0}, {5, 1.5}, {10, 2.0}}}, &warn);
    CHECK(warn);
    CHECK(mixed.size() == 3);
}

TEST_CASE("export_plots writes per-(algo, metric) csv curves") {
    const fs::path out = fs::temp_directory_path() / "uasrl_plot_test";
    fs::remove_all(out);
    auto cfg = ExperimentConfig::from_string(tiny_config((out / "runs").string()));
    cfg.validate();
    run_experiment(cfg, 2);
    auto written = export_plots({(out / "runs").string()}, (out / "plots").string());
    CHECK(written.size() == 2); // eval_return and eval_wr for one algorithm
    std::ifstream is(written[0]);
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,mean,ci_low,ci_high");
    std::string row;
    std::size_t rows = 0;
    while (std::getline(is, row)) ++rows;
    CHECK(rows >= 1);
    fs::remove_all(out);
}

TEST_CASE("verify suites run end to end") {
    CHECK(verify_suite("masks").passed);
    CHECK(verify_suite("proposition").passed);
    CHECK_THROWS_AS(verify_suite("bogus"), ConfigError);
}

} // TEST_SUITE
