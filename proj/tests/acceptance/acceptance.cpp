// Acceptance suite: one check per criterion, each printing a single
// [PASS]/[FAIL] line. Run with --criterion N for one criterion or with no
// arguments for all. Exit code 0 iff everything selected passed.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "../testutil.hpp"
#include "uasrl/algos/umappo.hpp"
#include "uasrl/algos/uqmix.hpp"
#include "uasrl/harness/plots.hpp"
#include "uasrl/harness/run.hpp"
#include "uasrl/harness/verify.hpp"

namespace fs = std::filesystem;
using namespace uasrl;

namespace {

struct Line {
    bool pass;
    std::string text;
};

std::vector<Line> g_lines;

void report(int criterion, bool pass, const std::string& detail) {
    std::ostringstream os;
    os << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << detail;
    std::cout << os.str() << std::endl;
    g_lines.push_back({pass, os.str()});
}

fs::path out_root() {
    fs::path p = fs::current_path() / "acceptance_runs";
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------- criterion 1
bool criterion1() {
    auto rep = harness::verify_suite("proposition");
    double gap = 0.0;
    bool det_one = false;
    for (const auto& c : rep.checks) {
        if (c.name == "bruteforce.gap_to_analytic") gap = c.measured;
        if (c.name == "uas_deterministic.value_is_one") det_one = c.passed;
    }
    std::ostringstream os;
    os << "brute-force optimum within 1e-3 of 0.0625 (gap " << gap
       << ") and deterministic per-id policy attains exactly 1.0";
    report(1, rep.passed && gap < 1e-3 && det_one, os.str());
    return rep.passed && gap < 1e-3 && det_one;
}

// ---------------------------------------------------------------- criterion 2
bool criterion2() {
    auto rep = harness::verify_suite("gradcheck");
    double worst = 0.0;
    for (const auto& c : rep.checks) worst = std::max(worst, c.measured);
    std::ostringstream os;
    os << "all ops and composed losses match central finite differences, max rel err " << worst
       << " < 1e-4 over " << rep.checks.size() << " check groups";
    report(2, rep.passed, os.str());
    return rep.passed;
}

// ---------------------------------------------------------------- criterion 3
bool criterion3() {
    auto rep = harness::verify_suite("igm");
    std::ostringstream os;
    os << "exhaustive joint argmax equals per-agent argmaxes in " << rep.checks[0].measured
       << "/100 random monotonic mixers (3 agents x 5 actions, 125 joint actions)";
    report(3, rep.passed, os.str());
    return rep.passed;
}

// ---------------------------------------------------------------- criterion 4
bool criterion4() {
    auto rep = harness::verify_suite("masks");
    std::ostringstream os;
    os << "mask algebra properties hold on 1000 randomized instances and 10000 sampled "
          "actions contain zero illegal picks";
    report(4, rep.passed, os.str());
    return rep.passed;
}

// ---------------------------------------------------------------- criterion 5
harness::ExperimentConfig prop_config(const std::string& algos_csv, const std::string& obs_mode,
                                      std::uint64_t steps, const std::string& out) {
    std::ostringstream cfg;
    cfg << "[env]\nname = \"proposition\"\nn = 2\na0 = 4\na1 = 6\nobs_mode = \"" << obs_mode
        << "\"\n\n[algo]\nmatrix = [" << algos_csv << "]\n\n[train]\ntotal_steps = " << steps
        << "\nseeds = [1, 2, 3, 4, 5]\neval_interval = 10000\neval_episodes = 32\nout = \"" << out
        << "\"\n";
    return harness::ExperimentConfig::from_string(cfg.str());
}

harness::ExperimentConfig skirmish_config(const std::string& algos_csv, std::uint64_t steps,
                                          const std::string& out) {
    std::ostringstream cfg;
    cfg << "[env]\nname = \"skirmish\"\n\n[algo]\nmatrix = [" << algos_csv
        << "]\n\n[train]\ntotal_steps = " << steps
        << "\nseeds = [1, 2, 3, 4, 5]\neval_interval = 10000\neval_episodes = 32\nout = \"" << out
        << "\"\n";
    return harness::ExperimentConfig::from_string(cfg.str());
}

// max eval_return per seed from a metrics file
double best_eval_return(const std::string& metrics_path) {
    std::ifstream is(metrics_path);
    std::string line;
    double best = -1e300;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("eval_return") && !j["eval_return"].is_null()) {
            best = std::max(best, j["eval_return"].get<double>());
        }
    }
    return best;
}

double best_eval_wr(const std::string& metrics_path) {
    std::ifstream is(metrics_path);
    std::string line;
    double best = -1e300;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("eval_wr") && !j["eval_wr"].is_null()) {
            best = std::max(best, j["eval_wr"].get<double>());
        }
    }
    return best;
}

bool criterion5() {
    bool all_ok = true;
    const fs::path root = out_root();

    // 5a. shared blind baseline never beats the analytic ceiling + 0.02
    {
        auto cfg = prop_config("\"mappo\", \"qmix\"", "blind", 50'000,
                               (root / "prop_baseline").string());
        cfg.validate();
        auto records = harness::run_experiment(cfg, 2);
        const double ceiling = envs::analytic_shared_optimum(2, 1.0) + 0.02;
        double worst = 0.0;
        bool ok = true;
        for (const auto& r : records) {
            if (r.status != "ok") {
                ok = false;
                continue;
            }
            // 10,000 sampled episodes of the trained stochastic policy
            auto ckpt = grad::load_checkpoint(r.checkpoint_paths.back());
            auto variant = harness::parse_algorithm(r.algorithm);
            auto env = cfg.env_factory(variant.flags)();
            nets::TrunkConfig tcfg{.obs_dim = env->info().obs_dim,
                                   .uas_dim = env->info().uas.size,
                                   .hidden = ckpt.metadata["hidden"].get<std::size_t>()};
            auto ev = algos::evaluate_policy(*env, ckpt.params, tcfg, 4242, 10'000,
                                             algos::PolicyMode::Sample);
            worst = std::max(worst, ev.mean_return);
            ok = ok && ev.mean_return <= ceiling;
        }
        std::ostringstream os;
        os << "(5a) blind overlapped baseline sampled return stays at/below "
           << "0.0625 + 0.02 across 5 seeds x {mappo, qmix}; worst " << worst;
        report(5, ok, os.str());
        all_ok = all_ok && ok;
    }

    // 5b. unified + id-conditioned runs reach 0.9 on the coordination game
    {
        auto cfg = prop_config("\"u-qmix\", \"u-mappo\"", "id", 50'000,
                               (root / "prop_unified").string());
        cfg.validate();
        auto records = harness::run_experiment(cfg, 2);
        std::size_t qmix_hits = 0, mappo_hits = 0;
        for (const auto& r : records) {
            if (r.status != "ok") continue;
            const double best = best_eval_return(r.metrics_path);
            if (r.algorithm == "u-qmix" && best >= 0.9) ++qmix_hits;
            if (r.algorithm == "u-mappo" && best >= 0.9) ++mappo_hits;
        }
        std::ostringstream os;
        os << "(5b) eval return >= 0.9 within 50k steps: u-qmix " << qmix_hits
           << "/5 seeds, u-mappo " << mappo_hits << "/5 seeds (need >= 4/5 each)";
        const bool ok = qmix_hits >= 4 && mappo_hits >= 4;
        report(5, ok, os.str());
        all_ok = all_ok && ok;
    }

    // 5c. skirmish: u-qmix beats the vanilla baseline by 0.15 WR at 200k
    {
        auto cfg = skirmish_config("\"u-qmix\", \"qmix\"", 200'000,
                                   (root / "skirmish").string());
        cfg.validate();
        auto records = harness::run_experiment(cfg, 2);
        double uqmix_sum = 0.0, qmix_sum = 0.0;
        std::size_t uqmix_n = 0, qmix_n = 0, uqmix_ge06 = 0;
        for (const auto& r : records) {
            if (r.status != "ok") {
                std::cerr << "  run failed: " << r.algorithm << " seed " << r.seed << ": "
                          << r.error << "\n";
                continue;
            }
            if (r.algorithm == "u-qmix") {
                uqmix_sum += r.final_eval_wr;
                ++uqmix_n;
                if (best_eval_wr(r.metrics_path) >= 0.6) ++uqmix_ge06;
            } else {
                qmix_sum += r.final_eval_wr;
                ++qmix_n;
            }
        }
        const double uqmix_mean = uqmix_n ? uqmix_sum / uqmix_n : 0.0;
        const double qmix_mean = qmix_n ? qmix_sum / qmix_n : 0.0;
        const bool ok = uqmix_n == 5 && qmix_n == 5 && (uqmix_mean - qmix_mean) >= 0.15 &&
                        uqmix_ge06 >= 3;
        std::ostringstream os;
        os << "(5c) skirmish at 200k steps: u-qmix mean final WR " << uqmix_mean
           << " vs qmix baseline " << qmix_mean << " (gap "
           << uqmix_mean - qmix_mean << " >= 0.15); u-qmix reached WR >= 0.6 in "
           << uqmix_ge06 << "/5 seeds (need >= 3)";
        report(5, ok, os.str());
        all_ok = all_ok && ok;
    }
    return all_ok;
}

// ---------------------------------------------------------------- criterion 6
bool criterion6() {
    bool ok = true;
    const fs::path root = out_root();
    // one config matrix covering base / +UAS / +CGI / both
    std::ostringstream cfgs;
    cfgs << "[env]\nname = \"proposition\"\nn = 2\na0 = 4\na1 = 6\nobs_mode = \"id\"\n"
         << "[algo]\nmatrix = [\"qmix\", \"qmix+uas\", \"qmix+cgi\", \"u-qmix\"]\n"
         << "buffer_size = 256\nbatch_size = 16\n"
         << "[train]\ntotal_steps = 800\nseeds = [1]\neval_interval = 400\n"
         << "eval_episodes = 8\nout = \"" << (root / "ablation").string() << "\"\n";
    auto cfg = harness::ExperimentConfig::from_string(cfgs.str());
    cfg.validate();
    auto records = harness::run_experiment(cfg, 2);
    ok = ok && records.size() == 4;
    for (const auto& r : records) ok = ok && r.status == "ok";
    auto written = harness::export_plots({(root / "ablation").string()},
                                         (root / "ablation_plots").string());
    std::size_t curve_files = 0;
    for (const auto& name : {"qmix", "qmix+uas", "qmix+cgi", "u-qmix"}) {
        for (const auto& p : written) {
            if (fs::path(p).filename() == std::string(name) + "_eval_return.csv") ++curve_files;
        }
    }
    ok = ok && curve_files == 4;

    // lambda_i = 0 provably removes the CGI term from all gradients
    envs::PropositionConfig pc{2, 4, 6, envs::ObsMode::Id, act::Layout::Unified};
    algos::EnvFactory factory = [pc]() { return std::make_unique<envs::PropositionGame>(pc); };

    algos::UQmixSettings with_cgi;
    with_cgi.hyper.total_steps = 64;
    with_cgi.hyper.buffer_size = 32;
    with_cgi.hyper.batch_size = 8;
    with_cgi.seed = 3;
    with_cgi.flags = {.use_uas = true, .use_cgi = true};
    algos::UQmixTrainer cgi_trainer(factory, with_cgi);
    for (int i = 0; i < 10; ++i) cgi_trainer.train_iteration();
    bool psi_present = false, psi_on_tape = false;
    for (const auto& [name, t] : cgi_trainer.parameters().items()) {
        if (name.rfind("psi.", 0) == 0) {
            psi_present = true;
            psi_on_tape = psi_on_tape || cgi_trainer.last_update_tape().records(t);
        }
    }
    ok = ok && psi_present && psi_on_tape; // positive control

    auto no_cgi = with_cgi;
    no_cgi.hyper.lambda_i = 0.0; // forced off
    algos::UQmixTrainer plain_trainer(factory, no_cgi);
    for (int i = 0; i < 10; ++i) plain_trainer.train_iteration();
    bool any_psi = false;
    for (const auto& [name, t] : plain_trainer.parameters().items()) {
        any_psi = any_psi || name.rfind("psi.", 0) == 0;
    }
    ok = ok && !any_psi && plain_trainer.cgi_evaluations() == 0 && !plain_trainer.cgi_active();

    report(6, ok,
           "ablation matrix emits 4 separable curve files (base/+UAS/+CGI/both) and "
           "lambda_i = 0 keeps every CGI term out of the gradient tape");
    return ok;
}

// ---------------------------------------------------------------- criterion 7
bool criterion7() {
    bool ok = true;
    ok = ok && algos::epsilon_schedule(0) == 1.0;
    ok = ok && algos::epsilon_schedule(50'000) == 0.05;

    algos::UQmixHyper qh;
    ok = ok && qh.buffer_size == 5000 && qh.batch_size == 32;
    ok = ok && qh.lr == 3e-4 && qh.lambda_i == 0.06 && qh.gamma == 0.99;
    ok = ok && qh.eps_start == 1.0 && qh.eps_end == 0.05 && qh.eps_anneal_steps == 50'000;
    ok = ok && qh.lr_decay_factor == 0.5 && qh.lr_decay_episodes == 50'000;

    algos::UMappoHyper mh;
    ok = ok && mh.lr == 5e-4 && mh.eps_p == 0.2 && mh.eps_v == 0.2;
    ok = ok && mh.lambda_e == 0.01 && mh.lambda_v == 1.0 && mh.lambda_i == 0.8;
    ok = ok && mh.gamma == 0.99;

    // capacity and batch size enforced at runtime
    algos::ReplayBuffer buffer(qh.buffer_size);
    ok = ok && buffer.capacity() == 5000;
    grad::Rng rng(1);
    bool threw = false;
    try {
        (void)buffer.sample(32, rng);
    } catch (const ContractError&) {
        threw = true; // cannot draw a batch before 32 episodes exist
    }
    ok = ok && threw;

    report(7, ok,
           "epsilon(0)=1.0, epsilon(50k)=0.05; buffer 5000 / batch 32 enforced; "
           "coefficients match the published tables (lambda_e=0.01, lambda_v=1, "
           "lambda_i=0.8/0.06, lr 5e-4/3e-4)");
    return ok;
}

// ---------------------------------------------------------------- criterion 8
bool criterion8() {
    const fs::path root = out_root();
    auto make_cfg = [&](const std::string& out) {
        std::ostringstream cfgs;
        cfgs << "[env]\nname = \"proposition\"\nn = 2\na0 = 4\na1 = 6\nobs_mode = \"id\"\n"
             << "[algo]\nmatrix = [\"u-qmix\", \"u-mappo\"]\nbuffer_size = 512\n"
             << "batch_size = 16\n"
             << "[train]\ntotal_steps = 2000\nseeds = [7]\neval_interval = 500\n"
             << "eval_episodes = 8\nout = \"" << out << "\"\n";
        auto cfg = harness::ExperimentConfig::from_string(cfgs.str());
        cfg.validate();
        return cfg;
    };
    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    auto r1 = harness::run_experiment(make_cfg((root / "repro_a").string()), 2);
    auto r2 = harness::run_experiment(make_cfg((root / "repro_b").string()), 1);
    bool ok = r1.size() == r2.size();
    for (std::size_t i = 0; ok && i < r1.size(); ++i) {
        ok = r1[i].status == "ok" && r2[i].status == "ok" &&
             slurp(r1[i].metrics_path) == slurp(r2[i].metrics_path) &&
             !slurp(r1[i].metrics_path).empty();
    }
    report(8, ok,
           "identical (config, seed) reruns produce bitwise-identical metrics streams "
           "(u-qmix and u-mappo, 2000 steps, independent worker counts)");
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
        }
    }
    bool ok = true;
    auto want = [&](int n) { return only == 0 || only == n; };
    try {
        if (want(1)) ok = criterion1() && ok;
        if (want(2)) ok = criterion2() && ok;
        if (want(3)) ok = criterion3() && ok;
        if (want(4)) ok = criterion4() && ok;
        if (want(5)) ok = criterion5() && ok;
        if (want(6)) ok = criterion6() && ok;
        if (want(7)) ok = criterion7() && ok;
        if (want(8)) ok = criterion8() && ok;
    } catch (const std::exception& e) {
        std::cerr << "[FAIL] acceptance aborted: " << e.what() << "\n";
        return 1;
    }
    return ok ? 0 : 1;
}
