#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uasrl/act/action_space.hpp"
#include "uasrl/algos/losses.hpp"
#include "uasrl/envs/proposition.hpp"
#include "uasrl/envs/skirmish.hpp"
#include "uasrl/harness/plots.hpp"
#include "uasrl/harness/run.hpp"
#include "uasrl/harness/verify.hpp"

namespace py = pybind11;
using namespace uasrl;

namespace {

// json <-> python dict bridge
py::object json_to_py(const nlohmann::json& j) {
    py::module_ json_mod = py::module_::import("json");
    return json_mod.attr("loads")(j.dump());
}

act::Capabilities caps_from_flags(bool ally, bool enemy) {
    return {.self_act = true, .ally_act = ally, .enemy_act = enemy};
}

py::dict step_result_to_py(const envs::StepResult& r) {
    py::dict d;
    d["reward"] = r.reward;
    d["terminated"] = r.terminated;
    d["won"] = r.won;
    d["obs"] = r.obs;
    py::list avail;
    for (const auto& m : r.avail) avail.append(m.bits);
    d["avail"] = avail;
    return d;
}

py::dict reset_result_to_py(const envs::ResetResult& r) {
    py::dict d;
    d["obs"] = r.obs;
    py::list avail;
    for (const auto& m : r.avail) avail.append(m.bits);
    d["avail"] = avail;
    return d;
}

template <typename EnvT>
void bind_env_common(py::class_<EnvT>& cls) {
    cls.def("reset",
            [](EnvT& env, std::uint64_t seed) { return reset_result_to_py(env.reset(seed)); },
            py::arg("seed"))
        .def("step",
             [](EnvT& env, const std::vector<std::size_t>& actions) {
                 return step_result_to_py(env.step(actions));
             },
             py::arg("actions"))
        .def("state", [](const EnvT& env) { return env.state(); })
        .def_property_readonly("n_agents", [](const EnvT& env) { return env.info().n_agents; })
        .def_property_readonly("obs_dim", [](const EnvT& env) { return env.info().obs_dim; })
        .def_property_readonly("state_dim", [](const EnvT& env) { return env.info().state_dim; })
        .def_property_readonly("uas_size", [](const EnvT& env) { return env.info().uas.size; })
        .def_property_readonly("episode_limit",
                               [](const EnvT& env) { return env.info().episode_limit; })
        .def("layout_json", [](const EnvT& env) {
            return json_to_py(masks_to_json(env.info().uas, env.info().groups,
                                            env.info().group_masks));
        });
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "unified-action-space multi-agent RL toolkit (C++ core)";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::enum_<act::Layout>(m, "Layout")
        .value("UNIFIED", act::Layout::Unified)
        .value("OVERLAPPED", act::Layout::Overlapped);

    py::class_<act::GroupSpec>(m, "GroupSpec")
        .def(py::init([](int group_id, bool ally_act, bool enemy_act, std::vector<int> agents) {
                 return act::GroupSpec{group_id, caps_from_flags(ally_act, enemy_act),
                                       std::move(agents)};
             }),
             py::arg("group_id"), py::arg("ally_act"), py::arg("enemy_act"), py::arg("agent_ids"))
        .def_readonly("group_id", &act::GroupSpec::group_id);

    py::class_<act::UnifiedActionSpace>(m, "UnifiedActionSpace")
        .def_readonly("size", &act::UnifiedActionSpace::size)
        .def_readonly("ally_offset", &act::UnifiedActionSpace::ally_offset)
        .def_readonly("enemy_offset", &act::UnifiedActionSpace::enemy_offset)
        .def("ally_action", &act::UnifiedActionSpace::ally_action)
        .def("enemy_action", &act::UnifiedActionSpace::enemy_action)
        .def("to_json", [](const act::UnifiedActionSpace& uas) { return json_to_py(uas.to_json()); });

    m.def(
        "build_uas",
        [](const std::vector<act::GroupSpec>& groups, std::size_t allies, std::size_t enemies,
           act::Layout layout) {
            auto built = act::build_uas(groups, allies, enemies, layout);
            py::list masks;
            for (const auto& mask : built.group_masks) masks.append(mask.bits);
            return py::make_tuple(built.uas, masks);
        },
        py::arg("groups"), py::arg("n_ally_targets"), py::arg("n_enemy_targets"),
        py::arg("layout") = act::Layout::Unified,
        "Returns (UnifiedActionSpace, per-group static mask bit lists).");

    m.def(
        "mask_policy",
        [](const std::vector<double>& input, const std::vector<std::uint8_t>& mask,
           const std::string& kind) {
            auto result = act::mask_policy(input, act::AvailableActionMask{mask},
                                           kind == "logits" ? act::MaskInput::Logits
                                                            : act::MaskInput::Distribution);
            return result.probs;
        },
        py::arg("input"), py::arg("mask"), py::arg("kind") = "logits");

    m.def(
        "mask_q_argmax",
        [](const std::vector<double>& q, const std::vector<std::uint8_t>& mask) {
            return act::mask_q_argmax(act::QVector{q}, act::AvailableActionMask{mask});
        },
        py::arg("q"), py::arg("mask"));

    m.def(
        "dynamic_mask",
        [](const std::vector<std::uint8_t>& static_mask, const std::vector<std::uint8_t>& avail,
           bool alive) {
            return act::dynamic_mask(act::AvailableActionMask{static_mask}, avail, alive).bits;
        },
        py::arg("static_mask"), py::arg("env_availability"), py::arg("agent_alive") = true);

    m.def("analytic_shared_optimum", &envs::analytic_shared_optimum, py::arg("n_per_group"),
          py::arg("rho_r"));

    m.def(
        "brute_force_shared_optimum",
        [](std::size_t n, std::size_t a0, std::size_t a1, std::size_t resolution) {
            auto r = envs::brute_force_shared_optimum(n, a0, a1, resolution);
            py::dict d;
            d["max_reward"] = r.max_reward;
            d["argmax"] = r.argmax;
            d["analytic"] = r.analytic;
            d["gap"] = r.gap;
            d["grid_points"] = r.evaluated;
            return d;
        },
        py::arg("n_per_group"), py::arg("a0"), py::arg("a1"), py::arg("grid_resolution") = 40);

    m.def(
        "uas_deterministic_optimum",
        [](std::size_t n, std::size_t a0, std::size_t a1, const std::string& obs_mode,
           act::Layout layout) {
            auto r = envs::uas_deterministic_optimum(
                {n, a0, a1, envs::obs_mode_from_string(obs_mode), layout});
            py::dict d;
            d["attainable"] = r.attainable;
            d["value"] = r.value;
            d["shared_bound"] = r.shared_bound;
            d["note"] = r.note;
            return d;
        },
        py::arg("n_per_group"), py::arg("a0"), py::arg("a1"), py::arg("obs_mode") = "id",
        py::arg("layout") = act::Layout::Unified);

    m.def("epsilon_schedule", &algos::epsilon_schedule, py::arg("t"), py::arg("start") = 1.0,
          py::arg("end") = 0.05, py::arg("anneal_steps") = 50'000);

    m.def(
        "compute_gae",
        [](const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
           double lam) {
            auto g = algos::compute_gae(rewards, values, gamma, lam);
            return py::make_tuple(g.advantages, g.returns);
        },
        py::arg("rewards"), py::arg("values"), py::arg("gamma") = 0.99,
        py::arg("gae_lambda") = 0.95);

    py::class_<envs::PropositionGame> prop(m, "PropositionGame");
    prop.def(py::init([](std::size_t n, std::size_t a0, std::size_t a1,
                         const std::string& obs_mode, act::Layout layout) {
                 return envs::PropositionGame(
                     {n, a0, a1, envs::obs_mode_from_string(obs_mode), layout});
             }),
             py::arg("n_per_group") = 2, py::arg("a0") = 4, py::arg("a1") = 6,
             py::arg("obs_mode") = "id", py::arg("layout") = act::Layout::Unified)
        .def("required_action", &envs::PropositionGame::required_action, py::arg("agent"));
    bind_env_common(prop);

    py::class_<envs::Skirmish> skirmish(m, "Skirmish");
    skirmish
        .def(py::init([](std::size_t attackers, std::size_t healers, std::size_t enemies,
                         act::Layout layout, bool append_agent_id) {
                 envs::SkirmishConfig cfg;
                 cfg.n_attackers = attackers;
                 cfg.n_healers = healers;
                 cfg.n_enemies = enemies;
                 cfg.layout = layout;
                 cfg.append_agent_id = append_agent_id;
                 return envs::Skirmish(cfg);
             }),
             py::arg("attackers") = 3, py::arg("healers") = 1, py::arg("enemies") = 4,
             py::arg("layout") = act::Layout::Unified, py::arg("append_agent_id") = false)
        .def("max_episode_reward", &envs::Skirmish::max_episode_reward);
    bind_env_common(skirmish);

    m.def(
        "verify",
        [](const std::string& suite) { return json_to_py(harness::verify_suite(suite).to_json()); },
        py::arg("suite"), "Runs an oracle suite (gradcheck|proposition|igm|masks).");

    m.def(
        "run_training",
        [](const std::string& config_path, std::size_t jobs) {
            auto cfg = harness::ExperimentConfig::from_file(config_path);
            cfg.validate();
            auto records = harness::run_experiment(cfg, jobs);
            py::list out;
            for (const auto& r : records) out.append(json_to_py(r.to_json()));
            return out;
        },
        py::arg("config_path"), py::arg("jobs") = 1);

    m.def(
        "run_training_from_string",
        [](const std::string& config_text, std::size_t jobs) {
            auto cfg = harness::ExperimentConfig::from_string(config_text);
            cfg.validate();
            auto records = harness::run_experiment(cfg, jobs);
            py::list out;
            for (const auto& r : records) out.append(json_to_py(r.to_json()));
            return out;
        },
        py::arg("config_text"), py::arg("jobs") = 1);

    m.def(
        "evaluate_checkpoint",
        [](const std::string& checkpoint, const std::string& config_path, std::size_t episodes,
           std::uint64_t seed) {
            auto cfg = harness::ExperimentConfig::from_file(config_path);
            cfg.validate();
            auto report = harness::evaluate_checkpoint(checkpoint, cfg, episodes, seed);
            py::dict d;
            d["wr"] = report.wr;
            d["mean_return"] = report.mean_return;
            d["mean_length"] = report.mean_length;
            d["episodes"] = report.episodes;
            return d;
        },
        py::arg("checkpoint"), py::arg("config_path"), py::arg("episodes") = 32,
        py::arg("seed") = 9000);

    m.def(
        "export_plots",
        [](const std::vector<std::string>& run_dirs, const std::string& out_dir) {
            return harness::export_plots(run_dirs, out_dir);
        },
        py::arg("run_dirs"), py::arg("out_dir"));

    m.attr("__version__") = "0.1.0";
}
