#include "uasrl/nets/networks.hpp"

#include <cmath>

namespace uasrl::nets {

using grad::ParameterSet;
using grad::Rng;
using grad::Shape;
using grad::Tensor;

void orthogonal_init(Tensor& w, double gain, Rng& rng) {
    if (w.rank() != 2) throw ContractError("orthogonal_init: expected a matrix");
    const std::size_t rows = w.shape()[0], cols = w.shape()[1];
    const bool tall = rows >= cols;
    const std::size_t nvec = tall ? cols : rows;  // vectors to orthonormalize
    const std::size_t dim = tall ? rows : cols;

    std::vector<std::vector<double>> vecs(nvec, std::vector<double>(dim));
    for (auto& v : vecs) {
        for (double& x : v) x = rng.gaussian();
    }
    for (std::size_t i = 0; i < nvec; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += vecs[i][k] * vecs[j][k];
            for (std::size_t k = 0; k < dim; ++k) vecs[i][k] -= dot * vecs[j][k];
        }
        double norm = 0.0;
        for (double x : vecs[i]) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // astronomically unlikely; redraw the vector
            for (double& x : vecs[i]) x = rng.gaussian();
            norm = 0.0;
            for (double x : vecs[i]) norm += x * x;
            norm = std::sqrt(norm);
        }
        for (double& x : vecs[i]) x /= norm;
    }
    auto& data = w.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            data[r * cols + c] = gain * (tall ? vecs[c][r] : vecs[r][c]);
        }
    }
}

namespace {

Tensor make_linear_weight(std::size_t in, std::size_t out, double gain, Rng& rng) {
    Tensor w = Tensor::zeros({in, out}, true);
    orthogonal_init(w, gain, rng);
    return w;
}

Tensor make_bias(std::size_t n) { return Tensor::zeros({n}, true); }

constexpr double kHiddenGain = 1.4142135623730951; // sqrt(2)
constexpr double kHeadGain = 0.01;

} // namespace

ParameterSet make_trunk(const TrunkConfig& cfg, Rng& rng, const std::string& prefix) {
    if (cfg.obs_dim == 0 || cfg.uas_dim == 0 || cfg.hidden == 0) {
        throw ContractError("make_trunk: dimensions must be positive");
    }
    const std::size_t H = cfg.hidden;
    ParameterSet p;
    p.add(prefix + ".embed.w_obs", make_linear_weight(cfg.obs_dim, H, kHiddenGain, rng));
    p.add(prefix + ".embed.w_act", make_linear_weight(cfg.uas_dim, H, kHiddenGain, rng));
    p.add(prefix + ".embed.b", make_bias(H));
    for (const char* gate : {"z", "r", "n"}) {
        p.add(prefix + ".gru.w_" + std::string(gate), make_linear_weight(H, H, kHiddenGain, rng));
        p.add(prefix + ".gru.u_" + std::string(gate), make_linear_weight(H, H, kHiddenGain, rng));
        p.add(prefix + ".gru.b_" + std::string(gate), make_bias(H));
    }
    p.add(prefix + ".head.w1", make_linear_weight(H, H, kHiddenGain, rng));
    p.add(prefix + ".head.b1", make_bias(H));
    p.add(prefix + ".head.w2", make_linear_weight(H, cfg.uas_dim, kHeadGain, rng));
    p.add(prefix + ".head.b2", make_bias(cfg.uas_dim));
    return p;
}

TrunkStep trunk_forward(const ParameterSet& params, const TrunkConfig& cfg, const Tensor& obs,
                        const Tensor& last_action_onehot, const Tensor& h_prev,
                        const std::string& prefix) {
    using namespace grad;
    if (obs.rank() != 2 || obs.shape()[1] != cfg.obs_dim) {
        throw ContractError("trunk_forward: obs shape " + shape_str(obs.shape()) +
                            " does not match obs_dim " + std::to_string(cfg.obs_dim));
    }
    if (last_action_onehot.rank() != 2 || last_action_onehot.shape()[1] != cfg.uas_dim) {
        throw ContractError("trunk_forward: last-action shape mismatch");
    }
    if (h_prev.rank() != 2 || h_prev.shape()[1] != cfg.hidden ||
        h_prev.shape()[0] != obs.shape()[0]) {
        throw ContractError("trunk_forward: hidden state shape mismatch");
    }
    const auto& P = params;
    Tensor x = relu(add(add(matmul(obs, P.at(prefix + ".embed.w_obs")),
                            matmul(last_action_onehot, P.at(prefix + ".embed.w_act"))),
                        P.at(prefix + ".embed.b")));
    Tensor z = sigmoid(add(add(matmul(x, P.at(prefix + ".gru.w_z")),
                               matmul(h_prev, P.at(prefix + ".gru.u_z"))),
                           P.at(prefix + ".gru.b_z")));
    Tensor r = sigmoid(add(add(matmul(x, P.at(prefix + ".gru.w_r")),
                               matmul(h_prev, P.at(prefix + ".gru.u_r"))),
                           P.at(prefix + ".gru.b_r")));
    Tensor n = grad::tanh(add(add(matmul(x, P.at(prefix + ".gru.w_n")),
                                  mul(r, matmul(h_prev, P.at(prefix + ".gru.u_n")))),
                              P.at(prefix + ".gru.b_n")));
    // h' = (1-z)*n + z*h
    Tensor h = add(n, mul(z, sub(h_prev, n)));
    Tensor hid = relu(add(matmul(h, P.at(prefix + ".head.w1")), P.at(prefix + ".head.b1")));
    Tensor out = add(matmul(hid, P.at(prefix + ".head.w2")), P.at(prefix + ".head.b2"));
    return {out, h};
}

TrunkUnroll trunk_unroll(const ParameterSet& params, const TrunkConfig& cfg,
                         const std::vector<Tensor>& obs_seq,
                         const std::vector<Tensor>& last_action_seq, const Tensor& h0,
                         const std::string& prefix) {
    if (obs_seq.size() != last_action_seq.size()) {
        throw ContractError("trunk_unroll: sequence length mismatch");
    }
    TrunkUnroll out;
    out.outputs.reserve(obs_seq.size());
    out.hiddens.reserve(obs_seq.size());
    Tensor h = h0;
    for (std::size_t t = 0; t < obs_seq.size(); ++t) {
        TrunkStep step = trunk_forward(params, cfg, obs_seq[t], last_action_seq[t], h, prefix);
        h = step.h_next;
        out.outputs.push_back(std::move(step.output));
        out.hiddens.push_back(h);
    }
    return out;
}

ParameterSet make_predictor(const PredictorConfig& cfg, Rng& rng, const std::string& prefix) {
    if (cfg.hidden == 0 || cfg.uas_dim == 0) {
        throw ContractError("make_predictor: dimensions must be positive");
    }
    ParameterSet p;
    p.add(prefix + ".w1", make_linear_weight(cfg.hidden, cfg.hidden, kHiddenGain, rng));
    p.add(prefix + ".b1", make_bias(cfg.hidden));
    p.add(prefix + ".w2", make_linear_weight(cfg.hidden, cfg.uas_dim, kHeadGain, rng));
    p.add(prefix + ".b2", make_bias(cfg.uas_dim));
    return p;
}

Tensor predictor_forward(const ParameterSet& params, const PredictorConfig& cfg, const Tensor& h,
                         const std::string& prefix) {
    using namespace grad;
    if (h.rank() != 2 || h.shape()[1] != cfg.hidden) {
        throw ContractError("predictor_forward: hidden state shape mismatch");
    }
    Tensor hid = relu(add(matmul(h, params.at(prefix + ".w1")), params.at(prefix + ".b1")));
    return add(matmul(hid, params.at(prefix + ".w2")), params.at(prefix + ".b2"));
}

ParameterSet make_critic(const CriticConfig& cfg, Rng& rng, const std::string& prefix) {
    if (cfg.state_dim == 0 || cfg.hidden == 0) {
        throw ContractError("make_critic: dimensions must be positive");
    }
    ParameterSet p;
    p.add(prefix + ".w1", make_linear_weight(cfg.state_dim, cfg.hidden, kHiddenGain, rng));
    p.add(prefix + ".b1", make_bias(cfg.hidden));
    p.add(prefix + ".w2", make_linear_weight(cfg.hidden, cfg.hidden, kHiddenGain, rng));
    p.add(prefix + ".b2", make_bias(cfg.hidden));
    p.add(prefix + ".w3", make_linear_weight(cfg.hidden, 1, kHeadGain, rng));
    p.add(prefix + ".b3", make_bias(1));
    return p;
}

Tensor critic_forward(const ParameterSet& params, const CriticConfig& cfg, const Tensor& state,
                      const std::string& prefix) {
    using namespace grad;
    if (state.rank() != 2 || state.shape()[1] != cfg.state_dim) {
        throw ContractError("critic_forward: state shape mismatch");
    }
    Tensor h1 = relu(add(matmul(state, params.at(prefix + ".w1")), params.at(prefix + ".b1")));
    Tensor h2 = relu(add(matmul(h1, params.at(prefix + ".w2")), params.at(prefix + ".b2")));
    return add(matmul(h2, params.at(prefix + ".w3")), params.at(prefix + ".b3"));
}

ParameterSet make_mixer(const MixerConfig& cfg, Rng& rng, const std::string& prefix) {
    if (cfg.n_agents == 0 || cfg.state_dim == 0 || cfg.embed == 0) {
        throw ContractError("make_mixer: dimensions must be positive");
    }
    ParameterSet p;
    p.add(prefix + ".hw1.w1", make_linear_weight(cfg.state_dim, cfg.hyper_hidden, kHiddenGain, rng));
    p.add(prefix + ".hw1.b1", make_bias(cfg.hyper_hidden));
    p.add(prefix + ".hw1.w2",
          make_linear_weight(cfg.hyper_hidden, cfg.n_agents * cfg.embed, kHeadGain, rng));
    p.add(prefix + ".hw1.b2", make_bias(cfg.n_agents * cfg.embed));
    p.add(prefix + ".hb1.w", make_linear_weight(cfg.state_dim, cfg.embed, kHeadGain, rng));
    p.add(prefix + ".hb1.b", make_bias(cfg.embed));
    p.add(prefix + ".hw2.w1", make_linear_weight(cfg.state_dim, cfg.hyper_hidden, kHiddenGain, rng));
    p.add(prefix + ".hw2.b1", make_bias(cfg.hyper_hidden));
    p.add(prefix + ".hw2.w2", make_linear_weight(cfg.hyper_hidden, cfg.embed, kHeadGain, rng));
    p.add(prefix + ".hw2.b2", make_bias(cfg.embed));
    p.add(prefix + ".hb2.w1", make_linear_weight(cfg.state_dim, cfg.hyper_hidden, kHiddenGain, rng));
    p.add(prefix + ".hb2.b1", make_bias(cfg.hyper_hidden));
    p.add(prefix + ".hb2.w2", make_linear_weight(cfg.hyper_hidden, 1, kHeadGain, rng));
    p.add(prefix + ".hb2.b2", make_bias(1));
    return p;
}

Tensor mixer_forward(const ParameterSet& params, const MixerConfig& cfg, const Tensor& chosen_q,
                     const Tensor& state, const std::string& prefix) {
    using namespace grad;
    if (chosen_q.rank() != 2 || chosen_q.shape()[1] != cfg.n_agents) {
        throw ContractError("mixer_forward: chosen_q must be [B, n_agents]");
    }
    if (state.rank() != 2 || state.shape()[1] != cfg.state_dim ||
        state.shape()[0] != chosen_q.shape()[0]) {
        throw ContractError("mixer_forward: state shape mismatch");
    }
    const auto& P = params;
    Tensor hw1_hidden =
        relu(add(matmul(state, P.at(prefix + ".hw1.w1")), P.at(prefix + ".hw1.b1")));
    Tensor w1 = grad::abs(add(matmul(hw1_hidden, P.at(prefix + ".hw1.w2")),
                              P.at(prefix + ".hw1.b2"))); // [B, n*embed]
    Tensor b1 = add(matmul(state, P.at(prefix + ".hb1.w")), P.at(prefix + ".hb1.b"));
    Tensor hidden = elu(add(batched_vecmat(chosen_q, w1, cfg.embed), b1));

    Tensor hw2_hidden =
        relu(add(matmul(state, P.at(prefix + ".hw2.w1")), P.at(prefix + ".hw2.b1")));
    Tensor w2 = grad::abs(add(matmul(hw2_hidden, P.at(prefix + ".hw2.w2")),
                              P.at(prefix + ".hw2.b2"))); // [B, embed]
    Tensor hb2_hidden =
        relu(add(matmul(state, P.at(prefix + ".hb2.w1")), P.at(prefix + ".hb2.b1")));
    Tensor b2 = add(matmul(hb2_hidden, P.at(prefix + ".hb2.w2")), P.at(prefix + ".hb2.b2"));
    return add(batched_vecmat(hidden, w2, 1), b2); // [B,1]
}

TargetParameters make_target(const grad::ParameterSet& source) {
    TargetParameters t;
    t.params = source.detached_clone();
    return t;
}

void sync_target(const grad::ParameterSet& source, TargetParameters& target) {
    if (source.size() != target.params.size()) {
        throw ContractError("sync_target: parameter count mismatch");
    }
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& [sn, st] = source.items()[i];
        auto& [tn, tt] = target.params.items()[i];
        if (sn != tn || st.shape() != tt.shape()) {
            throw ContractError("sync_target: name/shape mismatch at '" + sn + "'");
        }
        tt.mutable_data() = st.data();
    }
    target.iterations_since_sync = 0;
    ++target.sync_count;
}

} // namespace uasrl::nets
