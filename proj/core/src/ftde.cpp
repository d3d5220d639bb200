#include "dslnet/ftde.hpp"

#include <cmath>

namespace dslnet {

using namespace ad;
using nn::Var;

VelocityProfile velocity(const Tensor& traj) {
    std::size_t T = traj.rows(), D = traj.cols();
    if (T < 2) throw TooShort("velocity: need T >= 2");
    VelocityProfile out;
    out.v = Tensor(T, D);
    out.speed = Tensor(T, 1);
    out.v_hat = Tensor(T, D);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            double dv;
            if (t == 0) dv = traj(1, d) - traj(0, d);
            else if (t == T - 1) dv = traj(T - 1, d) - traj(T - 2, d);
            else dv = 0.5 * (traj(t + 1, d) - traj(t - 1, d));
            out.v(t, d) = dv;
        }
        double s2 = 0.0;
        for (std::size_t d = 0; d < D; ++d) s2 += out.v(t, d) * out.v(t, d);
        double s = std::sqrt(s2);
        out.speed(t, 0) = s;
        if (s > 1e-9)
            for (std::size_t d = 0; d < D; ++d) out.v_hat(t, d) = out.v(t, d) / s;
    }
    return out;
}

namespace {
// softplus(x) = 1  =>  x = log(e - 1)
constexpr double kAlphaRawInit = 0.5413248546129181;
}

Ftde::Ftde(nn::ParamStore& ps, const FtdeConfig& cfg, const FinslerParams& fp,
           std::size_t in_dims, std::mt19937_64& rng)
    : config(cfg), finsler(fp) {
    cfg.validate();
    if (!(fp.epsilon_energy > 0.0)) throw ConfigError("FinslerParams: epsilon_energy > 0");
    phi1_ = nn::Linear(ps, "ftde.phi.l1", 2 * in_dims, fp.phi_hidden, rng);
    phi2_ = nn::Linear(ps, "ftde.phi.l2", fp.phi_hidden, 1, rng);
    alpha_raw_ = ps.add("ftde.alpha_raw", Tensor::scalar(kAlphaRawInit));
    std::size_t c_in = in_dims;
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
        conv_w_.push_back(ps.add("ftde.conv" + std::to_string(i) + ".w",
                                 nn::xavier_uniform(cfg.conv_kernel * c_in,
                                                    cfg.conv_channels[i], rng)));
        conv_b_.push_back(ps.add("ftde.conv" + std::to_string(i) + ".b",
                                 Tensor(1, cfg.conv_channels[i])));
        c_in = cfg.conv_channels[i];
    }
    bilstm_ = nn::BiLstm(ps, "ftde.bilstm", c_in, cfg.lstm_hidden, rng);
    out_proj_ = nn::Linear(ps, "ftde.out", 2 * cfg.lstm_hidden, cfg.out_dim, rng);
}

Ftde Ftde::from_store(const nn::ParamStore& ps, const FtdeConfig& cfg,
                      const FinslerParams& fp) {
    Ftde f;
    f.config = cfg;
    f.finsler = fp;
    f.phi1_ = nn::Linear::from_store(ps, "ftde.phi.l1");
    f.phi2_ = nn::Linear::from_store(ps, "ftde.phi.l2");
    f.alpha_raw_ = ps.get("ftde.alpha_raw");
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
        f.conv_w_.push_back(ps.get("ftde.conv" + std::to_string(i) + ".w"));
        f.conv_b_.push_back(ps.get("ftde.conv" + std::to_string(i) + ".b"));
    }
    f.bilstm_ = nn::BiLstm::from_store(ps, "ftde.bilstm", cfg.lstm_hidden);
    f.out_proj_ = nn::Linear::from_store(ps, "ftde.out");
    return f;
}

std::pair<Var, Var> Ftde::finsler_energy(const Tensor& traj) const {
    VelocityProfile vp = velocity(traj);
    std::size_t T = traj.rows(), D = traj.cols();
    Tensor phi_in(T, 2 * D);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t d = 0; d < D; ++d) {
            phi_in(t, d) = traj(t, d);
            phi_in(t, D + d) = vp.v_hat(t, d);
        }
    Var phi = softplus(phi2_(tanh_(phi1_(constant(phi_in)))));  // T x 1, positive
    Var alpha = softplus(alpha_raw_);
    Var speed_pow = pow_const_base(constant(vp.speed), alpha);  // T x 1
    Var e = mul(phi, speed_pow);
    Var denom = add_const(sum_all(e), finsler.epsilon_energy);
    Var E = div(e, denom);
    return {e, E};
}

Var Ftde::conv_stack(const Var& traj, std::size_t t_len) const {
    Var h = traj;
    for (std::size_t i = 0; i < conv_w_.size(); ++i)
        h = relu(conv1d(h, t_len, 1, conv_w_[i], conv_b_[i], /*causal=*/true));
    return h;
}

Var Ftde::forward(const Tensor& traj) const {
    std::size_t T = traj.rows();
    auto [e, E] = finsler_energy(traj);
    Var gate = add_const(scale(E, (double)T), 1.0);  // 1 + T*E_t, ~2 when uniform
    Var h = conv_stack(constant(traj), T);
    if (config.modulate_conv_instead) h = row_scale(h, gate);
    Var seq = bilstm_(h);
    if (!config.modulate_conv_instead) seq = row_scale(seq, gate);
    return out_proj_(seq);  // T x d_t
}

}  // namespace dslnet
