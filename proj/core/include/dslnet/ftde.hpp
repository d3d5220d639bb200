#pragma once

#include <vector>

#include "dslnet/nn.hpp"

namespace dslnet {

struct VelocityProfile {
    Tensor v;      // T x D, central differences (one-sided at the ends)
    Tensor speed;  // T x 1
    Tensor v_hat;  // T x D, zero where speed <= 1e-9
};

struct TooShort : ShapeError {
    using ShapeError::ShapeError;
};

VelocityProfile velocity(const Tensor& traj);

struct FinslerParams {
    std::size_t phi_hidden = 32;
    double epsilon_energy = 1e-8;
    // learnable pieces live in the ParamStore under "ftde.phi.*" and
    // "ftde.alpha_raw" (softplus(alpha_raw) keeps the exponent positive,
    // softplus(0.5413...) = 1 at init)
};

struct FtdeConfig {
    std::vector<std::size_t> conv_channels{16, 16};
    std::size_t conv_kernel = 3;
    std::size_t lstm_hidden = 16;
    std::size_t out_dim = 64;  // d_t; transport-based fusion needs d_t == d_s
    bool modulate_conv_instead = false;  // alternative wiring: energy scales the
                                         // conv stack output before the BiLSTM

    void validate() const {
        if (conv_channels.empty()) throw ConfigError("FtdeConfig: need conv channels");
        if (conv_kernel == 0) throw ConfigError("FtdeConfig: kernel must be >= 1");
    }
};

class Ftde {
public:
    Ftde() = default;
    Ftde(nn::ParamStore& ps, const FtdeConfig& cfg, const FinslerParams& fp,
         std::size_t in_dims, std::mt19937_64& rng);
    static Ftde from_store(const nn::ParamStore& ps, const FtdeConfig& cfg,
                           const FinslerParams& fp);

    // e_t = phi(p_t, v_hat_t) * ||p_dot_t||^alpha (0^alpha := 0),
    // E_t = e_t / (sum e + eps). Returns {e (Tx1), E (Tx1)}.
    std::pair<nn::Var, nn::Var> finsler_energy(const Tensor& traj) const;

    // ST-Conv (causal) stack -> BiLSTM -> row scaling by (1 + T E_t). T x d_t.
    nn::Var forward(const Tensor& traj) const;

    // Pre-BiLSTM activations of the causal conv stack (for causality tests).
    nn::Var conv_stack(const nn::Var& traj, std::size_t t_len) const;

    FtdeConfig config;
    FinslerParams finsler;

private:
    nn::Linear phi1_, phi2_;
    nn::Var alpha_raw_;
    std::vector<nn::Var> conv_w_, conv_b_;
    nn::BiLstm bilstm_;
    nn::Linear out_proj_;
};

}  // namespace dslnet
