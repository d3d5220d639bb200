#pragma once

#include <vector>

#include "dslnet/nn.hpp"

namespace dslnet {

// Nonnegative coupling distributing unit source mass over T frames (row-major
// n_source x T; the model uses n_source = 1).
struct TransportPlan {
    Tensor gamma;
    Tensor cost;
    double epsilon_ot = 0.1;
    int iterations_used = 0;
    bool converged = true;

    void validate(double tol = 1e-6) const;
};

struct FusionConfig {
    std::size_t attn_heads = 2;
    double epsilon_ot = 0.1;
    int max_sinkhorn_iters = 200;
    double sinkhorn_tol = 1e-6;
    double lambda_time = 0.1;
    double lambda_feat = 1.0;
    std::size_t proj_dim = 32;
    double alpha_loss = 0.5;
    std::size_t num_classes = 10;

    void validate() const {
        if (!(lambda_feat + lambda_time > 0.0))
            throw ConfigError("FusionConfig: lambda_feat + lambda_time must be > 0");
        if (!(epsilon_ot > 0.0)) throw ConfigError("FusionConfig: epsilon_ot must be > 0");
        if (num_classes < 2) throw ConfigError("FusionConfig: need >= 2 classes");
    }
};

// Plain-number OT cost (oracle/reporting path; the training path builds the
// same expression with autodiff ops inside Fusion::forward).
Tensor ot_cost(const Tensor& f_s_attn, const Tensor& f_t_attn, double lambda_feat,
               double lambda_time);

// Entropy-regularized transport. For a 1xT cost the solution against a uniform
// target prior is closed-form softmax(-cost/eps); general rectangular costs
// with uniform marginals run Sinkhorn scaling until the marginal residual
// drops below tol.
TransportPlan sinkhorn_align(const Tensor& cost, double epsilon_ot, int max_iters,
                             double tol);

Tensor align_trajectory(const TransportPlan& plan, const Tensor& f_t_attn);

class Fusion {
public:
    Fusion() = default;
    Fusion(nn::ParamStore& ps, const FusionConfig& cfg, std::size_t d_s, std::size_t d_t,
           std::mt19937_64& rng);
    static Fusion from_store(const nn::ParamStore& ps, const FusionConfig& cfg,
                             std::size_t d_s, std::size_t d_t);

    // Cross-attention both ways: {F_s_attn (1 x d_s), F_t_attn (T x d_t)}.
    std::pair<nn::Var, nn::Var> cross_attend(const nn::Var& f_s_seq,
                                             const nn::Var& f_t) const;

    // Differentiable 1xT transport weights: softmax(-cost/eps_ot).
    nn::Var ot_weights(const nn::Var& f_s_attn, const nn::Var& f_t_attn) const;

    nn::Var classify(const nn::Var& f_s_attn, const nn::Var& f_t_aligned) const;

    // CE + alpha_loss * (1 - cos(f_m(F_s_attn), f_a(F_t_aligned)))
    nn::Var loss_total(const nn::Var& logits, std::size_t label, const nn::Var& f_s_attn,
                       const nn::Var& f_t_aligned) const;
    nn::Var geo_loss(const nn::Var& f_s_attn, const nn::Var& f_t_aligned) const;

    FusionConfig config;

private:
    nn::MultiHeadAttention attn_s_, attn_t_;
    nn::Linear head_, proj_m_, proj_a_;
};

}  // namespace dslnet
