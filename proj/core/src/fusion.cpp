#include "dslnet/fusion.hpp"

#include <cmath>

namespace dslnet {

using namespace ad;
using nn::Var;

void TransportPlan::validate(double tol) const {
    double mass = 0.0;
    for (double v : gamma.vec()) {
        if (v < 0.0) throw FormatError("TransportPlan: negative entry");
        mass += v;
    }
    if (std::fabs(mass - 1.0) > tol)
        throw FormatError("TransportPlan: total mass " + std::to_string(mass));
}

Tensor ot_cost(const Tensor& f_s_attn, const Tensor& f_t_attn, double lambda_feat,
               double lambda_time) {
    std::size_t T = f_t_attn.rows(), d = f_t_attn.cols();
    if (f_s_attn.numel() != d) throw ShapeError("ot_cost: feature dim mismatch");
    Tensor cost(1, T);
    double ns = 0.0;
    for (std::size_t i = 0; i < d; ++i) ns += f_s_attn[i] * f_s_attn[i];
    ns = std::sqrt(ns);
    for (std::size_t j = 0; j < T; ++j) {
        double dotp = 0.0, nt = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dotp += f_s_attn[i] * f_t_attn(j, i);
            nt += f_t_attn(j, i) * f_t_attn(j, i);
        }
        nt = std::sqrt(nt);
        double cosv = (ns > 1e-12 && nt > 1e-12) ? dotp / (ns * nt) : 0.0;
        double prior = 0.0;
        if (T > 1) {
            double pos = (double)j / (double)(T - 1) - 0.5;
            prior = pos * pos;
        }
        cost(0, j) = lambda_feat * (1.0 - cosv) + lambda_time * prior;
    }
    return cost;
}

TransportPlan sinkhorn_align(const Tensor& cost, double epsilon_ot, int max_iters,
                             double tol) {
    for (double v : cost.vec())
        if (!std::isfinite(v)) throw FormatError("sinkhorn_align: non-finite cost");
    std::size_t n = cost.rows(), m = cost.cols();
    TransportPlan plan;
    plan.cost = cost;
    plan.epsilon_ot = epsilon_ot;
    plan.gamma = Tensor(n, m);

    if (n == 1) {
        // closed form: softmax(-cost/eps) against a uniform target prior
        double mx = -cost[0] / epsilon_ot;
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, -cost[j] / epsilon_ot);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            z += (plan.gamma[j] = std::exp(-cost[j] / epsilon_ot - mx));
        for (std::size_t j = 0; j < m; ++j) plan.gamma[j] /= z;
        plan.iterations_used = 0;
        plan.validate();
        return plan;
    }

    // Sinkhorn scaling with uniform marginals a_i = 1/n scaled so each source
    // row carries unit mass overall (row sums 1/n * n = 1 per plan row after
    // rescale below), b_j = 1/m. Work in log-free form with kernel K.
    std::vector<double> a(n, 1.0 / (double)n), b(m, 1.0 / (double)m);
    Tensor K(n, m);
    double mx = -cost[0];
    for (double v : cost.vec()) mx = std::max(mx, -v);
    for (std::size_t i = 0; i < n * m; ++i) K[i] = std::exp((-cost[i] - mx) / epsilon_ot);
    std::vector<double> u(n, 1.0), v(m, 1.0);
    int it = 0;
    double resid = 0.0;
    for (; it < max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += K(i, j) * v[j];
            u[i] = a[i] / s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += K(i, j) * u[i];
            v[j] = b[j] / s;
        }
        resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += u[i] * K(i, j) * v[j];
            resid = std::max(resid, std::fabs(s - a[i]));
        }
        if (resid < tol) {
            ++it;
            break;
        }
    }
    plan.iterations_used = it;
    plan.converged = resid < tol;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            plan.gamma(i, j) = u[i] * K(i, j) * v[j];
    return plan;
}

Tensor align_trajectory(const TransportPlan& plan, const Tensor& f_t_attn) {
    if (plan.gamma.rows() != 1 || plan.gamma.cols() != f_t_attn.rows())
        throw ShapeError("align_trajectory: plan is " + plan.gamma.shape_str());
    plan.validate();
    Tensor out(1, f_t_attn.cols());
    for (std::size_t j = 0; j < f_t_attn.rows(); ++j)
        for (std::size_t c = 0; c < f_t_attn.cols(); ++c)
            out[c] += plan.gamma[j] * f_t_attn(j, c);
    return out;
}

// ---- learnable fusion -----------------------------------------------------------

Fusion::Fusion(nn::ParamStore& ps, const FusionConfig& cfg, std::size_t d_s,
               std::size_t d_t, std::mt19937_64& rng)
    : config(cfg) {
    cfg.validate();
    attn_s_ = nn::MultiHeadAttention(ps, "fusion.attn_s", d_s, d_t, d_s, cfg.attn_heads,
                                     d_s, rng);
    attn_t_ = nn::MultiHeadAttention(ps, "fusion.attn_t", d_t, d_s, d_t, cfg.attn_heads,
                                     d_t, rng);
    head_ = nn::Linear(ps, "fusion.head", d_s + d_t, cfg.num_classes, rng);
    proj_m_ = nn::Linear(ps, "fusion.proj_m", d_s, cfg.proj_dim, rng);
    proj_a_ = nn::Linear(ps, "fusion.proj_a", d_t, cfg.proj_dim, rng);
}

Fusion Fusion::from_store(const nn::ParamStore& ps, const FusionConfig& cfg,
                          std::size_t d_s, std::size_t d_t) {
    Fusion f;
    f.config = cfg;
    f.attn_s_ = nn::MultiHeadAttention::from_store(ps, "fusion.attn_s", cfg.attn_heads, d_s);
    f.attn_t_ = nn::MultiHeadAttention::from_store(ps, "fusion.attn_t", cfg.attn_heads, d_t);
    f.head_ = nn::Linear::from_store(ps, "fusion.head");
    f.proj_m_ = nn::Linear::from_store(ps, "fusion.proj_m");
    f.proj_a_ = nn::Linear::from_store(ps, "fusion.proj_a");
    return f;
}

std::pair<Var, Var> Fusion::cross_attend(const Var& f_s_seq, const Var& f_t) const {
    Var s_enh = attn_s_(f_s_seq, f_t);  // queries: shape, kv: trajectory
    Var t_enh = attn_t_(f_t, f_s_seq);  // queries: trajectory, kv: shape
    return {mean_rows(s_enh), t_enh};   // pooled global shape feature, sequence
}

Var Fusion::ot_weights(const Var& f_s_attn, const Var& f_t_attn) const {
    std::size_t T = f_t_attn->value.rows();
    Var cost;
    for (std::size_t j = 0; j < T; ++j) {
        Var ftj = slice_rows(f_t_attn, j, j + 1);
        Var c = scale(add_const(scale(cosine_similarity(f_s_attn, ftj), -1.0), 1.0),
                      config.lambda_feat);
        if (T > 1 && config.lambda_time > 0.0) {
            double pos = (double)j / (double)(T - 1) - 0.5;
            c = add_const(c, config.lambda_time * pos * pos);
        }
        cost = j == 0 ? c : concat_cols(cost, c);
    }
    return softmax_rows(scale(cost, -1.0 / config.epsilon_ot));  // 1 x T
}

Var Fusion::classify(const Var& f_s_attn, const Var& f_t_aligned) const {
    return head_(concat_cols(f_s_attn, f_t_aligned));
}

Var Fusion::geo_loss(const Var& f_s_attn, const Var& f_t_aligned) const {
    Var cs = cosine_similarity(proj_m_(f_s_attn), proj_a_(f_t_aligned));
    return add_const(scale(cs, -1.0), 1.0);
}

Var Fusion::loss_total(const Var& logits, std::size_t label, const Var& f_s_attn,
                       const Var& f_t_aligned) const {
    if (label >= config.num_classes)
        throw std::out_of_range("loss_total: label out of range");
    Var ce = cross_entropy(logits, label);
    if (config.alpha_loss == 0.0) return ce;
    return add(ce, scale(geo_loss(f_s_attn, f_t_aligned), config.alpha_loss));
}

}  // namespace dslnet
