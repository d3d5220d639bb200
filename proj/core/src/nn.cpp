#include "dslnet/nn.hpp"

#include <cmath>

namespace dslnet::nn {

using namespace ad;

Var ParamStore::add(const std::string& name, Tensor init) {
    if (params_.count(name))
        throw ConfigError("ParamStore: duplicate parameter " + name);
    Var v = param(std::move(init));
    params_[name] = v;
    opt_state_[name] = AdamState{Tensor(v->value.rows(), v->value.cols()),
                                 Tensor(v->value.rows(), v->value.cols())};
    return v;
}

Var ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, v] : params_)
        std::fill(v->grad.vec().begin(), v->grad.vec().end(), 0.0);
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, v] : params_) n += v->value.numel();
    return n;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    double limit = std::sqrt(6.0 / (double)(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t(rows, cols);
    for (auto& v : t.vec()) v = dist(rng);
    return t;
}

Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    // Gram-Schmidt on Gaussian columns (or rows if cols > rows).
    std::normal_distribution<double> dist(0.0, 1.0);
    bool wide = cols > rows;
    std::size_t n = wide ? cols : rows;
    std::size_t m = wide ? rows : cols;
    std::vector<std::vector<double>> q;
    q.reserve(m);
    std::size_t attempts = 0;
    while (q.size() < m && attempts < 8 * m) {
        ++attempts;
        std::vector<double> v(n);
        for (auto& x : v) x = dist(rng);
        for (const auto& u : q) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += u[i] * v[i];
            for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-8) continue;
        for (auto& x : v) x /= nrm;
        q.push_back(std::move(v));
    }
    Tensor t(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            t(r, c) = wide ? q[r][c] : q[c][r];
    return t;
}

// ---- Linear -------------------------------------------------------------------

Linear::Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
    w = ps.add(name + ".w", xavier_uniform(in, out, rng));
    b = ps.add(name + ".b", Tensor(1, out));
}

Linear Linear::from_store(const ParamStore& ps, const std::string& name) {
    Linear l;
    l.w = ps.get(name + ".w");
    l.b = ps.get(name + ".b");
    return l;
}

Var Linear::operator()(const Var& x) const { return add_rowvec(matmul(x, w), b); }

// ---- LSTM ---------------------------------------------------------------------

Lstm::Lstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t h,
           std::mt19937_64& rng)
    : hidden(h) {
    // input block Xavier, recurrent block orthogonal, per gate
    Tensor wt(in + h, 4 * h);
    Tensor wx = xavier_uniform(in, 4 * h, rng);
    for (std::size_t r = 0; r < in; ++r)
        for (std::size_t c = 0; c < 4 * h; ++c) wt(r, c) = wx(r, c);
    for (std::size_t g = 0; g < 4; ++g) {
        Tensor wh = orthogonal(h, h, rng);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < h; ++c) wt(in + r, g * h + c) = wh(r, c);
    }
    w = ps.add(name + ".w", std::move(wt));
    b = ps.add(name + ".b", Tensor(1, 4 * h));
}

Lstm Lstm::from_store(const ParamStore& ps, const std::string& name, std::size_t hidden) {
    Lstm l;
    l.hidden = hidden;
    l.w = ps.get(name + ".w");
    l.b = ps.get(name + ".b");
    return l;
}

std::pair<Var, Var> Lstm::cell(const Var& x, const Var& h, const Var& c) const {
    std::size_t H = hidden;
    Var gates = add_rowvec(matmul(concat_cols(x, h), w), b);
    Var i = sigmoid_(slice_cols(gates, 0, H));
    Var f = sigmoid_(slice_cols(gates, H, 2 * H));
    Var g = tanh_(slice_cols(gates, 2 * H, 3 * H));
    Var o = sigmoid_(slice_cols(gates, 3 * H, 4 * H));
    Var c_new = add(mul(f, c), mul(i, g));
    Var h_new = mul(o, tanh_(c_new));
    return {h_new, c_new};
}

Var Lstm::forward(const Var& seq) const {
    std::size_t T = seq->value.rows();
    Var h = constant(Tensor(1, hidden));
    Var c = constant(Tensor(1, hidden));
    Var out;
    for (std::size_t t = 0; t < T; ++t) {
        auto [h2, c2] = cell(slice_rows(seq, t, t + 1), h, c);
        h = h2;
        c = c2;
        out = t == 0 ? h : concat_rows(out, h);
    }
    return out;
}

BiLstm::BiLstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::mt19937_64& rng)
    : fwd(ps, name + ".fwd", in, hidden, rng), bwd(ps, name + ".bwd", in, hidden, rng) {}

BiLstm BiLstm::from_store(const ParamStore& ps, const std::string& name,
                          std::size_t hidden) {
    BiLstm b;
    b.fwd = Lstm::from_store(ps, name + ".fwd", hidden);
    b.bwd = Lstm::from_store(ps, name + ".bwd", hidden);
    return b;
}

Var BiLstm::operator()(const Var& seq) const {
    Var f = fwd.forward(seq);
    Var r = flip_rows(bwd.forward(flip_rows(seq)));
    return concat_cols(f, r);
}

// ---- attention ------------------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name,
                                       std::size_t q_dim, std::size_t kv_dim,
                                       std::size_t model_dim, std::size_t heads_,
                                       std::size_t out_dim, std::mt19937_64& rng)
    : heads(heads_), dim(model_dim) {
    if (model_dim % heads != 0)
        throw ShapeError("MultiHeadAttention: model dim " + std::to_string(model_dim) +
                         " not divisible by heads " + std::to_string(heads));
    wq = Linear(ps, name + ".wq", q_dim, model_dim, rng);
    wk = Linear(ps, name + ".wk", kv_dim, model_dim, rng);
    wv = Linear(ps, name + ".wv", kv_dim, model_dim, rng);
    wo = Linear(ps, name + ".wo", model_dim, out_dim, rng);
}

MultiHeadAttention MultiHeadAttention::from_store(const ParamStore& ps,
                                                  const std::string& name,
                                                  std::size_t heads, std::size_t model_dim) {
    MultiHeadAttention m;
    m.heads = heads;
    m.dim = model_dim;
    m.wq = Linear::from_store(ps, name + ".wq");
    m.wk = Linear::from_store(ps, name + ".wk");
    m.wv = Linear::from_store(ps, name + ".wv");
    m.wo = Linear::from_store(ps, name + ".wo");
    return m;
}

Var MultiHeadAttention::operator()(const Var& q_seq, const Var& kv_seq) const {
    Var q = wq(q_seq), k = wk(kv_seq), v = wv(kv_seq);
    std::size_t dh = dim / heads;
    double inv_scale = 1.0 / std::sqrt((double)dh);
    Var out;
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = slice_cols(v, h * dh, (h + 1) * dh);
        Var attn = softmax_rows(scale(matmul(qh, kh, false, true), inv_scale));
        Var oh = matmul(attn, vh);
        out = h == 0 ? oh : concat_cols(out, oh);
    }
    return wo(out);
}

}  // namespace dslnet::nn
