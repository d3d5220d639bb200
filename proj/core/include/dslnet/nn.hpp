#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "dslnet/autodiff.hpp"

namespace dslnet::nn {

using ad::Var;

// Named parameter set with per-parameter AdamW state. Names are unique and
// iteration order (std::map) is deterministic.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init);
    Var get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, Var>& params() { return params_; }
    const std::map<std::string, Var>& params() const { return params_; }

    void zero_grad();
    std::size_t total_elements() const;

    struct AdamState {
        Tensor m, v;
    };
    std::map<std::string, AdamState>& opt_state() { return opt_state_; }
    const std::map<std::string, AdamState>& opt_state() const { return opt_state_; }
    std::int64_t step_count = 0;

private:
    std::map<std::string, Var> params_;
    std::map<std::string, AdamState> opt_state_;
};

// Deterministic seeded initializers.
Tensor xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// y = x W + b. Registers "<name>.w" (in x out) and "<name>.b".
struct Linear {
    Var w, b;
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
           std::mt19937_64& rng);
    static Linear from_store(const ParamStore& ps, const std::string& name);
    Var operator()(const Var& x) const;
};

// Standard LSTM over a TxC sequence; weights follow the [input, hidden] ->
// 4H gate layout (i, f, g, o). Recurrent block orthogonally initialized.
struct Lstm {
    std::size_t hidden = 0;
    Var w;  // (C+H) x 4H
    Var b;  // 1 x 4H
    Lstm() = default;
    Lstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
         std::mt19937_64& rng);
    static Lstm from_store(const ParamStore& ps, const std::string& name, std::size_t hidden);
    // (h', c') for one step; x is 1xC, h and c are 1xH.
    std::pair<Var, Var> cell(const Var& x, const Var& h, const Var& c) const;
    Var forward(const Var& seq) const;  // T x H
};

// Forward and time-reversed LSTM passes, concatenated: T x 2H.
struct BiLstm {
    Lstm fwd, bwd;
    BiLstm() = default;
    BiLstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
           std::mt19937_64& rng);
    static BiLstm from_store(const ParamStore& ps, const std::string& name,
                             std::size_t hidden);
    Var operator()(const Var& seq) const;
};

// Scaled dot-product multi-head attention. Queries may come from a different
// stream than keys/values; out_dim defaults to the model dim.
struct MultiHeadAttention {
    std::size_t heads = 1;
    std::size_t dim = 0;  // model dim (per-head dim * heads)
    Linear wq, wk, wv, wo;
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& ps, const std::string& name, std::size_t q_dim,
                       std::size_t kv_dim, std::size_t model_dim, std::size_t heads,
                       std::size_t out_dim, std::mt19937_64& rng);
    static MultiHeadAttention from_store(const ParamStore& ps, const std::string& name,
                                         std::size_t heads, std::size_t model_dim);
    Var operator()(const Var& q_seq, const Var& kv_seq) const;
};

}  // namespace dslnet::nn
