#pragma once

#include <vector>

#include "dslnet/nn.hpp"
#include "dslnet/ref_frames.hpp"

namespace dslnet {

// Per-frame neighbor lists: neighbors[t * J * k + i * k + r] is the r-th
// nearest neighbor of joint i at frame t (self excluded, ties to lower index).
struct KnnGraph {
    std::size_t t_len = 0;
    std::size_t k = 0;
    std::vector<int> neighbors;  // local joint indices in [0, 21)
};

struct TssnConfig {
    std::size_t k = 4;
    std::vector<std::size_t> block_channels{32, 64, 128};
    std::size_t temporal_kernel = 3;
    std::size_t lstm_hidden = 64;
    std::size_t attn_heads = 4;
    std::size_t out_dim = 64;  // d_s

    void validate() const {
        if (k == 0 || k >= kNumHandJoints) throw ConfigError("TssnConfig: need 1 <= k <= 20");
        if (block_channels.empty()) throw ConfigError("TssnConfig: need >= 1 block");
        if (temporal_kernel == 0) throw ConfigError("TssnConfig: temporal_kernel >= 1");
    }
};

// Euclidean k-nearest neighbors of each point, self excluded, ties broken by
// lower point index. points is NxD with N <= 21.
std::vector<int> knn_frame(const Tensor& points, std::size_t n_points, std::size_t k);

// Graph over every frame of a shape stream ((T*21) x D), computed on the raw
// coordinates. Neighbor entries are global row indices (t*21 + j).
KnnGraph knn_graph(const Tensor& shape_stream, std::size_t t_len, std::size_t k);

class Tssn {
public:
    Tssn() = default;
    Tssn(nn::ParamStore& ps, const TssnConfig& cfg, std::size_t in_dims,
         std::mt19937_64& rng);
    static Tssn from_store(const nn::ParamStore& ps, const TssnConfig& cfg);

    // Edge convolution (max aggregation over neighbors) + per-joint temporal
    // convolution with same padding. features is (T*21) x C.
    nn::Var stgc_block(const nn::Var& features, const KnnGraph& graph,
                       std::size_t block_index, std::size_t t_len) const;

    static nn::Var aggregate_multiscale(const std::vector<nn::Var>& block_outputs);

    // Full stream: STGC stack -> joint mean pool -> BiLSTM -> self-attention.
    // Returns {F_s_seq (T x d_s), F_s (1 x d_s)}.
    std::pair<nn::Var, nn::Var> forward(const Tensor& shape_stream, std::size_t t_len) const;

    TssnConfig config;

private:
    std::vector<nn::Linear> edge_mlps_;       // per block
    std::vector<nn::Var> temporal_w_, temporal_b_;
    nn::BiLstm bilstm_;
    nn::MultiHeadAttention attn_;
};

}  // namespace dslnet
