#include "dslnet/tssn.hpp"

#include <algorithm>
#include <cmath>

namespace dslnet {

using namespace ad;
using nn::Var;

std::vector<int> knn_frame(const Tensor& points, std::size_t n_points, std::size_t k) {
    if (k < 1 || k >= n_points)
        throw ConfigError("knn_frame: KOutOfRange, k=" + std::to_string(k));
    std::size_t D = points.cols();
    std::vector<int> out;
    out.reserve(n_points * k);
    std::vector<std::pair<double, int>> cand(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n_points; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                double diff = points(i, d) - points(j, d);
                d2 += diff * diff;
            }
            cand[m++] = {d2, (int)j};
        }
        // ties broken by lower joint index: pair comparison does exactly that
        std::partial_sort(cand.begin(), cand.begin() + (long)k, cand.end());
        for (std::size_t r = 0; r < k; ++r) out.push_back(cand[r].second);
    }
    return out;
}

KnnGraph knn_graph(const Tensor& shape_stream, std::size_t t_len, std::size_t k) {
    constexpr std::size_t J = kNumHandJoints;
    if (shape_stream.rows() != t_len * J)
        throw ShapeError("knn_graph: stream rows != T*21");
    KnnGraph g;
    g.t_len = t_len;
    g.k = k;
    g.neighbors.reserve(t_len * J * k);
    Tensor frame(J, shape_stream.cols());
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t d = 0; d < shape_stream.cols(); ++d)
                frame(j, d) = shape_stream(t * J + j, d);
        auto local = knn_frame(frame, J, k);
        for (int idx : local) g.neighbors.push_back((int)(t * J) + idx);
    }
    return g;
}

Tssn::Tssn(nn::ParamStore& ps, const TssnConfig& cfg, std::size_t in_dims,
           std::mt19937_64& rng)
    : config(cfg) {
    cfg.validate();
    std::size_t c_in = in_dims;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        std::size_t c_out = cfg.block_channels[b];
        edge_mlps_.emplace_back(ps, "tssn.block" + std::to_string(b) + ".edge",
                                2 * c_in, c_out, rng);
        temporal_w_.push_back(ps.add("tssn.block" + std::to_string(b) + ".tconv.w",
                                     nn::xavier_uniform(cfg.temporal_kernel * c_out, c_out, rng)));
        temporal_b_.push_back(ps.add("tssn.block" + std::to_string(b) + ".tconv.b",
                                     Tensor(1, c_out)));
        c_in = c_out;
    }
    std::size_t agg = 0;
    for (std::size_t c : cfg.block_channels) agg += c;
    bilstm_ = nn::BiLstm(ps, "tssn.bilstm", agg, cfg.lstm_hidden, rng);
    attn_ = nn::MultiHeadAttention(ps, "tssn.attn", 2 * cfg.lstm_hidden,
                                   2 * cfg.lstm_hidden, 2 * cfg.lstm_hidden,
                                   cfg.attn_heads, cfg.out_dim, rng);
}

Tssn Tssn::from_store(const nn::ParamStore& ps, const TssnConfig& cfg) {
    Tssn t;
    t.config = cfg;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        t.edge_mlps_.push_back(
            nn::Linear::from_store(ps, "tssn.block" + std::to_string(b) + ".edge"));
        t.temporal_w_.push_back(ps.get("tssn.block" + std::to_string(b) + ".tconv.w"));
        t.temporal_b_.push_back(ps.get("tssn.block" + std::to_string(b) + ".tconv.b"));
    }
    t.bilstm_ = nn::BiLstm::from_store(ps, "tssn.bilstm", cfg.lstm_hidden);
    t.attn_ = nn::MultiHeadAttention::from_store(ps, "tssn.attn", cfg.attn_heads,
                                                 2 * cfg.lstm_hidden);
    return t;
}

Var Tssn::stgc_block(const Var& features, const KnnGraph& graph, std::size_t block_index,
                     std::size_t t_len) const {
    // h'_i = max_j MLP([h_i, h_j - h_i]), then temporal conv per joint
    Var edges = edge_features(features, graph.neighbors, graph.k);
    Var spatial = group_max(relu(edge_mlps_[block_index](edges)), graph.k);
    Var temporal = conv1d(spatial, t_len, kNumHandJoints, temporal_w_[block_index],
                          temporal_b_[block_index], /*causal=*/false);
    return relu(temporal);
}

Var Tssn::aggregate_multiscale(const std::vector<Var>& block_outputs) {
    if (block_outputs.empty()) throw ShapeError("aggregate_multiscale: no blocks");
    Var out = block_outputs[0];
    for (std::size_t b = 1; b < block_outputs.size(); ++b)
        out = concat_cols(out, block_outputs[b]);
    return out;
}

std::pair<Var, Var> Tssn::forward(const Tensor& shape_stream, std::size_t t_len) const {
    KnnGraph graph = knn_graph(shape_stream, t_len, config.k);
    Var x = constant(shape_stream);
    std::vector<Var> block_outputs;
    Var h = x;
    for (std::size_t b = 0; b < config.block_channels.size(); ++b) {
        h = stgc_block(h, graph, b, t_len);
        block_outputs.push_back(h);
    }
    Var multi = aggregate_multiscale(block_outputs);   // (T*21) x sumC
    Var pooled = group_mean(multi, kNumHandJoints);    // T x sumC
    Var seq = bilstm_(pooled);                         // T x 2H
    Var attn_out = attn_(seq, seq);                    // T x d_s
    Var fs_seq = attn_out;
    Var fs = mean_rows(fs_seq);                        // 1 x d_s
    return {fs_seq, fs};
}

}  // namespace dslnet
