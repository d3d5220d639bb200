#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "dslnet/tensor.hpp"

namespace dslnet::ad {

// Reverse-mode tape node. Forward ops allocate nodes eagerly; backward() walks
// the graph once in reverse topological order and accumulates into grad.
struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // adds into parents' grads
    bool requires_grad = false;
    const char* op = "leaf";
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var param(Tensor value);  // requires_grad = true

// Seeds grad of `root` (must be 1x1) with 1 and back-propagates. Each node's
// backward closure runs exactly once.
void backward(const Var& root);
void zero_grad_graph(const Var& root);

// ---- primitives -----------------------------------------------------------

Var add(const Var& a, const Var& b);          // same shape
Var sub(const Var& a, const Var& b);          // same shape
Var mul(const Var& a, const Var& b);          // elementwise, same shape
Var div(const Var& a, const Var& b);          // elementwise; b may be 1x1
Var add_rowvec(const Var& x, const Var& b);   // x: NxC, b: 1xC
Var scale(const Var& a, double s);
Var add_const(const Var& a, double c);

// C = op(A) op(B) with optional transposes, via BLAS.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);
Var slice_rows(const Var& a, std::size_t r0, std::size_t r1);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var flip_rows(const Var& a);

Var sum_all(const Var& a);     // -> 1x1
Var mean_all(const Var& a);    // -> 1x1
Var mean_rows(const Var& a);   // NxC -> 1xC (mean over rows)
Var sum_rows(const Var& a);    // NxC -> 1xC

Var tanh_(const Var& a);
Var sigmoid_(const Var& a);
Var relu(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);    // input must be positive
Var sqrt_(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);

// Train-only inverted dropout; mask is constant w.r.t. the gradient.
Var dropout(const Var& a, double rate, bool train, std::mt19937_64& rng);

// 1-D convolution over interleaved sequences. x is (T*J)xCin laid out
// frame-major (row t*J + j), w is (K*Cin)xCout, b is 1xCout. causal=true pads
// on the left only; otherwise symmetric same-padding.
Var conv1d(const Var& x, std::size_t t_len, std::size_t groups, const Var& w,
           const Var& b, bool causal);

// Edge features for graph convolution: x is NxC, neighbor_idx has N*k entries
// (neighbors of node i at [i*k, i*k+k)). Output (N*k)x2C rows [x_i, x_j - x_i].
Var edge_features(const Var& x, const std::vector<int>& neighbor_idx, std::size_t k);

// Max over each contiguous group of k rows: (N*k)xC -> NxC.
Var group_max(const Var& x, std::size_t k);
// Mean over each contiguous group of k rows: (N*k)xC -> NxC.
Var group_mean(const Var& x, std::size_t k);

Var gather_rows(const Var& x, const std::vector<int>& idx);

// out[i] = base[i]^alpha with 0^alpha := 0. base is a constant Nx1 column of
// nonnegative values, alpha a 1x1 variable.
Var pow_const_base(const Var& base, const Var& alpha);

// Scales row t of x by s[t]: x is TxC, s is Tx1.
Var row_scale(const Var& x, const Var& s);

Var dot(const Var& a, const Var& b);   // flattened inner product -> 1x1
Var norm2(const Var& a);               // Euclidean norm of all elements -> 1x1
// dot(a,b) / (|a||b| + guard); ~0 when either argument vanishes.
Var cosine_similarity(const Var& a, const Var& b, double guard = 1e-12);

Var pick(const Var& logits, std::size_t index);  // 1xC -> 1x1
Var cross_entropy(const Var& logits, std::size_t label);

}  // namespace dslnet::ad
