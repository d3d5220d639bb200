#include "dslnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <cblas.h>

namespace dslnet::ad {

namespace {

Var make_node(Tensor value, std::vector<Var> parents, const char* op,
              std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->grad = Tensor(n->value.rows(), n->value.cols());
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ShapeError(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                         " vs " + b->value.shape_str());
}

void topo_sort(const Var& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && visited.insert(p).second)
                stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
}

}  // namespace

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->grad = Tensor(n->value.rows(), n->value.cols());
    return n;
}

Var param(Tensor value) {
    auto n = constant(std::move(value));
    n->requires_grad = true;
    n->op = "param";
    return n;
}

void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw ShapeError("backward: root must be scalar, got " + root->value.shape_str());
    std::vector<Node*> order;
    topo_sort(root, order);
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

void zero_grad_graph(const Var& root) {
    std::vector<Node*> order;
    topo_sort(root, order);
    for (Node* n : order) std::fill(n->grad.vec().begin(), n->grad.vec().end(), 0.0);
}

// ---- arithmetic -------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make_node(std::move(out), {a, b}, "add", [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            a->grad[i] += self.grad[i];
            b->grad[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make_node(std::move(out), {a, b}, "sub", [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            a->grad[i] += self.grad[i];
            b->grad[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return make_node(std::move(out), {a, b}, "mul", [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            a->grad[i] += self.grad[i] * b->value[i];
            b->grad[i] += self.grad[i] * a->value[i];
        }
    });
}

Var div(const Var& a, const Var& b) {
    if (b->value.numel() == 1) {
        Tensor out = a->value;
        double d = b->value[0];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= d;
        return make_node(std::move(out), {a, b}, "div", [a, b](Node& self) {
            double d = b->value[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.numel(); ++i) {
                a->grad[i] += self.grad[i] / d;
                acc += self.grad[i] * a->value[i];
            }
            b->grad[0] -= acc / (d * d);
        });
    }
    require_same_shape(a, b, "div");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= b->value[i];
    return make_node(std::move(out), {a, b}, "div", [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            double d = b->value[i];
            a->grad[i] += self.grad[i] / d;
            b->grad[i] -= self.grad[i] * a->value[i] / (d * d);
        }
    });
}

Var add_rowvec(const Var& x, const Var& b) {
    if (b->value.rows() != 1 || b->value.cols() != x->value.cols())
        throw ShapeError("add_rowvec: " + x->value.shape_str() + " + " + b->value.shape_str());
    Tensor out = x->value;
    std::size_t C = out.cols();
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) += b->value[c];
    return make_node(std::move(out), {x, b}, "add_rowvec", [x, b](Node& self) {
        std::size_t C = self.grad.cols();
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < C; ++c) {
                x->grad(r, c) += self.grad(r, c);
                b->grad[c] += self.grad(r, c);
            }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    for (auto& v : out.vec()) v *= s;
    return make_node(std::move(out), {a}, "scale", [a, s](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * s;
    });
}

Var add_const(const Var& a, double c) {
    Tensor out = a->value;
    for (auto& v : out.vec()) v += c;
    return make_node(std::move(out), {a}, "add_const", [a](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    });
}

// ---- matmul -----------------------------------------------------------------

namespace {
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const Tensor& A, const Tensor& B, double beta, Tensor& C) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                (int)m, (int)n, (int)k, alpha, A.data(), (int)A.cols(), B.data(),
                (int)B.cols(), beta, C.data(), (int)C.cols());
}
}  // namespace

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
    std::size_t m = trans_a ? a->value.cols() : a->value.rows();
    std::size_t ka = trans_a ? a->value.rows() : a->value.cols();
    std::size_t kb = trans_b ? b->value.cols() : b->value.rows();
    std::size_t n = trans_b ? b->value.rows() : b->value.cols();
    if (ka != kb)
        throw ShapeError("matmul: inner dims " + a->value.shape_str() + " * " +
                         b->value.shape_str());
    Tensor out(m, n);
    gemm(trans_a, trans_b, m, n, ka, 1.0, a->value, b->value, 0.0, out);
    return make_node(std::move(out), {a, b}, "matmul",
                     [a, b, trans_a, trans_b, m, n, ka](Node& self) {
        // dA and dB with the four transpose cases folded into gemm flags.
        if (a->requires_grad) {
            if (!trans_a)
                gemm(false, !trans_b, m, ka, n, 1.0, self.grad, b->value, 1.0, a->grad);
            else
                gemm(trans_b, true, ka, m, n, 1.0, b->value, self.grad, 1.0, a->grad);
        }
        if (b->requires_grad) {
            if (!trans_b)
                gemm(!trans_a, false, ka, n, m, 1.0, a->value, self.grad, 1.0, b->grad);
            else
                gemm(true, trans_a, n, ka, m, 1.0, self.grad, a->value, 1.0, b->grad);
        }
    });
}

// ---- structure --------------------------------------------------------------

Var concat_cols(const Var& a, const Var& b) {
    if (a->value.rows() != b->value.rows())
        throw ShapeError("concat_cols: row mismatch " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
    std::size_t R = a->value.rows(), Ca = a->value.cols(), Cb = b->value.cols();
    Tensor out(R, Ca + Cb);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < Ca; ++c) out(r, c) = a->value(r, c);
        for (std::size_t c = 0; c < Cb; ++c) out(r, Ca + c) = b->value(r, c);
    }
    return make_node(std::move(out), {a, b}, "concat_cols", [a, b, Ca, Cb](Node& self) {
        for (std::size_t r = 0; r < self.grad.rows(); ++r) {
            for (std::size_t c = 0; c < Ca; ++c) a->grad(r, c) += self.grad(r, c);
            for (std::size_t c = 0; c < Cb; ++c) b->grad(r, c) += self.grad(r, Ca + c);
        }
    });
}

Var concat_rows(const Var& a, const Var& b) {
    if (a->value.cols() != b->value.cols())
        throw ShapeError("concat_rows: col mismatch " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
    std::size_t Ra = a->value.rows(), Rb = b->value.rows(), C = a->value.cols();
    Tensor out(Ra + Rb, C);
    std::copy(a->value.vec().begin(), a->value.vec().end(), out.vec().begin());
    std::copy(b->value.vec().begin(), b->value.vec().end(), out.vec().begin() + Ra * C);
    return make_node(std::move(out), {a, b}, "concat_rows", [a, b, Ra, C](Node& self) {
        for (std::size_t i = 0; i < Ra * C; ++i) a->grad[i] += self.grad[i];
        for (std::size_t i = 0; i < b->grad.numel(); ++i) b->grad[i] += self.grad[Ra * C + i];
    });
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
    if (c1 > a->value.cols() || c0 >= c1)
        throw ShapeError("slice_cols: bad range on " + a->value.shape_str());
    std::size_t R = a->value.rows(), C = c1 - c0;
    Tensor out(R, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = a->value(r, c0 + c);
    return make_node(std::move(out), {a}, "slice_cols", [a, c0](Node& self) {
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < self.grad.cols(); ++c)
                a->grad(r, c0 + c) += self.grad(r, c);
    });
}

Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
    if (r1 > a->value.rows() || r0 >= r1)
        throw ShapeError("slice_rows: bad range on " + a->value.shape_str());
    std::size_t R = r1 - r0, C = a->value.cols();
    Tensor out(R, C);
    std::copy(a->value.vec().begin() + r0 * C, a->value.vec().begin() + r1 * C,
              out.vec().begin());
    return make_node(std::move(out), {a}, "slice_rows", [a, r0, C](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            a->grad[r0 * C + i] += self.grad[i];
    });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a->value.numel())
        throw ShapeError("reshape: numel mismatch " + a->value.shape_str());
    Tensor out(rows, cols, a->value.vec());
    return make_node(std::move(out), {a}, "reshape", [a](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    });
}

Var flip_rows(const Var& a) {
    std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out(R, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = a->value(R - 1 - r, c);
    return make_node(std::move(out), {a}, "flip_rows", [a, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                a->grad(R - 1 - r, c) += self.grad(r, c);
    });
}

// ---- reductions -------------------------------------------------------------

Var sum_all(const Var& a) {
    double s = 0.0;
    for (double v : a->value.vec()) s += v;
    return make_node(Tensor::scalar(s), {a}, "sum_all", [a](Node& self) {
        double g = self.grad[0];
        for (std::size_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
    });
}

Var mean_all(const Var& a) {
    return scale(sum_all(a), 1.0 / (double)a->value.numel());
}

Var sum_rows(const Var& a) {
    std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out(1, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out[c] += a->value(r, c);
    return make_node(std::move(out), {a}, "sum_rows", [a, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) a->grad(r, c) += self.grad[c];
    });
}

Var mean_rows(const Var& a) {
    return scale(sum_rows(a), 1.0 / (double)a->value.rows());
}

// ---- pointwise --------------------------------------------------------------

namespace {
template <typename F, typename G>
Var pointwise(const Var& a, const char* op, F fwd, G dfwd_from_out) {
    Tensor out = a->value;
    for (auto& v : out.vec()) v = fwd(v);
    return make_node(std::move(out), {a}, op, [a, dfwd_from_out](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            a->grad[i] += self.grad[i] * dfwd_from_out(self.value[i], a->value[i]);
    });
}
}  // namespace

Var tanh_(const Var& a) {
    return pointwise(a, "tanh", [](double v) { return std::tanh(v); },
                     [](double y, double) { return 1.0 - y * y; });
}

Var sigmoid_(const Var& a) {
    return pointwise(a, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                     [](double y, double) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
    return pointwise(a, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
                     [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp_(const Var& a) {
    return pointwise(a, "exp", [](double v) { return std::exp(v); },
                     [](double y, double) { return y; });
}

Var log_(const Var& a) {
    return pointwise(a, "log", [](double v) { return std::log(v); },
                     [](double, double x) { return 1.0 / x; });
}

Var sqrt_(const Var& a) {
    return pointwise(a, "sqrt", [](double v) { return std::sqrt(v); },
                     [](double y, double) { return 0.5 / y; });
}

Var softplus(const Var& a) {
    // log(1+exp(x)) computed stably; derivative is sigmoid(x).
    return pointwise(a, "softplus",
                     [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
                     [](double, double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var square(const Var& a) {
    return pointwise(a, "square", [](double v) { return v * v; },
                     [](double, double x) { return 2.0 * x; });
}

// ---- softmax / normalization --------------------------------------------------

Var softmax_rows(const Var& a) {
    std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out(R, C);
    for (std::size_t r = 0; r < R; ++r) {
        double mx = a->value(r, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a->value(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += (out(r, c) = std::exp(a->value(r, c) - mx));
        for (std::size_t c = 0; c < C; ++c) out(r, c) /= z;
    }
    return make_node(std::move(out), {a}, "softmax_rows", [a, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) s += self.grad(r, c) * self.value(r, c);
            for (std::size_t c = 0; c < C; ++c)
                a->grad(r, c) += self.value(r, c) * (self.grad(r, c) - s);
        }
    });
}

Var log_softmax_rows(const Var& a) {
    std::size_t R = a->value.rows(), C = a->value.cols();
    Tensor out(R, C);
    for (std::size_t r = 0; r < R; ++r) {
        double mx = a->value(r, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a->value(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(a->value(r, c) - mx);
        double lz = mx + std::log(z);
        for (std::size_t c = 0; c < C; ++c) out(r, c) = a->value(r, c) - lz;
    }
    return make_node(std::move(out), {a}, "log_softmax_rows", [a, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) s += self.grad(r, c);
            for (std::size_t c = 0; c < C; ++c)
                a->grad(r, c) += self.grad(r, c) - std::exp(self.value(r, c)) * s;
        }
    });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
    std::size_t R = a->value.rows(), C = a->value.cols();
    if (gain->value.cols() != C || bias->value.cols() != C)
        throw ShapeError("layer_norm_rows: gain/bias must be 1x" + std::to_string(C));
    Tensor out(R, C);
    Tensor mu(R, 1), istd(R, 1);
    for (std::size_t r = 0; r < R; ++r) {
        double m = 0.0;
        for (std::size_t c = 0; c < C; ++c) m += a->value(r, c);
        m /= (double)C;
        double var = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            double d = a->value(r, c) - m;
            var += d * d;
        }
        var /= (double)C;
        mu(r, 0) = m;
        istd(r, 0) = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < C; ++c)
            out(r, c) = (a->value(r, c) - m) * istd(r, 0) * gain->value[c] + bias->value[c];
    }
    return make_node(std::move(out), {a, gain, bias}, "layer_norm",
                     [a, gain, bias, mu, istd, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r) {
            double is = istd(r, 0), m = mu(r, 0);
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                double xhat = (a->value(r, c) - m) * is;
                double gl = self.grad(r, c) * gain->value[c];
                sum_g += gl;
                sum_gx += gl * xhat;
                gain->grad[c] += self.grad(r, c) * xhat;
                bias->grad[c] += self.grad(r, c);
            }
            for (std::size_t c = 0; c < C; ++c) {
                double xhat = (a->value(r, c) - m) * is;
                double gl = self.grad(r, c) * gain->value[c];
                a->grad(r, c) += is * (gl - (sum_g + xhat * sum_gx) / (double)C);
            }
        }
    });
}

Var dropout(const Var& a, double rate, bool train, std::mt19937_64& rng) {
    if (!train || rate <= 0.0) return a;
    if (rate >= 1.0) throw ShapeError("dropout: rate must be < 1");
    std::bernoulli_distribution keep(1.0 - rate);
    Tensor mask(a->value.rows(), a->value.cols());
    double inv = 1.0 / (1.0 - rate);
    for (auto& v : mask.vec()) v = keep(rng) ? inv : 0.0;
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
    return make_node(std::move(out), {a}, "dropout", [a, mask](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            a->grad[i] += self.grad[i] * mask[i];
    });
}

// ---- convolution --------------------------------------------------------------

Var conv1d(const Var& x, std::size_t t_len, std::size_t groups, const Var& w,
           const Var& b, bool causal) {
    std::size_t J = groups;
    if (x->value.rows() != t_len * J)
        throw ShapeError("conv1d: rows " + x->value.shape_str() + " != T*J");
    std::size_t Cin = x->value.cols();
    if (w->value.rows() % Cin != 0)
        throw ShapeError("conv1d: weight rows not multiple of Cin");
    std::size_t K = w->value.rows() / Cin;
    std::size_t Cout = w->value.cols();
    if (b->value.rows() != 1 || b->value.cols() != Cout)
        throw ShapeError("conv1d: bias must be 1xCout");
    // tap offset: causal uses frames t-K+1..t, same-padding centers the kernel
    long off = causal ? -(long)K + 1 : -((long)K - 1) / 2;
    Tensor out(t_len * J, Cout);
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t k = 0; k < K; ++k) {
            long ts = (long)t + off + (long)k;
            if (ts < 0 || ts >= (long)t_len) continue;
            for (std::size_t j = 0; j < J; ++j) {
                const double* xr = &x->value((std::size_t)ts * J + j, 0);
                double* orow = &out(t * J + j, 0);
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                    double xv = xr[ci];
                    if (xv == 0.0) continue;
                    const double* wr = &w->value(k * Cin + ci, 0);
                    for (std::size_t co = 0; co < Cout; ++co) orow[co] += xv * wr[co];
                }
            }
        }
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < Cout; ++c) out(r, c) += b->value[c];
    return make_node(std::move(out), {x, w, b}, "conv1d",
                     [x, w, b, t_len, J, Cin, K, Cout, off](Node& self) {
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                long ts = (long)t + off + (long)k;
                if (ts < 0 || ts >= (long)t_len) continue;
                for (std::size_t j = 0; j < J; ++j) {
                    const double* g = &self.grad(t * J + j, 0);
                    const double* xr = &x->value((std::size_t)ts * J + j, 0);
                    double* xg = &x->grad((std::size_t)ts * J + j, 0);
                    for (std::size_t ci = 0; ci < Cin; ++ci) {
                        const double* wr = &w->value(k * Cin + ci, 0);
                        double* wg = &w->grad(k * Cin + ci, 0);
                        double acc = 0.0;
                        for (std::size_t co = 0; co < Cout; ++co) {
                            acc += g[co] * wr[co];
                            wg[co] += g[co] * xr[ci];
                        }
                        xg[ci] += acc;
                    }
                }
            }
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < Cout; ++c) b->grad[c] += self.grad(r, c);
    });
}

// ---- graph ops ------------------------------------------------------------------

Var edge_features(const Var& x, const std::vector<int>& neighbor_idx, std::size_t k) {
    std::size_t N = x->value.rows(), C = x->value.cols();
    if (neighbor_idx.size() != N * k)
        throw ShapeError("edge_features: index count != N*k");
    Tensor out(N * k, 2 * C);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t r = 0; r < k; ++r) {
            std::size_t e = i * k + r;
            int j = neighbor_idx[e];
            for (std::size_t c = 0; c < C; ++c) {
                out(e, c) = x->value(i, c);
                out(e, C + c) = x->value((std::size_t)j, c) - x->value(i, c);
            }
        }
    auto idx = neighbor_idx;  // keep a copy alive in the closure
    return make_node(std::move(out), {x}, "edge_features", [x, idx, k](Node& self) {
        std::size_t C = x->value.cols(), N = x->value.rows();
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t r = 0; r < k; ++r) {
                std::size_t e = i * k + r;
                int j = idx[e];
                for (std::size_t c = 0; c < C; ++c) {
                    x->grad(i, c) += self.grad(e, c) - self.grad(e, C + c);
                    x->grad((std::size_t)j, c) += self.grad(e, C + c);
                }
            }
    });
}

Var group_max(const Var& x, std::size_t k) {
    std::size_t E = x->value.rows(), C = x->value.cols();
    if (k == 0 || E % k != 0) throw ShapeError("group_max: rows not divisible by k");
    std::size_t N = E / k;
    Tensor out(N, C);
    std::vector<int> argmax(N * C);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            double best = x->value(i * k, c);
            int br = 0;
            for (std::size_t r = 1; r < k; ++r)
                if (x->value(i * k + r, c) > best) {
                    best = x->value(i * k + r, c);
                    br = (int)r;
                }
            out(i, c) = best;
            argmax[i * C + c] = br;
        }
    return make_node(std::move(out), {x}, "group_max", [x, argmax, k](Node& self) {
        std::size_t N = self.grad.rows(), C = self.grad.cols();
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < C; ++c)
                x->grad(i * k + (std::size_t)argmax[i * C + c], c) += self.grad(i, c);
    });
}

Var group_mean(const Var& x, std::size_t k) {
    std::size_t E = x->value.rows(), C = x->value.cols();
    if (k == 0 || E % k != 0) throw ShapeError("group_mean: rows not divisible by k");
    std::size_t N = E / k;
    Tensor out(N, C);
    double inv = 1.0 / (double)k;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < C; ++c) out(i, c) += x->value(i * k + r, c) * inv;
    return make_node(std::move(out), {x}, "group_mean", [x, k, inv](Node& self) {
        std::size_t N = self.grad.rows(), C = self.grad.cols();
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t r = 0; r < k; ++r)
                for (std::size_t c = 0; c < C; ++c)
                    x->grad(i * k + r, c) += self.grad(i, c) * inv;
    });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
    std::size_t C = x->value.cols();
    Tensor out(idx.size(), C);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = x->value((std::size_t)idx[r], c);
    auto ic = idx;
    return make_node(std::move(out), {x}, "gather_rows", [x, ic](Node& self) {
        std::size_t C = self.grad.cols();
        for (std::size_t r = 0; r < ic.size(); ++r)
            for (std::size_t c = 0; c < C; ++c)
                x->grad((std::size_t)ic[r], c) += self.grad(r, c);
    });
}

// ---- misc -----------------------------------------------------------------------

Var pow_const_base(const Var& base, const Var& alpha) {
    if (base->requires_grad)
        throw ShapeError("pow_const_base: base must be constant");
    if (alpha->value.numel() != 1)
        throw ShapeError("pow_const_base: alpha must be scalar");
    double al = alpha->value[0];
    Tensor out(base->value.rows(), base->value.cols());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = base->value[i];
        out[i] = v > 0.0 ? std::pow(v, al) : 0.0;
    }
    return make_node(std::move(out), {base, alpha}, "pow_const_base",
                     [base, alpha](Node& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            double v = base->value[i];
            if (v > 0.0) alpha->grad[0] += self.grad[i] * self.value[i] * std::log(v);
        }
    });
}

Var row_scale(const Var& x, const Var& s) {
    if (s->value.cols() != 1 || s->value.rows() != x->value.rows())
        throw ShapeError("row_scale: s must be Tx1 matching x rows");
    std::size_t R = x->value.rows(), C = x->value.cols();
    Tensor out(R, C);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = x->value(r, c) * s->value(r, 0);
    return make_node(std::move(out), {x, s}, "row_scale", [x, s, R, C](Node& self) {
        for (std::size_t r = 0; r < R; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                x->grad(r, c) += self.grad(r, c) * s->value(r, 0);
                acc += self.grad(r, c) * x->value(r, c);
            }
            s->grad(r, 0) += acc;
        }
    });
}

Var dot(const Var& a, const Var& b) {
    if (a->value.numel() != b->value.numel())
        throw ShapeError("dot: numel mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a->value.numel(); ++i) s += a->value[i] * b->value[i];
    return make_node(Tensor::scalar(s), {a, b}, "dot", [a, b](Node& self) {
        double g = self.grad[0];
        for (std::size_t i = 0; i < a->grad.numel(); ++i) {
            a->grad[i] += g * b->value[i];
            b->grad[i] += g * a->value[i];
        }
    });
}

Var norm2(const Var& a) { return sqrt_(add_const(dot(a, a), 1e-300)); }

Var cosine_similarity(const Var& a, const Var& b, double guard) {
    Var na = norm2(a), nb = norm2(b);
    return div(dot(a, b), add_const(mul(na, nb), guard));
}

Var pick(const Var& logits, std::size_t index) {
    if (logits->value.rows() != 1 || index >= logits->value.cols())
        throw ShapeError("pick: index out of range on " + logits->value.shape_str());
    return make_node(Tensor::scalar(logits->value[index]), {logits}, "pick",
                     [logits, index](Node& self) {
        logits->grad[index] += self.grad[0];
    });
}

Var cross_entropy(const Var& logits, std::size_t label) {
    if (label >= logits->value.cols())
        throw std::out_of_range("cross_entropy: label out of range");
    return scale(pick(log_softmax_rows(logits), label), -1.0);
}

}  // namespace dslnet::ad
