#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dslnet/autodiff.hpp"
#include "dslnet/grad_check.hpp"
#include "dslnet/nn.hpp"

using namespace dslnet;
using namespace dslnet::ad;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(r, c);
    for (auto& v : t.vec()) v = dist(rng);
    return t;
}

// Finite-difference oracle over every parameter of a scalar expression.
double fd_max_rel_err(const std::function<Var()>& f, nn::ParamStore& ps,
                      double eps = 1e-5) {
    return grad_check(f, ps, eps).max_rel_err;
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
    Var x = constant(Tensor::full(1, 4, 3.7));
    Var y = softmax_rows(x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y->value[i] == doctest::Approx(0.25));
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        Var x = constant(random_tensor(3, 7, rng, -20.0, 20.0));
        Var y = softmax_rows(x);
        for (std::size_t r = 0; r < 3; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) {
                CHECK(y->value(r, c) >= 0.0);
                s += y->value(r, c);
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul backward: dL/dA = 1s * B^T") {
    std::mt19937_64 rng(1);
    nn::ParamStore ps;
    Var a = ps.add("a", random_tensor(2, 3, rng));
    Var b = ps.add("b", random_tensor(3, 4, rng));
    Var loss = sum_all(matmul(a, b));
    ps.zero_grad();
    backward(loss);
    // dL/dA[i,k] = sum_j B[k,j]
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
            double expect = 0.0;
            for (std::size_t j = 0; j < 4; ++j) expect += b->value(k, j);
            CHECK(a->grad(i, k) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("conv1d with identity kernel K=1 is the identity") {
    std::mt19937_64 rng(2);
    // Cin = Cout = 2, weight = I
    Tensor w(2, 2);
    w(0, 0) = 1.0;
    w(1, 1) = 1.0;
    Var x = constant(random_tensor(10, 2, rng));
    Var out = conv1d(x, 10, 1, constant(w), constant(Tensor(1, 2)), true);
    for (std::size_t i = 0; i < x->value.numel(); ++i)
        CHECK(out->value[i] == doctest::Approx(x->value[i]));
}

TEST_CASE("causal conv1d never looks ahead") {
    std::mt19937_64 rng(3);
    nn::ParamStore ps;
    Var w = ps.add("w", random_tensor(3 * 2, 4, rng));
    Var b = ps.add("b", random_tensor(1, 4, rng));
    Tensor x1 = random_tensor(12, 2, rng);
    Tensor x2 = x1;
    x2(8, 0) += 5.0;  // change frame 8
    Var y1 = conv1d(constant(x1), 12, 1, w, b, true);
    Var y2 = conv1d(constant(x2), 12, 1, w, b, true);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(y1->value(t, c) == doctest::Approx(y2->value(t, c)));
    // and the change is visible at t >= 8
    bool differs = false;
    for (std::size_t t = 8; t < 12; ++t)
        for (std::size_t c = 0; c < 4; ++c)
            if (y1->value(t, c) != y2->value(t, c)) differs = true;
    CHECK(differs);
}

TEST_CASE("every primitive passes gradient check on random shapes") {
    std::mt19937_64 rng(7);
    nn::ParamStore ps;
    Var a = ps.add("a", random_tensor(3, 4, rng));
    Var b = ps.add("b", random_tensor(3, 4, rng));
    Var m = ps.add("m", random_tensor(4, 5, rng));
    Var bias = ps.add("bias", random_tensor(1, 4, rng));
    Var gain = ps.add("gain", random_tensor(1, 4, rng, 0.5, 1.5));
    Var cw = ps.add("cw", random_tensor(3 * 4, 4, rng));
    Var alpha = ps.add("alpha", Tensor::scalar(1.3));
    Tensor base = random_tensor(6, 1, rng, 0.1, 2.0);
    base(2, 0) = 0.0;  // exercise the 0^alpha = 0 branch

    auto f = [&]() {
        Var t1 = mul(tanh_(a), sigmoid_(b));
        Var t2 = add_rowvec(relu(add(a, b)), bias);
        Var t3 = matmul(t2, m);                                   // 3x5
        Var t4 = layer_norm_rows(t1, gain, bias);
        Var t5 = softmax_rows(concat_cols(t1, t4));               // 3x8
        Var t6 = conv1d(t2, 3, 1, cw, bias, false);               // 3x4
        Var t7 = group_max(exp_(scale(concat_rows(t5, flip_rows(t5)), 0.3)), 2);
        Var t8 = group_mean(square(t6), 3);
        Var t9 = pow_const_base(constant(base), alpha);
        Var t10 = row_scale(slice_rows(t3, 0, 3), slice_cols(t3, 0, 1));
        Var c = cosine_similarity(mean_rows(t3), sum_rows(t10));
        return add(add(mean_all(t7), mean_all(t8)),
                   add(add(sum_all(t9), mean_all(t10)),
                       add(c, add(mean_all(softplus(t3)),
                                  mean_all(log_(add_const(square(t5), 0.1)))))));
    };
    CHECK(fd_max_rel_err(f, ps) < 1e-6);
}

TEST_CASE("edge_features and gather_rows pass gradient check") {
    std::mt19937_64 rng(11);
    nn::ParamStore ps;
    Var x = ps.add("x", random_tensor(4, 3, rng));
    std::vector<int> nbr = {1, 2, 0, 3, 3, 1, 0, 2};  // k = 2
    std::vector<int> gather = {2, 0, 3, 3};
    auto f = [&]() {
        Var e = edge_features(x, nbr, 2);          // 8x6: [x_i, x_j - x_i]
        Var g = gather_rows(tanh_(x), gather);     // 4x3
        return add(mean_all(square(e)), sum_all(g));
    };
    CHECK(fd_max_rel_err(f, ps) < 1e-6);
    // spot-check the edge layout for node 0, neighbor 1
    Var e = edge_features(x, nbr, 2);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(e->value(0, c) == doctest::Approx(x->value(0, c)));
        CHECK(e->value(0, 3 + c) == doctest::Approx(x->value(1, c) - x->value(0, c)));
    }
}

TEST_CASE("shared subexpressions accumulate gradients additively") {
    nn::ParamStore ps;
    Var w = ps.add("w", Tensor::scalar(0.7));
    Var shared = tanh_(w);
    Var loss = add(mul(shared, shared), scale(shared, 2.0));  // y^2 + 2y
    ps.zero_grad();
    backward(loss);
    double y = std::tanh(0.7);
    double expect = (2.0 * y + 2.0) * (1.0 - y * y);
    CHECK(w->grad[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("grad_check: f(w) = sum(w^2) has gradient 2w") {
    std::mt19937_64 rng(9);
    nn::ParamStore ps;
    Var w = ps.add("w", random_tensor(2, 3, rng));
    auto f = [&]() { return sum_all(square(w)); };
    auto report = grad_check(f, ps, 1e-5);
    CHECK(report.max_rel_err < 1e-8);
    for (std::size_t i = 0; i < w->value.numel(); ++i)
        CHECK(w->grad[i] == doctest::Approx(2.0 * w->value[i]));
}

TEST_CASE("grad_check: constant function has zero gradients") {
    nn::ParamStore ps;
    ps.add("w", Tensor::scalar(0.4));
    auto f = [&]() { return constant(Tensor::scalar(3.0)); };
    auto report = grad_check(f, ps, 1e-5);
    CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("grad_check rejects non-deterministic functions") {
    nn::ParamStore ps;
    ps.add("w", Tensor::scalar(0.4));
    int calls = 0;
    auto f = [&]() { return constant(Tensor::scalar((double)++calls)); };
    CHECK_THROWS_AS(grad_check(f, ps, 1e-5), NonDeterministicFunction);
}

TEST_CASE("cross entropy matches -log softmax at the label") {
    Tensor logits(1, 3);
    logits[0] = 1.0;
    logits[1] = 2.0;
    logits[2] = 0.5;
    Var l = constant(logits);
    Var ce = cross_entropy(l, 1);
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
    CHECK(ce->value[0] == doctest::Approx(-std::log(std::exp(2.0) / z)));
}

TEST_CASE("shape errors carry both shapes") {
    Var a = constant(Tensor(2, 3));
    Var b = constant(Tensor(3, 3));
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("dropout is identity in eval mode and masks in train mode") {
    std::mt19937_64 rng(5);
    Var x = constant(Tensor::full(10, 10, 1.0));
    Var eval_out = dropout(x, 0.5, false, rng);
    CHECK(eval_out.get() == x.get());
    Var train_out = dropout(x, 0.5, true, rng);
    int zeros = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        if (train_out->value[i] == 0.0) ++zeros;
        else CHECK(train_out->value[i] == doctest::Approx(2.0));
    }
    CHECK(zeros > 20);
    CHECK(zeros < 80);
}
