#include <benchmark/benchmark.h>

#include "dslnet/flops.hpp"
#include "dslnet/pipeline.hpp"

using namespace dslnet;

namespace {

ModelConfig small_model(std::size_t num_classes) {
    ModelConfig m;
    m.tssn.k = 3;
    m.tssn.block_channels = {8, 16, 16};
    m.tssn.lstm_hidden = 16;
    m.tssn.attn_heads = 2;
    m.tssn.out_dim = 32;
    m.ftde.conv_channels = {12, 12};
    m.ftde.lstm_hidden = 12;
    m.ftde.out_dim = 32;
    m.finsler.phi_hidden = 16;
    m.fusion.attn_heads = 2;
    m.fusion.proj_dim = 16;
    m.fusion.num_classes = num_classes;
    return m;
}

void bm_forward(benchmark::State& state) {
    ModelConfig cfg = small_model(10);
    DslNet model(cfg, 7);
    SkeletonSequence seq = synth_generate({1, 1, (std::size_t)state.range(0)}, 0.01, 3);
    SkeletonSequence norm = normalize_coords(seq);
    for (auto _ : state) {
        auto fr = model.forward(norm);
        benchmark::DoNotOptimize(fr.logits->value[0]);
    }
}
BENCHMARK(bm_forward)->Arg(20)->Arg(40)->Arg(80);

void bm_forward_backward(benchmark::State& state) {
    ModelConfig cfg = small_model(10);
    DslNet model(cfg, 7);
    SkeletonSequence seq = synth_generate({1, 1, (std::size_t)state.range(0)}, 0.01, 3);
    SkeletonSequence norm = normalize_coords(seq);
    for (auto _ : state) {
        model.params().zero_grad();
        auto fr = model.forward(norm);
        auto loss = model.loss(fr, 3);
        ad::backward(loss);
        benchmark::DoNotOptimize(loss->value[0]);
    }
}
BENCHMARK(bm_forward_backward)->Arg(20)->Arg(40);

void bm_knn_graph(benchmark::State& state) {
    SkeletonSequence seq = synth_generate({2, 3, 40}, 0.05, 11);
    Tensor stream = to_wrist_frame(normalize_coords(seq));
    for (auto _ : state) {
        KnnGraph g = knn_graph(stream, seq.t_len, 4);
        benchmark::DoNotOptimize(g.neighbors.data());
    }
}
BENCHMARK(bm_knn_graph);

void bm_sinkhorn(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    Tensor cost(8, 40);
    for (auto& v : cost.vec()) v = u(rng);
    for (auto _ : state) {
        TransportPlan plan = sinkhorn_align(cost, 0.05, 500, 1e-8);
        benchmark::DoNotOptimize(plan.gamma[0]);
    }
}
BENCHMARK(bm_sinkhorn);

}  // namespace

BENCHMARK_MAIN();
