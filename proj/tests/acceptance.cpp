// Acceptance gate: one pass/fail line per criterion, exit status = #failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include "dslnet/checkpoint.hpp"
#include "dslnet/grad_check.hpp"
#include "dslnet/pipeline.hpp"

using namespace dslnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(r, c);
    for (auto& v : t.vec()) v = dist(rng);
    return t;
}

ModelConfig tiny_model(std::size_t num_classes) {
    ModelConfig mc;
    mc.tssn.k = 2;
    mc.tssn.block_channels = {3};
    mc.tssn.temporal_kernel = 3;
    mc.tssn.lstm_hidden = 3;
    mc.tssn.attn_heads = 1;
    mc.tssn.out_dim = 4;
    mc.ftde.conv_channels = {3};
    mc.ftde.conv_kernel = 3;
    mc.ftde.lstm_hidden = 2;
    mc.ftde.out_dim = 4;
    mc.finsler.phi_hidden = 3;
    mc.fusion.attn_heads = 1;
    mc.fusion.proj_dim = 3;
    mc.fusion.num_classes = num_classes;
    return mc;
}

// 10-class desk benchmark: 5 hand shapes x 2 trajectories.
TrainConfig benchmark_config() {
    TrainConfig cfg;
    cfg.synth.num_shapes = 5;
    cfg.synth.num_trajs = 2;
    cfg.synth.train_per_class = 24;
    cfg.synth.test_per_class = 10;
    cfg.synth.frames = 32;
    cfg.synth.noise_sigma = 0.01;
    cfg.model.tssn.k = 3;
    cfg.model.tssn.block_channels = {8, 16};
    cfg.model.tssn.temporal_kernel = 3;
    cfg.model.tssn.lstm_hidden = 8;
    cfg.model.tssn.attn_heads = 2;
    cfg.model.tssn.out_dim = 16;
    cfg.model.ftde.conv_channels = {8};
    cfg.model.ftde.lstm_hidden = 4;
    cfg.model.ftde.out_dim = 16;
    cfg.model.finsler.phi_hidden = 8;
    cfg.model.fusion.attn_heads = 2;
    cfg.model.fusion.proj_dim = 8;
    cfg.model.fusion.alpha_loss = 0.1;
    cfg.batch_size = 8;
    cfg.epochs = 30;
    cfg.seed = 1;
    cfg.schedule.lr_max = 0.007;
    cfg.schedule.lr_min = 7e-5;
    return cfg;
}

// Reduced copy of the benchmark for the 18 ablation runs.
TrainConfig ablation_config(std::uint64_t seed) {
    TrainConfig cfg = benchmark_config();
    cfg.synth.train_per_class = 12;
    cfg.synth.test_per_class = 6;
    cfg.synth.frames = 24;
    cfg.epochs = 25;
    cfg.seed = seed;
    return cfg;
}

bool criterion_gradients() {
    auto t0 = Clock::now();
    // Finite differences need a generic evaluation point: ReLU/max kinks inside
    // the probe interval would corrupt the estimate, so the seed is fixed to an
    // init verified to be kink-free at this step size.
    DslNet model(tiny_model(2), 21);
    std::vector<SkeletonSequence> batch = {
        synth_generate(SynthClassSpec{0, 0, 8}, 0.01, 11),
        synth_generate(SynthClassSpec{1, 1, 8}, 0.01, 12)};
    std::vector<std::size_t> labels = {0, 1};
    auto f = [&]() {
        nn::Var acc;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ForwardResult fr = model.forward(batch[i]);
            nn::Var l = model.loss(fr, labels[i]);
            acc = i == 0 ? l : ad::add(acc, l);
        }
        return ad::scale(acc, 1.0 / (double)batch.size());
    };
    GradCheckReport report = grad_check(f, model.params(), 1e-5);
    double secs = seconds_since(t0);
    bool alpha_seen = false;
    for (const auto& e : report.per_param)
        if (e.name == "ftde.alpha_raw") alpha_seen = true;
    std::printf("    max relative error %.3e over %zu parameters in %.1f s\n",
                report.max_rel_err, report.per_param.size(), secs);
    return report.max_rel_err < 1e-4 && alpha_seen && secs < 300.0;
}

bool criterion_invariances() {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> shift(-10.0, 10.0);
    std::uniform_real_distribution<double> scale_pick(0.5, 2.0);
    const double eps = 1e-6;
    double worst_translation = 0.0, worst_scale_margin = 1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        SynthClassSpec spec{trial % kNumShapeIds, (trial / kNumShapeIds) % kNumTrajIds, 5};
        SkeletonSequence seq = synth_generate(spec, 0.02, (std::uint64_t)trial);
        DualFrameInput base = build_dual_input(seq, eps);

        SkeletonSequence moved = seq;
        double dx = shift(rng), dy = shift(rng);
        for (std::size_t t = 0; t < seq.t_len; ++t)
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                moved.at(t, j, 0) += dx;
                moved.at(t, j, 1) += dy;
            }
        DualFrameInput shifted = build_dual_input(moved, eps);
        for (std::size_t i = 0; i < base.shape_stream.numel(); ++i)
            worst_translation = std::max(
                worst_translation, std::abs(base.shape_stream[i] - shifted.shape_stream[i]));
        for (std::size_t i = 0; i < base.traj_stream.numel(); ++i)
            worst_translation = std::max(
                worst_translation, std::abs(base.traj_stream[i] - shifted.traj_stream[i]));

        double s = scale_pick(rng);
        SkeletonSequence scaled = seq;
        for (std::size_t t = 0; t < seq.t_len; ++t) {
            FaceAnchor a = face_anchor(seq, t);
            for (std::size_t j = 0; j < kNumJoints; ++j)
                for (std::size_t d = 0; d < 2; ++d)
                    scaled.at(t, j, d) = a.center[d] + s * (seq.at(t, j, d) - a.center[d]);
        }
        Tensor traj_scaled = to_facial_frame(scaled, eps);
        for (std::size_t t = 0; t < seq.t_len; ++t) {
            double s_f = face_anchor(seq, t).scale;
            double bound = 10.0 * eps / s_f;
            for (std::size_t d = 0; d < 2; ++d) {
                double b = base.traj_stream(t, d);
                if (std::abs(b) < 1e-9) continue;
                double rel = std::abs(traj_scaled(t, d) - b) / std::abs(b);
                worst_scale_margin = std::min(worst_scale_margin, bound - rel);
                if (rel >= bound) {
                    std::printf("    scale deviation %.3e exceeds bound %.3e\n", rel, bound);
                    return false;
                }
            }
        }
    }
    std::printf("    max translation deviation %.3e; scale margin %.3e\n",
                worst_translation, worst_scale_margin);
    return worst_translation <= 1e-12;
}

bool criterion_transport() {
    std::mt19937_64 rng(31);
    // closed-form consistency
    for (int trial = 0; trial < 100; ++trial) {
        Tensor cost = random_tensor(1, 16, rng, 0.0, 4.0);
        double eps = trial % 2 ? 0.05 : 0.5;
        TransportPlan plan = sinkhorn_align(cost, eps, 200, 1e-6);
        double mx = -1e300;
        for (std::size_t j = 0; j < 16; ++j) mx = std::max(mx, -cost[j] / eps);
        double z = 0.0;
        std::vector<double> want(16);
        for (std::size_t j = 0; j < 16; ++j) z += (want[j] = std::exp(-cost[j] / eps - mx));
        for (std::size_t j = 0; j < 16; ++j)
            if (std::abs(plan.gamma[j] - want[j] / z) > 1e-10) return false;
    }
    // 2x2 against the exact linear program
    Tensor cost(2, 2);
    cost(0, 1) = 1.0;
    cost(1, 0) = 1.0;
    TransportPlan plan = sinkhorn_align(cost, 0.01, 5000, 1e-8);
    double want[4] = {0.5, 0.0, 0.0, 0.5};
    for (std::size_t i = 0; i < 4; ++i)
        if (std::abs(plan.gamma[i] - want[i]) > 1e-3) return false;
    if (!plan.converged) return false;
    // marginal residual at convergence
    for (int trial = 0; trial < 20; ++trial) {
        Tensor c = random_tensor(3, 7, rng, 0.0, 2.0);
        TransportPlan p = sinkhorn_align(c, 0.1, 1000, 1e-7);
        if (!p.converged) return false;
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 7; ++j) s += p.gamma(i, j);
            if (std::abs(s - 1.0 / 3.0) > 1e-6) return false;
        }
        p.validate(1e-6);
    }
    // entropy monotone in epsilon
    auto entropy = [](const Tensor& g) {
        double h = 0.0;
        for (double v : g.vec())
            if (v > 0.0) h -= v * std::log(v);
        return h;
    };
    for (int trial = 0; trial < 50; ++trial) {
        Tensor c = random_tensor(1, 12, rng, 0.0, 2.0);
        double h1 = entropy(sinkhorn_align(c, 1.0, 200, 1e-6).gamma);
        double h2 = entropy(sinkhorn_align(c, 0.1, 200, 1e-6).gamma);
        double h3 = entropy(sinkhorn_align(c, 0.01, 200, 1e-6).gamma);
        if (h1 < h2 - 1e-12 || h2 < h3 - 1e-12) return false;
    }
    return true;
}

bool criterion_energy() {
    nn::ParamStore ps;
    std::mt19937_64 rng(47);
    FtdeConfig cfg;
    cfg.conv_channels = {4};
    cfg.lstm_hidden = 3;
    cfg.out_dim = 4;
    FinslerParams fp;
    Ftde ftde(ps, cfg, fp, 2, rng);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor traj = random_tensor(12, 2, rng);
        auto [e, E] = ftde.finsler_energy(traj);
        double sum_e = 0.0, sum_E = 0.0;
        for (std::size_t t = 0; t < 12; ++t) {
            if (E->value(t, 0) < 0.0) return false;
            sum_e += e->value(t, 0);
            sum_E += E->value(t, 0);
        }
        if (std::abs(sum_E - sum_e / (sum_e + fp.epsilon_energy)) > 1e-12) return false;
    }
    auto [e0, E0] = ftde.finsler_energy(Tensor::full(10, 2, 0.3));
    for (std::size_t t = 0; t < 10; ++t)
        if (e0->value(t, 0) != 0.0 || E0->value(t, 0) != 0.0) return false;
    return true;
}

// shared between criteria 5 and 7
struct BenchmarkRun {
    TrainConfig cfg;
    TrainResult result;
    Dataset data;
    double seconds = 0.0;
    bool ok = false;
};

BenchmarkRun run_benchmark() {
    BenchmarkRun run;
    run.cfg = benchmark_config();
    auto t0 = Clock::now();
    run.result = train(run.cfg);
    run.seconds = seconds_since(t0);
    run.data = build_dataset(run.cfg);
    run.ok = true;
    return run;
}

bool criterion_recognition(const BenchmarkRun& run) {
    std::printf("    test accuracy %.2f%% in %.1f s (10 classes)\n",
                run.result.metrics.test_accuracy, run.seconds);
    return run.result.metrics.test_accuracy >= 95.0 && run.seconds < 600.0;
}

bool criterion_ablation() {
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::map<std::string, std::vector<double>> acc;
    for (std::uint64_t s : seeds) {
        auto rows = ablate(ablation_config(s));
        for (const auto& [name, a] : rows) acc[name].push_back(a);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    double geo = median(acc["dual_geo_ot"]);
    double xattn = median(acc["dual_cross_attn"]);
    double concat = median(acc["dual_concat"]);
    double tssn = median(acc["tssn_only"]);
    double ftde = median(acc["ftde_only"]);
    double global = median(acc["global_norm"]);
    std::printf("    medians: geo_ot %.2f, cross_attn %.2f, concat %.2f, tssn %.2f, "
                "ftde %.2f, global %.2f\n",
                geo, xattn, concat, tssn, ftde, global);
    return geo >= xattn && xattn >= concat && concat > tssn && tssn > ftde && geo > global;
}

bool criterion_robustness(const BenchmarkRun& run) {
    auto rows = robustness(run.result.model, run.data.test, {0.0, 0.05, 0.10, 0.15},
                           run.cfg.seed, 3);
    std::printf("    accuracy by dropout rate:");
    for (const auto& [rate, a] : rows) std::printf(" %.0f%%:%.2f", rate * 100.0, a);
    std::printf("\n");
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].second > rows[i - 1].second + 1e-9) return false;
    double chance = 100.0 / (double)run.data.num_classes;
    return rows.back().second >= 5.0 * chance;
}

bool criterion_determinism() {
    TrainConfig cfg;
    cfg.synth.num_shapes = 2;
    cfg.synth.num_trajs = 1;
    cfg.synth.train_per_class = 4;
    cfg.synth.test_per_class = 2;
    cfg.synth.frames = 10;
    cfg.model = tiny_model(2);
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = 5;
    TrainResult r1 = train(cfg);
    TrainResult r2 = train(cfg);
    if (metrics_to_json(cfg, r1.metrics) != metrics_to_json(cfg, r2.metrics)) return false;

    Dataset data = build_dataset(cfg);
    double before = evaluate_accuracy(r1.model, data.test, 0.0, 0);
    auto path = fs::temp_directory_path() / "dslnet_acceptance_ckpt.bin";
    save_checkpoint(r1.model.params(), path);
    DslNet restored = DslNet::from_params(cfg.model, load_checkpoint(path));
    double after = evaluate_accuracy(restored, data.test, 0.0, 0);
    fs::remove(path);
    return after == before;
}

bool criterion_knn() {
    std::mt19937_64 rng(64);
    std::uniform_int_distribution<int> kpick(1, 10);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor pts = random_tensor(21, 2, rng);
        std::size_t k = (std::size_t)kpick(rng);
        auto got = knn_frame(pts, 21, k);
        // brute-force oracle with the stated tie-break
        for (std::size_t i = 0; i < 21; ++i) {
            std::vector<std::pair<double, int>> all;
            for (std::size_t j = 0; j < 21; ++j) {
                if (j == i) continue;
                double d2 = 0.0;
                for (std::size_t d = 0; d < 2; ++d) {
                    double diff = pts(i, d) - pts(j, d);
                    d2 += diff * diff;
                }
                all.push_back({d2, (int)j});
            }
            std::sort(all.begin(), all.end());
            for (std::size_t r = 0; r < k; ++r)
                if (got[i * k + r] != all[r].second) return false;
        }
    }
    return true;
}

int run(const char* label, bool (*fn)()) {
    bool ok = false;
    try {
        ok = fn();
    } catch (const std::exception& e) {
        std::printf("    exception: %s\n", e.what());
    }
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", label);
    std::fflush(stdout);
    return ok ? 0 : 1;
}

}  // namespace

int main() {
    int failures = 0;
    failures += run("criterion 1: gradient integrity (full model, fp64 finite differences)",
                    criterion_gradients);
    failures += run("criterion 2: frame invariances (translation exact, scale bounded)",
                    criterion_invariances);
    failures += run("criterion 3: optimal transport correctness", criterion_transport);
    failures += run("criterion 4: energy weighting contract", criterion_energy);

    BenchmarkRun bench;
    try {
        bench = run_benchmark();
    } catch (const std::exception& e) {
        std::printf("    benchmark training failed: %s\n", e.what());
    }
    {
        bool ok = bench.ok && criterion_recognition(bench);
        std::printf("[%s] criterion 5: synthetic recognition >= 95%% within budget\n",
                    ok ? "PASS" : "FAIL");
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    failures += run("criterion 6: ablation ordering (median over 3 seeds)",
                    criterion_ablation);
    {
        bool ok = false;
        try {
            ok = bench.ok && criterion_robustness(bench);
        } catch (const std::exception& e) {
            std::printf("    exception: %s\n", e.what());
        }
        std::printf("[%s] criterion 7: frame-dropout robustness trend\n", ok ? "PASS" : "FAIL");
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    failures += run("criterion 8: determinism and checkpoint persistence",
                    criterion_determinism);
    failures += run("criterion 9: k-NN graph matches the brute-force oracle", criterion_knn);

    std::printf("%d of 9 criteria failed\n", failures);
    return failures;
}
