// Command-line front end: data generation, training, evaluation, ablations,
// robustness sweeps, efficiency reporting, gradient checking, feature export.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dslnet/checkpoint.hpp"
#include "dslnet/flops.hpp"
#include "dslnet/grad_check.hpp"
#include "dslnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dslnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

TrainConfig load_config(const std::string& path, long seed_override) {
    TrainConfig cfg = path.empty() ? TrainConfig{} : parse_train_config(path);
    if (seed_override >= 0) cfg.seed = (std::uint64_t)seed_override;
    cfg.validate();
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

int cmd_gen_data(const TrainConfig& cfg, const fs::path& out_dir) {
    Dataset ds = build_dataset(cfg);
    fs::create_directories(out_dir);
    auto dump_split = [&](const std::vector<LabeledSequence>& split, const std::string& name) {
        std::ofstream manifest(out_dir / (name + ".manifest"));
        for (std::size_t i = 0; i < split.size(); ++i) {
            std::string fname = name + "_" + std::to_string(i) + ".skel";
            SkeletonSequence seq = split[i].seq;
            seq.class_id = split[i].label;
            save_sequence(seq, out_dir / fname);
            manifest << fname << "\t" << split[i].label << "\n";
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.test, "test");
    std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size()
              << " test sequences to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const TrainConfig& cfg, const fs::path& out_dir) {
    TrainResult r = train(cfg);
    fs::create_directories(out_dir);
    write_file(out_dir / "metrics.json", metrics_to_json(cfg, r.metrics));
    save_checkpoint(r.model.params(), out_dir / "model.ckpt");
    std::cout << "test accuracy: " << r.metrics.test_accuracy << "%\n";
    return kExitOk;
}

int cmd_eval(const TrainConfig& cfg, const fs::path& ckpt, double dropout_rate,
             const fs::path& out_dir) {
    Dataset ds = build_dataset(cfg);
    TrainConfig c = cfg;
    if (cfg.data_source == "synth")
        c.model.fusion.num_classes = (std::size_t)ds.num_classes;
    DslNet model = DslNet::from_params(c.model, load_checkpoint(ckpt));
    MetricsReport report;
    report.test_accuracy =
        evaluate_accuracy(model, ds.test, dropout_rate, cfg.seed, &report.confusion);
    report.flops = flop_estimate(model.config(), cfg.synth.frames);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(out_dir / "metrics.json", metrics_to_json(c, report));
    }
    std::cout << "accuracy at dropout " << dropout_rate << ": " << report.test_accuracy
              << "%\n";
    return kExitOk;
}

int cmd_ablate(const TrainConfig& cfg, const fs::path& out_dir) {
    auto rows = ablate(cfg);
    fs::create_directories(out_dir);
    write_file(out_dir / "ablation.csv", ablation_to_csv(rows));
    for (const auto& [mode, acc] : rows) std::cout << mode << ": " << acc << "%\n";
    return kExitOk;
}

int cmd_robustness(const TrainConfig& cfg, const fs::path& out_dir) {
    TrainResult r = train(cfg);
    Dataset ds = build_dataset(cfg);
    auto rows = robustness(r.model, ds.test, {0.0, 0.05, 0.10, 0.15}, cfg.seed);
    fs::create_directories(out_dir);
    write_file(out_dir / "robustness.csv", robustness_to_csv(rows));
    for (const auto& [rate, acc] : rows)
        std::cout << "dropout " << rate << ": " << acc << "%\n";
    return kExitOk;
}

int cmd_bench(const TrainConfig& cfg) {
    TrainConfig c = cfg;
    if (cfg.data_source == "synth")
        c.model.fusion.num_classes = (std::size_t)cfg.synth.num_classes();
    DslNet model(c.model, mix_seed(cfg.seed, 0x1417ULL));
    SynthClassSpec spec{0, 0, cfg.synth.frames};
    SkeletonSequence seq = synth_generate(spec, cfg.synth.noise_sigma, cfg.seed);
    // warmup + timed forward passes
    model.forward(normalize_coords(seq));
    constexpr int kReps = 20;
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < kReps; ++i) model.forward(normalize_coords(seq));
    auto elapsed = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start).count();
    double flops = flop_estimate(c.model, cfg.synth.frames);
    std::cout << "parameters: " << model.params().total_elements() << "\n";
    std::cout << "forward FLOPs (T=" << cfg.synth.frames << "): " << flops << "\n";
    std::cout << "per-sample inference: " << elapsed / kReps << " ms\n";
    return kExitOk;
}

int cmd_grad_check(const TrainConfig& cfg, double eps, double tol) {
    // small 2-class task exercising every parameter of the full model
    TrainConfig c = cfg;
    c.model.fusion.num_classes = 2;
    DslNet model(c.model, mix_seed(c.seed, 0x1417ULL));
    std::vector<LabeledSequence> batch;
    for (int i = 0; i < 2; ++i) {
        SynthClassSpec spec{i, i, 8};
        batch.push_back({synth_generate(spec, 0.01, mix_seed(c.seed, (std::uint64_t)i)), i});
    }
    auto f = [&]() {
        nn::Var total;
        for (const auto& s : batch) {
            ForwardResult fr = model.forward(normalize_coords(s.seq));
            nn::Var l = model.loss(fr, (std::size_t)s.label);
            total = total ? ad::add(total, l) : l;
        }
        return ad::scale(total, 1.0 / (double)batch.size());
    };
    GradCheckReport report = grad_check(f, model.params(), eps, tol);
    for (const auto& e : report.per_param)
        std::cout << e.name << ": max rel err " << e.max_rel_err << "\n";
    std::cout << "overall max rel err: " << report.max_rel_err
              << (report.passed(tol) ? " (PASS)" : " (FAIL)") << "\n";
    return report.passed(tol) ? kExitOk : 1;
}

int cmd_export_features(const TrainConfig& cfg, const fs::path& ckpt,
                        const fs::path& out_file) {
    Dataset ds = build_dataset(cfg);
    TrainConfig c = cfg;
    if (cfg.data_source == "synth")
        c.model.fusion.num_classes = (std::size_t)ds.num_classes;
    DslNet model = DslNet::from_params(c.model, load_checkpoint(ckpt));
    export_features(model, ds.test, out_file);
    std::cout << "wrote features for " << ds.test.size() << " samples to "
              << out_file.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DSLNet: dual-reference dual-stream gesture recognition"};
    app.require_subcommand(1);

    std::string config_path;
    long seed = -1;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "key=value config file")->capture_default_str();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset on disk");
    auto* tr = app.add_subcommand("train", "train a model, write metrics.json + model.ckpt");
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt_path;
    double dropout_rate = 0.0;
    ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    ev->add_option("--dropout-rate", dropout_rate, "frame dropout rate in [0,1)");
    auto* ab = app.add_subcommand("ablate", "train every ablation mode, write ablation.csv");
    auto* rb = app.add_subcommand("robustness", "frame-dropout sweep, write robustness.csv");
    auto* be = app.add_subcommand("bench", "parameter count, FLOPs, per-sample latency");
    auto* gc = app.add_subcommand("grad-check", "finite-difference check of the full model");
    double gc_eps = 1e-5, gc_tol = 1e-4;
    gc->add_option("--eps", gc_eps, "finite-difference step");
    gc->add_option("--tol", gc_tol, "max relative error tolerance");
    auto* ex = app.add_subcommand("export-features", "dump pre-classifier features as CSV");
    std::string export_ckpt, export_file = "features.csv";
    ex->add_option("--ckpt", export_ckpt, "checkpoint file")->required();
    ex->add_option("--file", export_file, "output CSV path")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        TrainConfig cfg = load_config(config_path, seed);
        if (gen->parsed()) return cmd_gen_data(cfg, out_dir);
        if (tr->parsed()) return cmd_train(cfg, out_dir);
        if (ev->parsed()) return cmd_eval(cfg, ckpt_path, dropout_rate, out_dir);
        if (ab->parsed()) return cmd_ablate(cfg, out_dir);
        if (rb->parsed()) return cmd_robustness(cfg, out_dir);
        if (be->parsed()) return cmd_bench(cfg);
        if (gc->parsed()) return cmd_grad_check(cfg, gc_eps, gc_tol);
        if (ex->parsed()) return cmd_export_features(cfg, export_ckpt, export_file);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
