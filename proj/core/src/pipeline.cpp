#include "dslnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dslnet/flops.hpp"

namespace dslnet {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // splitmix64 over a simple combination
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1) + 0xbf58476d1ce4e5b9ULL * (c + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

Dataset build_dataset(const TrainConfig& cfg) {
    cfg.validate();
    Dataset ds;
    if (cfg.data_source == "synth") {
        const auto& s = cfg.synth;
        ds.num_classes = s.num_classes();
        for (int cls = 0; cls < ds.num_classes; ++cls) {
            SynthClassSpec spec;
            spec.shape_id = cls / s.num_trajs;
            spec.traj_id = cls % s.num_trajs;
            spec.duration_frames = s.frames;
            for (int i = 0; i < s.train_per_class; ++i) {
                std::uint64_t seed = mix_seed(cfg.seed, (std::uint64_t)cls, (std::uint64_t)i);
                ds.train.push_back({synth_generate(spec, s.noise_sigma, seed), cls});
            }
            for (int i = 0; i < s.test_per_class; ++i) {
                std::uint64_t seed =
                    mix_seed(cfg.seed ^ 0xdeadbeefULL, (std::uint64_t)cls, (std::uint64_t)i);
                ds.test.push_back({synth_generate(spec, s.noise_sigma, seed), cls});
            }
        }
        return ds;
    }
    auto load_split = [&](const std::string& manifest, std::vector<LabeledSequence>& out) {
        std::filesystem::path mpath(manifest);
        std::vector<ManifestEntry> entries;
        try {
            entries = load_manifest(mpath);
        } catch (const IoError& e) {
            throw DataError(e.what());
        }
        for (const auto& e : entries) {
            LabeledSequence ls;
            try {
                ls.seq = load_sequence(mpath.parent_path() / e.path);
            } catch (const IoError& ex) {
                throw DataError(ex.what());
            }
            ls.label = e.class_id;
            if (ls.label < 0) throw DataError("manifest entry without class id: " + e.path);
            ds.num_classes = std::max(ds.num_classes, ls.label + 1);
            out.push_back(std::move(ls));
        }
    };
    load_split(cfg.train_manifest, ds.train);
    load_split(cfg.test_manifest, ds.test);
    if (ds.train.empty()) throw DataError("empty training set");
    return ds;
}

SkeletonSequence drop_frames(const SkeletonSequence& seq, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("drop_frames: rate must be in [0,1)");
    std::size_t n_drop = (std::size_t)((double)seq.t_len * rate);
    if (n_drop == 0) return seq;
    if (seq.t_len - n_drop < 2) throw DataError("drop_frames: fewer than 2 frames remain");
    std::vector<std::size_t> idx(seq.t_len);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(seq.t_len - n_drop);
    std::sort(idx.begin(), idx.end());
    SkeletonSequence out = seq;
    out.t_len = idx.size();
    out.coords.resize(out.t_len * kNumJoints * seq.dims);
    for (std::size_t t = 0; t < idx.size(); ++t)
        for (std::size_t i = 0; i < kNumJoints * seq.dims; ++i)
            out.coords[t * kNumJoints * seq.dims + i] =
                seq.coords[idx[t] * kNumJoints * seq.dims + i];
    return out;
}

namespace {

int predict(const DslNet& model, const SkeletonSequence& seq) {
    ForwardResult fr = model.forward(normalize_coords(seq));
    const Tensor& logits = fr.logits->value;
    int best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
        if (logits[c] > logits[(std::size_t)best]) best = (int)c;
    return best;
}

}  // namespace

double evaluate_accuracy(const DslNet& model, const std::vector<LabeledSequence>& samples,
                         double dropout_rate, std::uint64_t seed,
                         std::vector<std::vector<int>>* confusion) {
    if (samples.empty()) return 0.0;
    int C = (int)model.config().fusion.num_classes;
    if (confusion)
        confusion->assign((std::size_t)C, std::vector<int>((std::size_t)C, 0));
    int correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        SkeletonSequence seq = samples[i].seq;
        if (dropout_rate > 0.0)
            seq = drop_frames(seq, dropout_rate, mix_seed(seed, i, 0x5eedULL));
        int pred = predict(model, seq);
        if (pred == samples[i].label) ++correct;
        if (confusion)
            (*confusion)[(std::size_t)samples[i].label][(std::size_t)pred] += 1;
    }
    return 100.0 * (double)correct / (double)samples.size();
}

TrainResult train(const TrainConfig& cfg_in) {
    TrainConfig cfg = cfg_in;
    cfg.validate();
    Dataset ds = build_dataset(cfg);
    if (ds.num_classes > (int)cfg.model.fusion.num_classes ||
        cfg.data_source == "synth")
        cfg.model.fusion.num_classes = (std::size_t)ds.num_classes;

    DslNet model(cfg.model, mix_seed(cfg.seed, 0x1417ULL));

    std::size_t n = ds.train.size();
    std::size_t steps_per_epoch = (n + (std::size_t)cfg.batch_size - 1) / (std::size_t)cfg.batch_size;
    ScheduleSpec sched = cfg.schedule;
    sched.total_steps = std::max<std::int64_t>(1, (std::int64_t)(steps_per_epoch * (std::size_t)cfg.epochs));

    MetricsReport report;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5f5fULL, (std::uint64_t)epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        int correct = 0;
        for (std::size_t b = 0; b < n; b += (std::size_t)cfg.batch_size) {
            std::size_t b_end = std::min(n, b + (std::size_t)cfg.batch_size);
            model.params().zero_grad();
            for (std::size_t s = b; s < b_end; ++s) {
                const auto& sample = ds.train[order[s]];
                SkeletonSequence seq = sample.seq;
                if (cfg.augment_enabled) {
                    AugmentSpec aug = cfg.aug;
                    aug.rng_seed = mix_seed(cfg.seed, (std::uint64_t)epoch, order[s]);
                    seq = augment(seq, aug);
                }
                ForwardResult fr = model.forward(normalize_coords(seq));
                nn::Var loss = model.loss(fr, (std::size_t)sample.label);
                double lv = loss->value[0];
                if (!std::isfinite(lv))
                    throw DivergenceError("training loss is not finite at epoch " +
                                          std::to_string(epoch));
                loss_sum += lv;
                int best = 0;
                for (std::size_t c = 1; c < fr.logits->value.cols(); ++c)
                    if (fr.logits->value[c] > fr.logits->value[(std::size_t)best])
                        best = (int)c;
                if (best == sample.label) ++correct;
                ad::backward(ad::scale(loss, 1.0 / (double)(b_end - b)));
            }
            double lr = cosine_lr(sched, std::min(step, sched.total_steps));
            adamw_step(model.params(), lr, cfg.adamw);
            ++step;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / (double)n;
        em.train_accuracy = 100.0 * (double)correct / (double)n;
        report.per_epoch.push_back(em);
    }

    report.test_accuracy =
        evaluate_accuracy(model, ds.test, 0.0, cfg.seed, &report.confusion);
    report.flops = flop_estimate(model.config(), cfg.data_source == "synth"
                                                     ? cfg.synth.frames
                                                     : (ds.train.front().seq.t_len));
    return {std::move(model), std::move(report)};
}

std::vector<std::pair<std::string, double>> ablate(const TrainConfig& cfg) {
    static const AblationMode kModes[] = {
        AblationMode::DualGeoOt,    AblationMode::DualCrossAttn, AblationMode::DualConcat,
        AblationMode::TssnOnly,     AblationMode::FtdeOnly,      AblationMode::GlobalNorm,
    };
    std::vector<std::pair<std::string, double>> rows;
    for (AblationMode mode : kModes) {
        TrainConfig c = cfg;
        c.model.mode = mode;
        TrainResult r = train(c);
        rows.emplace_back(ablation_mode_name(mode), r.metrics.test_accuracy);
    }
    return rows;
}

std::vector<std::pair<double, double>> robustness(const DslNet& model,
                                                  const std::vector<LabeledSequence>& test,
                                                  const std::vector<double>& rates,
                                                  std::uint64_t seed, int repeats) {
    std::vector<std::pair<double, double>> rows;
    for (double rate : rates) {
        double acc = 0.0;
        int reps = rate > 0.0 ? repeats : 1;
        for (int r = 0; r < reps; ++r)
            acc += evaluate_accuracy(model, test, rate, mix_seed(seed, (std::uint64_t)r));
        rows.emplace_back(rate, acc / (double)reps);
    }
    return rows;
}

void export_features(const DslNet& model, const std::vector<LabeledSequence>& samples,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    std::size_t d = model.config().tssn.out_dim + model.config().ftde.out_dim;
    for (std::size_t i = 0; i < d; ++i) out << "f" << i << ",";
    out << "label\n";
    out.precision(17);
    for (const auto& s : samples) {
        ForwardResult fr = model.forward(normalize_coords(s.seq));
        for (std::size_t i = 0; i < fr.f_s_attn->value.numel(); ++i)
            out << fr.f_s_attn->value[i] << ",";
        for (std::size_t i = 0; i < fr.f_t_aligned->value.numel(); ++i)
            out << fr.f_t_aligned->value[i] << ",";
        out << s.label << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::string metrics_to_json(const TrainConfig& cfg, const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["config"] = config_to_string(cfg);
    j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : report.per_epoch)
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"train_accuracy", e.train_accuracy}});
    j["test_accuracy"] = report.test_accuracy;
    j["confusion"] = report.confusion;
    j["flops"] = report.flops;
    return j.dump(2) + "\n";
}

std::string ablation_to_csv(const std::vector<std::pair<std::string, double>>& rows) {
    std::ostringstream o;
    o << "mode,accuracy\n";
    o << std::fixed;
    o.precision(2);
    for (const auto& [mode, acc] : rows) o << mode << "," << acc << "\n";
    return o.str();
}

std::string robustness_to_csv(const std::vector<std::pair<double, double>>& rows) {
    std::ostringstream o;
    o << "dropout_rate,accuracy\n";
    o << std::fixed;
    o.precision(2);
    for (const auto& [rate, acc] : rows) o << rate << "," << acc << "\n";
    return o.str();
}

}  // namespace dslnet
