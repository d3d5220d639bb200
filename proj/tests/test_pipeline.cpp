#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dslnet/checkpoint.hpp"
#include "dslnet/flops.hpp"
#include "dslnet/pipeline.hpp"

using namespace dslnet;
namespace fs = std::filesystem;

namespace {

// Small-but-trainable settings shared by the pipeline tests.
TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.synth.num_shapes = 2;
    cfg.synth.num_trajs = 1;
    cfg.synth.train_per_class = 6;
    cfg.synth.test_per_class = 2;
    cfg.synth.frames = 12;
    cfg.synth.noise_sigma = 0.01;
    cfg.model.tssn.k = 2;
    cfg.model.tssn.block_channels = {4};
    cfg.model.tssn.temporal_kernel = 3;
    cfg.model.tssn.lstm_hidden = 4;
    cfg.model.tssn.attn_heads = 2;
    cfg.model.tssn.out_dim = 8;
    cfg.model.ftde.conv_channels = {4};
    cfg.model.ftde.lstm_hidden = 3;
    cfg.model.ftde.out_dim = 8;
    cfg.model.finsler.phi_hidden = 4;
    cfg.model.fusion.attn_heads = 2;
    cfg.model.fusion.proj_dim = 4;
    cfg.model.fusion.alpha_loss = 0.1;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = 7;
    cfg.schedule.lr_max = 0.02;
    cfg.schedule.lr_min = 0.0002;
    cfg.augment_enabled = false;
    return cfg;
}

}  // namespace

TEST_CASE("flop counting formulas") {
    CHECK(flops_dense(1, 64, 64) == 8192.0);
    CHECK(flops_conv1d(32, 3, 8, 16, 1) == 2.0 * 32 * 3 * 8 * 16);
    CHECK(flops_conv1d(64, 3, 8, 16, 1) == 2.0 * flops_conv1d(32, 3, 8, 16, 1));
    CHECK(flops_bilstm(64, 8, 16) == 2.0 * flops_bilstm(32, 8, 16));
    ModelConfig mc = tiny_config().model;
    double f1 = flop_estimate(mc, 20);
    double f2 = flop_estimate(mc, 40);
    CHECK(f1 > 0.0);
    CHECK(f2 > f1);
}

TEST_CASE("config files parse, echo deterministically, and reject unknown keys") {
    auto path = fs::temp_directory_path() / "dslnet_test_cfg.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "synth.num_shapes = 3\n";
        out << "tssn.channels = 8, 16\n";
        out << "train.epochs=5   # trailing comment\n";
        out << "model.mode = tssn_only\n";
        out << "aug.enabled = false\n";
    }
    TrainConfig cfg = parse_train_config(path);
    CHECK(cfg.synth.num_shapes == 3);
    REQUIRE(cfg.model.tssn.block_channels.size() == 2);
    CHECK(cfg.model.tssn.block_channels[1] == 16);
    CHECK(cfg.epochs == 5);
    CHECK(cfg.model.mode == AblationMode::TssnOnly);
    CHECK_FALSE(cfg.augment_enabled);
    CHECK(config_to_string(cfg) == config_to_string(cfg));

    {
        std::ofstream out(path);
        out << "not.a.key = 1\n";
    }
    CHECK_THROWS_AS(parse_train_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << "no equals sign here\n";
    }
    CHECK_THROWS_AS(parse_train_config(path), ConfigError);
    fs::remove(path);
}

TEST_CASE("ablation mode names round-trip and unknown names are rejected") {
    for (const char* name : {"dual_geo_ot", "dual_cross_attn", "dual_concat", "tssn_only",
                             "ftde_only", "global_norm"})
        CHECK(ablation_mode_name(parse_ablation_mode(name)) == name);
    CHECK_THROWS_AS(parse_ablation_mode("bogus"), ConfigError);
}

TEST_CASE("synthetic dataset has the configured shape and is deterministic") {
    TrainConfig cfg = tiny_config();
    Dataset d1 = build_dataset(cfg);
    Dataset d2 = build_dataset(cfg);
    CHECK(d1.num_classes == 2);
    CHECK(d1.train.size() == 12);
    CHECK(d1.test.size() == 4);
    for (const auto& s : d1.train) {
        CHECK(s.label >= 0);
        CHECK(s.label < 2);
        CHECK(s.seq.t_len == 12);
        CHECK_NOTHROW(s.seq.validate());
    }
    for (std::size_t i = 0; i < d1.train.size(); ++i)
        for (std::size_t j = 0; j < d1.train[i].seq.coords.size(); ++j)
            CHECK(d1.train[i].seq.coords[j] == d2.train[i].seq.coords[j]);
    // train and test draws differ
    bool differs = false;
    for (std::size_t j = 0; j < d1.train[0].seq.coords.size(); ++j)
        if (d1.train[0].seq.coords[j] != d1.test[0].seq.coords[j]) differs = true;
    CHECK(differs);
}

TEST_CASE("frame dropout: identity at rate 0, floor arithmetic, order preserved") {
    SkeletonSequence seq = synth_generate(SynthClassSpec{0, 0, 20}, 0.0, 3);
    SkeletonSequence same = drop_frames(seq, 0.0, 5);
    CHECK(same.t_len == 20);
    for (std::size_t i = 0; i < seq.coords.size(); ++i) CHECK(same.coords[i] == seq.coords[i]);

    SkeletonSequence dropped = drop_frames(seq, 0.15, 5);
    CHECK(dropped.t_len == 17);  // floor(0.15 * 20) = 3 removed
    // kept frames appear in their original order
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < dropped.t_len; ++t) {
        bool found = false;
        for (; cursor < seq.t_len && !found; ++cursor) {
            bool equal = true;
            for (std::size_t i = 0; i < kNumJoints * 2; ++i)
                if (dropped.coords[t * kNumJoints * 2 + i] !=
                    seq.coords[(cursor)*kNumJoints * 2 + i])
                    equal = false;
            found = equal;
        }
        CHECK(found);
    }

    SkeletonSequence two = synth_generate(SynthClassSpec{0, 0, 2}, 0.0, 3);
    CHECK_THROWS_AS(drop_frames(two, 0.5, 1), DataError);
}

TEST_CASE("transport-based modes reject mismatched stream output dims") {
    TrainConfig cfg = tiny_config();
    cfg.model.fusion.num_classes = 2;
    cfg.model.ftde.out_dim = cfg.model.tssn.out_dim + 2;
    for (AblationMode mode : {AblationMode::DualGeoOt, AblationMode::GlobalNorm}) {
        ModelConfig mc = cfg.model;
        mc.mode = mode;
        CHECK_THROWS_AS(DslNet(mc, 1), ConfigError);
    }
    // concat fusion has no cosine between the streams, so it still works
    ModelConfig mc = cfg.model;
    mc.mode = AblationMode::DualConcat;
    CHECK_NOTHROW(DslNet(mc, 1));
}

TEST_CASE("model forward produces C logits in every ablation mode") {
    TrainConfig cfg = tiny_config();
    cfg.model.fusion.num_classes = 2;
    SkeletonSequence seq = synth_generate(SynthClassSpec{1, 0, 12}, 0.01, 9);
    for (AblationMode mode :
         {AblationMode::DualGeoOt, AblationMode::DualCrossAttn, AblationMode::DualConcat,
          AblationMode::TssnOnly, AblationMode::FtdeOnly, AblationMode::GlobalNorm}) {
        ModelConfig mc = cfg.model;
        mc.mode = mode;
        DslNet model(mc, 42);
        ForwardResult fr = model.forward(seq);
        CHECK(fr.logits->value.rows() == 1);
        CHECK(fr.logits->value.cols() == 2);
        CHECK(fr.logits->value.all_finite());
        nn::Var l = model.loss(fr, 1);
        CHECK(l->value.numel() == 1);
        CHECK(std::isfinite(l->value[0]));
        if (mode == AblationMode::TssnOnly || mode == AblationMode::FtdeOnly)
            CHECK_FALSE(fr.has_geo_pair);
        else
            CHECK(fr.has_geo_pair);
    }
}

TEST_CASE("training is deterministic and improves the toy separable task") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 16;
    TrainResult r1 = train(cfg);
    TrainResult r2 = train(cfg);
    REQUIRE(r1.metrics.per_epoch.size() == 16);
    CHECK(metrics_to_json(cfg, r1.metrics) == metrics_to_json(cfg, r2.metrics));
    for (const auto& e : r1.metrics.per_epoch) CHECK(std::isfinite(e.train_loss));
    CHECK(r1.metrics.per_epoch.back().train_loss < r1.metrics.per_epoch.front().train_loss);
    CHECK(r1.metrics.per_epoch.back().train_accuracy >= 99.0);
    CHECK(r1.metrics.test_accuracy >= 75.0);

    // confusion rows sum to the per-class test counts
    REQUIRE(r1.metrics.confusion.size() == 2);
    for (const auto& row : r1.metrics.confusion) {
        int sum = 0;
        for (int v : row) sum += v;
        CHECK(sum == cfg.synth.test_per_class);
    }
}

TEST_CASE("epochs=0 yields an untrained model with valid chance-level metrics") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 0;
    TrainResult r = train(cfg);
    CHECK(r.metrics.per_epoch.empty());
    CHECK(r.metrics.test_accuracy >= 0.0);
    CHECK(r.metrics.test_accuracy <= 100.0);
    int total = 0;
    for (const auto& row : r.metrics.confusion)
        for (int v : row) total += v;
    CHECK(total == 4);
}

TEST_CASE("checkpoint save/load reproduces evaluation exactly") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 3;
    TrainResult r = train(cfg);
    Dataset data = build_dataset(cfg);
    double before = evaluate_accuracy(r.model, data.test, 0.0, 0);

    auto path = fs::temp_directory_path() / "dslnet_test_model.ckpt";
    save_checkpoint(r.model.params(), path);
    DslNet restored = DslNet::from_params(cfg.model, load_checkpoint(path));
    double after = evaluate_accuracy(restored, data.test, 0.0, 0);
    CHECK(after == before);
    fs::remove(path);
}

TEST_CASE("ablate runs all six modes in a fixed order") {
    TrainConfig cfg = tiny_config();
    cfg.synth.train_per_class = 2;
    cfg.synth.test_per_class = 1;
    cfg.epochs = 1;
    auto rows = ablate(cfg);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].first == "dual_geo_ot");
    CHECK(rows[1].first == "dual_cross_attn");
    CHECK(rows[2].first == "dual_concat");
    CHECK(rows[3].first == "tssn_only");
    CHECK(rows[4].first == "ftde_only");
    CHECK(rows[5].first == "global_norm");
    for (const auto& [name, acc] : rows) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 100.0);
    }
    std::string csv = ablation_to_csv(rows);
    CHECK(csv.rfind("mode,accuracy\n", 0) == 0);
    CHECK(csv.find("dual_geo_ot,") != std::string::npos);
}

TEST_CASE("robustness rows carry the requested rates; rate 0 matches clean accuracy") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    TrainResult r = train(cfg);
    Dataset data = build_dataset(cfg);
    auto rows = robustness(r.model, data.test, {0.0, 0.10}, 11, 2);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].first == 0.0);
    CHECK(rows[1].first == 0.10);
    CHECK(rows[0].second == evaluate_accuracy(r.model, data.test, 0.0, 0));
    std::string csv = robustness_to_csv(rows);
    CHECK(csv.rfind("dropout_rate,accuracy\n", 0) == 0);
}

TEST_CASE("feature export writes a labeled CSV with stable contents") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 1;
    TrainResult r = train(cfg);
    Dataset data = build_dataset(cfg);
    auto path = fs::temp_directory_path() / "dslnet_test_features.csv";
    export_features(r.model, data.test, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    std::size_t dim = cfg.model.tssn.out_dim + cfg.model.ftde.out_dim;
    CHECK(header.rfind("f0,", 0) == 0);
    CHECK(header.find("f" + std::to_string(dim - 1) + ",label") != std::string::npos);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == data.test.size());
    in.close();

    std::ifstream again(path);
    std::string all1((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    export_features(r.model, data.test, path);
    std::ifstream again2(path);
    std::string all2((std::istreambuf_iterator<char>(again2)), std::istreambuf_iterator<char>());
    CHECK(all1 == all2);
    fs::remove(path);
}

TEST_CASE("metrics json contains the config echo and the documented fields") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 1;
    TrainResult r = train(cfg);
    std::string json = metrics_to_json(cfg, r.metrics);
    CHECK(json.find("\"config\"") != std::string::npos);
    CHECK(json.find("\"epochs\"") != std::string::npos);
    CHECK(json.find("\"test_accuracy\"") != std::string::npos);
    CHECK(json.find("\"confusion\"") != std::string::npos);
    CHECK(json.find("\"flops\"") != std::string::npos);
}

TEST_CASE("seed mixing separates streams") {
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    CHECK(mix_seed(1, 2, 3) != mix_seed(1, 2, 4));
}

TEST_CASE("manifest datasets load sequences relative to the manifest directory") {
    auto dir = fs::temp_directory_path() / "dslnet_test_dataset";
    fs::create_directories(dir);
    for (int i = 0; i < 4; ++i) {
        SkeletonSequence seq = synth_generate(SynthClassSpec{i % 2, 0, 8}, 0.0, (std::uint64_t)i);
        seq.class_id = i % 2;
        save_sequence(seq, dir / ("s" + std::to_string(i) + ".skelseq"));
    }
    auto write_manifest = [&](const fs::path& p, int lo, int hi) {
        std::ofstream out(p);
        for (int i = lo; i < hi; ++i)
            out << "s" << i << ".skelseq\t" << (i % 2) << "\n";
    };
    write_manifest(dir / "train.tsv", 0, 2);
    write_manifest(dir / "test.tsv", 2, 4);
    TrainConfig cfg = tiny_config();
    cfg.data_source = "manifest";
    cfg.train_manifest = (dir / "train.tsv").string();
    cfg.test_manifest = (dir / "test.tsv").string();
    Dataset d = build_dataset(cfg);
    CHECK(d.train.size() == 2);
    CHECK(d.test.size() == 2);
    CHECK(d.num_classes == 2);

    std::ofstream bad(dir / "bad.tsv");
    bad << "missing.skelseq\t0\n";
    bad.close();
    cfg.train_manifest = (dir / "bad.tsv").string();
    CHECK_THROWS_AS(build_dataset(cfg), DataError);
    fs::remove_all(dir);
}
