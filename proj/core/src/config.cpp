#include "dslnet/config.hpp"

#include <fstream>
#include <sstream>

namespace dslnet {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back((std::size_t)std::stoul(item));
    }
    if (out.empty()) throw ConfigError("empty list value: " + v);
    return out;
}

double parse_double(const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw ConfigError("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value: " + v);
    }
}

long parse_long(const std::string& v) {
    try {
        std::size_t pos = 0;
        long l = std::stol(v, &pos);
        if (pos != v.size()) throw ConfigError("trailing characters");
        return l;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value: " + v);
    }
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad boolean value: " + v);
}

}  // namespace

void TrainConfig::validate() const {
    if (data_source != "synth" && data_source != "manifest")
        throw ConfigError("data.source must be synth or manifest");
    if (data_source == "manifest" && (train_manifest.empty() || test_manifest.empty()))
        throw ConfigError("manifest data source needs data.train_manifest and data.test_manifest");
    if (synth.num_shapes < 1 || synth.num_shapes > kNumShapeIds)
        throw ConfigError("synth.num_shapes out of range");
    if (synth.num_trajs < 1 || synth.num_trajs > kNumTrajIds)
        throw ConfigError("synth.num_trajs out of range");
    if (synth.frames < 2) throw ConfigError("synth.frames must be >= 2");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    model.tssn.validate();
    model.ftde.validate();
    model.fusion.validate();
    if (augment_enabled) {
        aug.validate();
        // training configs must keep the identity augmentation reachable
        if (aug.scale_range.first > 1.0 || aug.scale_range.second < 1.0)
            throw ConfigError("aug.scale range must contain 1");
        if (aug.time_stretch_range.first > 1.0 || aug.time_stretch_range.second < 1.0)
            throw ConfigError("aug.stretch range must contain 1");
    }
}

void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data.source") cfg.data_source = value;
    else if (key == "data.train_manifest") cfg.train_manifest = value;
    else if (key == "data.test_manifest") cfg.test_manifest = value;
    else if (key == "synth.num_shapes") cfg.synth.num_shapes = (int)parse_long(value);
    else if (key == "synth.num_trajs") cfg.synth.num_trajs = (int)parse_long(value);
    else if (key == "synth.train_per_class") cfg.synth.train_per_class = (int)parse_long(value);
    else if (key == "synth.test_per_class") cfg.synth.test_per_class = (int)parse_long(value);
    else if (key == "synth.frames") cfg.synth.frames = (std::size_t)parse_long(value);
    else if (key == "synth.noise_sigma") cfg.synth.noise_sigma = parse_double(value);
    else if (key == "tssn.k") cfg.model.tssn.k = (std::size_t)parse_long(value);
    else if (key == "tssn.channels") cfg.model.tssn.block_channels = parse_size_list(value);
    else if (key == "tssn.temporal_kernel") cfg.model.tssn.temporal_kernel = (std::size_t)parse_long(value);
    else if (key == "tssn.lstm_hidden") cfg.model.tssn.lstm_hidden = (std::size_t)parse_long(value);
    else if (key == "tssn.heads") cfg.model.tssn.attn_heads = (std::size_t)parse_long(value);
    else if (key == "tssn.out_dim") cfg.model.tssn.out_dim = (std::size_t)parse_long(value);
    else if (key == "ftde.channels") cfg.model.ftde.conv_channels = parse_size_list(value);
    else if (key == "ftde.kernel") cfg.model.ftde.conv_kernel = (std::size_t)parse_long(value);
    else if (key == "ftde.lstm_hidden") cfg.model.ftde.lstm_hidden = (std::size_t)parse_long(value);
    else if (key == "ftde.out_dim") cfg.model.ftde.out_dim = (std::size_t)parse_long(value);
    else if (key == "ftde.modulate_conv") cfg.model.ftde.modulate_conv_instead = parse_bool(value);
    else if (key == "finsler.phi_hidden") cfg.model.finsler.phi_hidden = (std::size_t)parse_long(value);
    else if (key == "finsler.epsilon") cfg.model.finsler.epsilon_energy = parse_double(value);
    else if (key == "fusion.heads") cfg.model.fusion.attn_heads = (std::size_t)parse_long(value);
    else if (key == "fusion.epsilon_ot") cfg.model.fusion.epsilon_ot = parse_double(value);
    else if (key == "fusion.max_iters") cfg.model.fusion.max_sinkhorn_iters = (int)parse_long(value);
    else if (key == "fusion.tol") cfg.model.fusion.sinkhorn_tol = parse_double(value);
    else if (key == "fusion.lambda_time") cfg.model.fusion.lambda_time = parse_double(value);
    else if (key == "fusion.lambda_feat") cfg.model.fusion.lambda_feat = parse_double(value);
    else if (key == "fusion.proj_dim") cfg.model.fusion.proj_dim = (std::size_t)parse_long(value);
    else if (key == "fusion.alpha_loss") cfg.model.fusion.alpha_loss = parse_double(value);
    else if (key == "model.epsilon_frames") cfg.model.epsilon_frames = parse_double(value);
    else if (key == "model.mode") cfg.model.mode = parse_ablation_mode(value);
    else if (key == "train.batch_size") cfg.batch_size = (int)parse_long(value);
    else if (key == "train.epochs") cfg.epochs = (int)parse_long(value);
    else if (key == "train.lr_max") cfg.schedule.lr_max = parse_double(value);
    else if (key == "train.lr_min") cfg.schedule.lr_min = parse_double(value);
    else if (key == "adamw.beta1") cfg.adamw.beta1 = parse_double(value);
    else if (key == "adamw.beta2") cfg.adamw.beta2 = parse_double(value);
    else if (key == "adamw.eps") cfg.adamw.eps = parse_double(value);
    else if (key == "adamw.weight_decay") cfg.adamw.weight_decay = parse_double(value);
    else if (key == "seed") cfg.seed = (std::uint64_t)parse_long(value);
    else if (key == "aug.enabled") cfg.augment_enabled = parse_bool(value);
    else if (key == "aug.rotation_max") cfg.aug.rotation_max_rad = parse_double(value);
    else if (key == "aug.scale_lo") cfg.aug.scale_range.first = parse_double(value);
    else if (key == "aug.scale_hi") cfg.aug.scale_range.second = parse_double(value);
    else if (key == "aug.noise_sigma") cfg.aug.noise_sigma = parse_double(value);
    else if (key == "aug.stretch_lo") cfg.aug.time_stretch_range.first = parse_double(value);
    else if (key == "aug.stretch_hi") cfg.aug.time_stretch_range.second = parse_double(value);
    else throw ConfigError("unknown config key: " + key);
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key=value");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string config_to_string(const TrainConfig& c) {
    std::ostringstream o;
    o.precision(17);
    auto list = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    o << "data.source=" << c.data_source << "\n";
    if (!c.train_manifest.empty()) o << "data.train_manifest=" << c.train_manifest << "\n";
    if (!c.test_manifest.empty()) o << "data.test_manifest=" << c.test_manifest << "\n";
    o << "synth.num_shapes=" << c.synth.num_shapes << "\n"
      << "synth.num_trajs=" << c.synth.num_trajs << "\n"
      << "synth.train_per_class=" << c.synth.train_per_class << "\n"
      << "synth.test_per_class=" << c.synth.test_per_class << "\n"
      << "synth.frames=" << c.synth.frames << "\n"
      << "synth.noise_sigma=" << c.synth.noise_sigma << "\n"
      << "tssn.k=" << c.model.tssn.k << "\n"
      << "tssn.channels=" << list(c.model.tssn.block_channels) << "\n"
      << "tssn.temporal_kernel=" << c.model.tssn.temporal_kernel << "\n"
      << "tssn.lstm_hidden=" << c.model.tssn.lstm_hidden << "\n"
      << "tssn.heads=" << c.model.tssn.attn_heads << "\n"
      << "tssn.out_dim=" << c.model.tssn.out_dim << "\n"
      << "ftde.channels=" << list(c.model.ftde.conv_channels) << "\n"
      << "ftde.kernel=" << c.model.ftde.conv_kernel << "\n"
      << "ftde.lstm_hidden=" << c.model.ftde.lstm_hidden << "\n"
      << "ftde.out_dim=" << c.model.ftde.out_dim << "\n"
      << "ftde.modulate_conv=" << (c.model.ftde.modulate_conv_instead ? "true" : "false") << "\n"
      << "finsler.phi_hidden=" << c.model.finsler.phi_hidden << "\n"
      << "finsler.epsilon=" << c.model.finsler.epsilon_energy << "\n"
      << "fusion.heads=" << c.model.fusion.attn_heads << "\n"
      << "fusion.epsilon_ot=" << c.model.fusion.epsilon_ot << "\n"
      << "fusion.max_iters=" << c.model.fusion.max_sinkhorn_iters << "\n"
      << "fusion.tol=" << c.model.fusion.sinkhorn_tol << "\n"
      << "fusion.lambda_time=" << c.model.fusion.lambda_time << "\n"
      << "fusion.lambda_feat=" << c.model.fusion.lambda_feat << "\n"
      << "fusion.proj_dim=" << c.model.fusion.proj_dim << "\n"
      << "fusion.alpha_loss=" << c.model.fusion.alpha_loss << "\n"
      << "model.epsilon_frames=" << c.model.epsilon_frames << "\n"
      << "model.mode=" << ablation_mode_name(c.model.mode) << "\n"
      << "train.batch_size=" << c.batch_size << "\n"
      << "train.epochs=" << c.epochs << "\n"
      << "train.lr_max=" << c.schedule.lr_max << "\n"
      << "train.lr_min=" << c.schedule.lr_min << "\n"
      << "adamw.beta1=" << c.adamw.beta1 << "\n"
      << "adamw.beta2=" << c.adamw.beta2 << "\n"
      << "adamw.eps=" << c.adamw.eps << "\n"
      << "adamw.weight_decay=" << c.adamw.weight_decay << "\n"
      << "seed=" << c.seed << "\n"
      << "aug.enabled=" << (c.augment_enabled ? "true" : "false") << "\n"
      << "aug.rotation_max=" << c.aug.rotation_max_rad << "\n"
      << "aug.scale_lo=" << c.aug.scale_range.first << "\n"
      << "aug.scale_hi=" << c.aug.scale_range.second << "\n"
      << "aug.noise_sigma=" << c.aug.noise_sigma << "\n"
      << "aug.stretch_lo=" << c.aug.time_stretch_range.first << "\n"
      << "aug.stretch_hi=" << c.aug.time_stretch_range.second << "\n";
    return o.str();
}

}  // namespace dslnet
