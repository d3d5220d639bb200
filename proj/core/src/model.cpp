#include "dslnet/model.hpp"

namespace dslnet {

using namespace ad;
using nn::Var;

AblationMode parse_ablation_mode(const std::string& s) {
    if (s == "dual_geo_ot") return AblationMode::DualGeoOt;
    if (s == "dual_cross_attn") return AblationMode::DualCrossAttn;
    if (s == "dual_concat") return AblationMode::DualConcat;
    if (s == "tssn_only") return AblationMode::TssnOnly;
    if (s == "ftde_only") return AblationMode::FtdeOnly;
    if (s == "global_norm") return AblationMode::GlobalNorm;
    throw ConfigError("unknown ablation mode: " + s);
}

std::string ablation_mode_name(AblationMode m) {
    switch (m) {
        case AblationMode::DualGeoOt: return "dual_geo_ot";
        case AblationMode::DualCrossAttn: return "dual_cross_attn";
        case AblationMode::DualConcat: return "dual_concat";
        case AblationMode::TssnOnly: return "tssn_only";
        case AblationMode::FtdeOnly: return "ftde_only";
        case AblationMode::GlobalNorm: return "global_norm";
    }
    throw ConfigError("bad ablation mode value");
}

namespace {

// Transport weights compare the pooled shape feature against every trajectory
// frame with a cosine, which is only defined when both live in the same space.
void check_stream_dims(const ModelConfig& cfg) {
    if ((cfg.mode == AblationMode::DualGeoOt || cfg.mode == AblationMode::GlobalNorm) &&
        cfg.tssn.out_dim != cfg.ftde.out_dim) {
        throw ConfigError("transport-based fusion requires tssn.out_dim == ftde.out_dim (got " +
                          std::to_string(cfg.tssn.out_dim) + " and " +
                          std::to_string(cfg.ftde.out_dim) + ")");
    }
}

}  // namespace

DslNet::DslNet(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    check_stream_dims(cfg);
    std::mt19937_64 rng(init_seed);
    std::size_t dims = 2;  // synthetic and file data are 2-D by default
    tssn_ = Tssn(store_, cfg.tssn, dims, rng);
    ftde_ = Ftde(store_, cfg.ftde, cfg.finsler, dims, rng);
    fusion_ = Fusion(store_, cfg.fusion, cfg.tssn.out_dim, cfg.ftde.out_dim, rng);
    solo_head_.emplace();
    *solo_head_ = nn::Linear(store_, "solo.head_s", cfg.tssn.out_dim,
                             cfg.fusion.num_classes, rng);
    nn::Linear(store_, "solo.head_t", cfg.ftde.out_dim, cfg.fusion.num_classes, rng);
}

DslNet DslNet::from_params(const ModelConfig& cfg, nn::ParamStore&& store) {
    DslNet m;
    m.cfg_ = cfg;
    m.store_ = std::move(store);
    m.bind();
    return m;
}

void DslNet::bind() {
    check_stream_dims(cfg_);
    tssn_ = Tssn::from_store(store_, cfg_.tssn);
    ftde_ = Ftde::from_store(store_, cfg_.ftde, cfg_.finsler);
    fusion_ = Fusion::from_store(store_, cfg_.fusion, cfg_.tssn.out_dim, cfg_.ftde.out_dim);
    solo_head_.emplace();
    *solo_head_ = nn::Linear::from_store(store_, "solo.head_s");
}

ForwardResult DslNet::forward(const SkeletonSequence& seq) const {
    DualFrameInput input = cfg_.mode == AblationMode::GlobalNorm
                               ? build_global_norm_input(seq)
                               : build_dual_input(seq, cfg_.epsilon_frames);
    ForwardResult fr;
    switch (cfg_.mode) {
        case AblationMode::TssnOnly: {
            auto [fs_seq, fs] = tssn_.forward(input.shape_stream, input.t_len);
            fr.f_s_attn = fs;
            fr.f_t_aligned = fs;  // placeholder, unused
            fr.logits = nn::Linear::from_store(store_, "solo.head_s")(fs);
            return fr;
        }
        case AblationMode::FtdeOnly: {
            Var ft = ftde_.forward(input.traj_stream);
            Var ft_mean = mean_rows(ft);
            fr.f_s_attn = ft_mean;  // placeholder
            fr.f_t_aligned = ft_mean;
            fr.logits = nn::Linear::from_store(store_, "solo.head_t")(ft_mean);
            return fr;
        }
        case AblationMode::DualConcat: {
            auto [fs_seq, fs] = tssn_.forward(input.shape_stream, input.t_len);
            Var ft = ftde_.forward(input.traj_stream);
            fr.f_s_attn = fs;
            fr.f_t_aligned = mean_rows(ft);
            fr.logits = fusion_.classify(fr.f_s_attn, fr.f_t_aligned);
            fr.has_geo_pair = true;
            return fr;
        }
        case AblationMode::DualCrossAttn: {
            auto [fs_seq, fs] = tssn_.forward(input.shape_stream, input.t_len);
            Var ft = ftde_.forward(input.traj_stream);
            auto [fs_attn, ft_attn] = fusion_.cross_attend(fs_seq, ft);
            fr.f_s_attn = fs_attn;
            fr.f_t_aligned = mean_rows(ft_attn);
            fr.logits = fusion_.classify(fr.f_s_attn, fr.f_t_aligned);
            fr.has_geo_pair = true;
            return fr;
        }
        case AblationMode::DualGeoOt:
        case AblationMode::GlobalNorm: {
            auto [fs_seq, fs] = tssn_.forward(input.shape_stream, input.t_len);
            Var ft = ftde_.forward(input.traj_stream);
            auto [fs_attn, ft_attn] = fusion_.cross_attend(fs_seq, ft);
            Var gamma = fusion_.ot_weights(fs_attn, ft_attn);  // 1 x T
            fr.f_s_attn = fs_attn;
            fr.f_t_aligned = matmul(gamma, ft_attn);
            fr.logits = fusion_.classify(fr.f_s_attn, fr.f_t_aligned);
            fr.has_geo_pair = true;
            return fr;
        }
    }
    throw ConfigError("forward: bad ablation mode");
}

Var DslNet::loss(const ForwardResult& fr, std::size_t label) const {
    if (!fr.has_geo_pair) {
        if (label >= cfg_.fusion.num_classes)
            throw std::out_of_range("loss: label out of range");
        return cross_entropy(fr.logits, label);
    }
    return fusion_.loss_total(fr.logits, label, fr.f_s_attn, fr.f_t_aligned);
}

}  // namespace dslnet
