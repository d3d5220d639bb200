#pragma once

#include <optional>
#include <string>

#include "dslnet/ftde.hpp"
#include "dslnet/fusion.hpp"
#include "dslnet/ref_frames.hpp"
#include "dslnet/tssn.hpp"

namespace dslnet {

enum class AblationMode {
    DualGeoOt,      // full model
    DualCrossAttn,  // cross-attention fusion, temporal mean instead of OT
    DualConcat,     // plain concatenation of stream means
    TssnOnly,
    FtdeOnly,
    GlobalNorm,     // full fusion but whole-body normalization input
};

AblationMode parse_ablation_mode(const std::string& s);
std::string ablation_mode_name(AblationMode m);
inline constexpr int kNumAblationModes = 6;

struct ModelConfig {
    TssnConfig tssn;
    FtdeConfig ftde;
    FusionConfig fusion;
    FinslerParams finsler;
    double epsilon_frames = 1e-6;
    AblationMode mode = AblationMode::DualGeoOt;
};

struct ForwardResult {
    nn::Var logits;
    nn::Var f_s_attn;     // 1 x d_s (or the stream mean for non-fusion modes)
    nn::Var f_t_aligned;  // 1 x d_t
    bool has_geo_pair = false;
};

class DslNet {
public:
    DslNet() = default;
    DslNet(const ModelConfig& cfg, std::uint64_t init_seed);
    // Rebuild module handles from parameters already present in the store
    // (after checkpoint load).
    static DslNet from_params(const ModelConfig& cfg, nn::ParamStore&& store);

    ForwardResult forward(const SkeletonSequence& seq) const;
    nn::Var loss(const ForwardResult& fr, std::size_t label) const;

    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }
    const ModelConfig& config() const { return cfg_; }

private:
    void bind();

    ModelConfig cfg_;
    nn::ParamStore store_;
    Tssn tssn_;
    Ftde ftde_;
    Fusion fusion_;
    std::optional<nn::Linear> solo_head_;  // classifier for single-stream modes
};

}  // namespace dslnet
