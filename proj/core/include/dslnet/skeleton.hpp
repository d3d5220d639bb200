#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dslnet/errors.hpp"

namespace dslnet {

inline constexpr std::size_t kNumJoints = 26;   // 21 hand + 5 facial
inline constexpr std::size_t kNumHandJoints = 21;
inline constexpr std::size_t kWristJoint = 0;
inline constexpr std::size_t kNoseJoint = 21;
// Facial layout: 21 nose, 22 left outer mouth, 23 left inner, 24 right inner,
// 25 right outer. The face scale s_f is the 22<->25 distance.
inline constexpr std::size_t kMouthLeftOuter = 22;
inline constexpr std::size_t kMouthRightOuter = 25;

enum class JointRole { Hand, Face };

struct SkeletonSequence {
    std::size_t t_len = 0;
    std::size_t dims = 2;  // D in {2, 3}
    std::vector<double> coords;  // t_len * kNumJoints * dims, row-major (t, j, d)
    double fps = 30.0;
    int class_id = -1;  // -1 = unlabeled

    double& at(std::size_t t, std::size_t j, std::size_t d) {
        return coords[(t * kNumJoints + j) * dims + d];
    }
    double at(std::size_t t, std::size_t j, std::size_t d) const {
        return coords[(t * kNumJoints + j) * dims + d];
    }
    static JointRole role(std::size_t j) {
        return j < kNumHandJoints ? JointRole::Hand : JointRole::Face;
    }

    // Throws FormatError on any invariant violation (J, D, T, finiteness).
    void validate() const;
};

struct AugmentSpec {
    double rotation_max_rad = 0.0;
    std::pair<double, double> scale_range{1.0, 1.0};
    double noise_sigma = 0.0;
    std::pair<double, double> time_stretch_range{1.0, 1.0};
    std::uint64_t rng_seed = 0;

    void validate() const;
};

inline constexpr int kNumShapeIds = 5;  // fist, open palm, point, pinch, L
inline constexpr int kNumTrajIds = 5;   // circle, h-sweep, v-sweep, figure-eight, diagonal

struct SynthClassSpec {
    int shape_id = 0;
    int traj_id = 0;
    std::size_t duration_frames = 40;
};

SkeletonSequence load_sequence(const std::filesystem::path& path);
void save_sequence(const SkeletonSequence& seq, const std::filesystem::path& path);

// Per-sequence, per-dimension affine map onto [-1, 1]; zero-extent dims map to
// 0. Throws DegenerateInput when every dimension is flat.
SkeletonSequence normalize_coords(const SkeletonSequence& seq);

SkeletonSequence augment(const SkeletonSequence& seq, const AugmentSpec& spec);

// Deterministic synthetic gesture: wrist follows the traj_id curve relative to
// fixed facial landmarks, hand joints carry the shape_id pose rigidly. Nuisance
// factors (global offset, scale, trajectory amplitude, gesture window) are
// drawn from the seed so samples of one class still vary.
SkeletonSequence synth_generate(const SynthClassSpec& spec, double noise_sigma,
                                std::uint64_t seed);

struct ManifestEntry {
    std::string path;
    int class_id;
};
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace dslnet
