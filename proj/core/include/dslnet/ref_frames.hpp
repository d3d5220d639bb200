#pragma once

#include <vector>

#include "dslnet/skeleton.hpp"
#include "dslnet/tensor.hpp"

namespace dslnet {

// Paired stream tensors produced by the two reference frames.
//   shape_stream: (T*21) x D, frame-major, wrist-centric hand joints
//   traj_stream:  T x D, face-normalized wrist positions
struct DualFrameInput {
    Tensor shape_stream;
    Tensor traj_stream;
    double epsilon = 1e-6;
    std::size_t t_len = 0;
    std::size_t dims = 2;

    void validate() const;
};

// Wrist-centric re-centering of the 21 hand joints. Exact arithmetic.
Tensor to_wrist_frame(const SkeletonSequence& seq);

// Facial anchor at frame t: centroid of the 5 facial keypoints and the
// outer-mouth-corner distance. Frames whose facial joints are non-finite fall
// back to the last valid anchor (first frame must be valid).
struct FaceAnchor {
    std::vector<double> center;  // D
    double scale = 0.0;
};
FaceAnchor face_anchor(const SkeletonSequence& seq, std::size_t t);

Tensor to_facial_frame(const SkeletonSequence& seq, double epsilon);

DualFrameInput build_dual_input(const SkeletonSequence& seq, double epsilon = 1e-6);

// Ablation baseline: both streams taken from globally normalized coordinates,
// with no wrist re-centering and no facial scaling.
DualFrameInput build_global_norm_input(const SkeletonSequence& seq);

}  // namespace dslnet
