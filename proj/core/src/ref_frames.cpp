#include "dslnet/ref_frames.hpp"

#include <cmath>

namespace dslnet {

void DualFrameInput::validate() const {
    if (epsilon <= 0.0) throw FormatError("DualFrameInput: epsilon must be > 0");
    if (shape_stream.rows() != t_len * kNumHandJoints || shape_stream.cols() != dims)
        throw ShapeError("DualFrameInput: shape_stream is " + shape_stream.shape_str());
    if (traj_stream.rows() != t_len || traj_stream.cols() != dims)
        throw ShapeError("DualFrameInput: traj_stream is " + traj_stream.shape_str());
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t d = 0; d < dims; ++d) {
            if (shape_stream(t * kNumHandJoints + kWristJoint, d) != 0.0)
                throw FormatError("DualFrameInput: wrist row must be exactly zero");
            if (!std::isfinite(traj_stream(t, d)))
                throw FormatError("DualFrameInput: non-finite traj_stream");
        }
}

Tensor to_wrist_frame(const SkeletonSequence& seq) {
    Tensor out(seq.t_len * kNumHandJoints, seq.dims);
    for (std::size_t t = 0; t < seq.t_len; ++t)
        for (std::size_t j = 0; j < kNumHandJoints; ++j)
            for (std::size_t d = 0; d < seq.dims; ++d)
                out(t * kNumHandJoints + j, d) =
                    seq.at(t, j, d) - seq.at(t, kWristJoint, d);
    return out;
}

namespace {
bool face_valid(const SkeletonSequence& seq, std::size_t t) {
    for (std::size_t f = 0; f < 5; ++f)
        for (std::size_t d = 0; d < seq.dims; ++d)
            if (!std::isfinite(seq.at(t, kNoseJoint + f, d))) return false;
    return true;
}

FaceAnchor anchor_at(const SkeletonSequence& seq, std::size_t t) {
    FaceAnchor a;
    a.center.assign(seq.dims, 0.0);
    for (std::size_t f = 0; f < 5; ++f)
        for (std::size_t d = 0; d < seq.dims; ++d)
            a.center[d] += seq.at(t, kNoseJoint + f, d) / 5.0;
    double s = 0.0;
    for (std::size_t d = 0; d < seq.dims; ++d) {
        double diff = seq.at(t, kMouthRightOuter, d) - seq.at(t, kMouthLeftOuter, d);
        s += diff * diff;
    }
    a.scale = std::sqrt(s);
    return a;
}
}  // namespace

FaceAnchor face_anchor(const SkeletonSequence& seq, std::size_t t) {
    if (t >= seq.t_len) throw ShapeError("face_anchor: frame index out of range");
    if (face_valid(seq, t)) return anchor_at(seq, t);
    // carry forward the last valid anchor
    for (std::size_t back = t; back-- > 0;)
        if (face_valid(seq, back)) return anchor_at(seq, back);
    throw FormatError("face_anchor: facial landmarks missing at the first frame");
}

Tensor to_facial_frame(const SkeletonSequence& seq, double epsilon) {
    if (epsilon <= 0.0) throw FormatError("to_facial_frame: epsilon must be > 0");
    Tensor out(seq.t_len, seq.dims);
    FaceAnchor a;
    bool have = false;
    for (std::size_t t = 0; t < seq.t_len; ++t) {
        if (face_valid(seq, t)) {
            a = anchor_at(seq, t);
            have = true;
        } else if (!have) {
            throw FormatError("to_facial_frame: facial landmarks missing at the first frame");
        }
        for (std::size_t d = 0; d < seq.dims; ++d)
            out(t, d) = (seq.at(t, kWristJoint, d) - a.center[d]) / (a.scale + epsilon);
    }
    return out;
}

DualFrameInput build_dual_input(const SkeletonSequence& seq, double epsilon) {
    DualFrameInput in;
    in.t_len = seq.t_len;
    in.dims = seq.dims;
    in.epsilon = epsilon;
    in.shape_stream = to_wrist_frame(seq);
    in.traj_stream = to_facial_frame(seq, epsilon);
    in.validate();
    return in;
}

DualFrameInput build_global_norm_input(const SkeletonSequence& seq) {
    DualFrameInput in;
    in.t_len = seq.t_len;
    in.dims = seq.dims;
    in.shape_stream = Tensor(seq.t_len * kNumHandJoints, seq.dims);
    in.traj_stream = Tensor(seq.t_len, seq.dims);
    for (std::size_t t = 0; t < seq.t_len; ++t) {
        for (std::size_t j = 0; j < kNumHandJoints; ++j)
            for (std::size_t d = 0; d < seq.dims; ++d)
                in.shape_stream(t * kNumHandJoints + j, d) = seq.at(t, j, d);
        for (std::size_t d = 0; d < seq.dims; ++d)
            in.traj_stream(t, d) = seq.at(t, kWristJoint, d);
    }
    // no wrist re-centering here, so the DualFrameInput wrist invariant does
    // not apply; skip validate()
    return in;
}

}  // namespace dslnet
