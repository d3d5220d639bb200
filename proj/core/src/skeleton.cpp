#include "dslnet/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace dslnet {

void SkeletonSequence::validate() const {
    if (dims != 2 && dims != 3)
        throw FormatError("SkeletonSequence: D must be 2 or 3, got " + std::to_string(dims));
    if (t_len < 2)
        throw FormatError("SkeletonSequence: T must be >= 2, got " + std::to_string(t_len));
    if (coords.size() != t_len * kNumJoints * dims)
        throw FormatError("SkeletonSequence: coordinate buffer size mismatch");
    for (double v : coords)
        if (!std::isfinite(v)) throw FormatError("SkeletonSequence: non-finite coordinate");
}

void AugmentSpec::validate() const {
    if (rotation_max_rad < 0.0) throw FormatError("AugmentSpec: rotation_max_rad < 0");
    if (noise_sigma < 0.0) throw FormatError("AugmentSpec: noise_sigma < 0");
    if (!(scale_range.first > 0.0) || scale_range.first > scale_range.second)
        throw FormatError("AugmentSpec: bad scale_range");
    if (!(time_stretch_range.first > 0.0) ||
        time_stretch_range.first > time_stretch_range.second)
        throw FormatError("AugmentSpec: bad time_stretch_range");
}

// ---- file format ---------------------------------------------------------------
// Header: SKELSEQ v1 T=<int> J=26 D=<int> class=<int|-1>
// then T lines of J*D floats.

SkeletonSequence load_sequence(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic, version;
    in >> magic >> version;
    if (magic != "SKELSEQ" || version != "v1")
        throw FormatError(path.string() + ": bad header magic");
    long t_len = -1, j = -1, d = -1, cls = -1;
    std::string tok;
    while (in >> tok && tok.find('=') != std::string::npos) {
        auto eq = tok.find('=');
        std::string key = tok.substr(0, eq);
        long val = 0;
        try {
            val = std::stol(tok.substr(eq + 1));
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": bad header field " + tok);
        }
        if (key == "T") t_len = val;
        else if (key == "J") j = val;
        else if (key == "D") d = val;
        else if (key == "class") cls = val;
        else throw FormatError(path.string() + ": unknown header field " + key);
        if (key == "class") break;  // class is the last field
    }
    if (t_len < 2 || j < 0 || d < 0)
        throw FormatError(path.string() + ": incomplete header");
    if (j != (long)kNumJoints)
        throw FormatError(path.string() + ": J must be 26, got " + std::to_string(j));
    if (d != 2 && d != 3)
        throw FormatError(path.string() + ": D must be 2 or 3");
    SkeletonSequence seq;
    seq.t_len = (std::size_t)t_len;
    seq.dims = (std::size_t)d;
    seq.class_id = (int)cls;
    seq.coords.resize(seq.t_len * kNumJoints * seq.dims);
    for (auto& v : seq.coords) {
        if (!(in >> v)) throw FormatError(path.string() + ": truncated coordinate data");
    }
    seq.validate();
    return seq;
}

void save_sequence(const SkeletonSequence& seq, const std::filesystem::path& path) {
    seq.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "SKELSEQ v1 T=" << seq.t_len << " J=" << kNumJoints << " D=" << seq.dims
        << " class=" << seq.class_id << "\n";
    out.precision(17);
    for (std::size_t t = 0; t < seq.t_len; ++t) {
        for (std::size_t i = 0; i < kNumJoints * seq.dims; ++i) {
            if (i) out << ' ';
            out << seq.coords[t * kNumJoints * seq.dims + i];
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw FormatError(path.string() + ": manifest line missing tab: " + line);
        ManifestEntry e;
        e.path = line.substr(0, tab);
        try {
            e.class_id = std::stoi(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": bad class id in: " + line);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

// ---- normalization ----------------------------------------------------------

SkeletonSequence normalize_coords(const SkeletonSequence& seq) {
    seq.validate();
    SkeletonSequence out = seq;
    bool any_extent = false;
    for (std::size_t d = 0; d < seq.dims; ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t t = 0; t < seq.t_len; ++t)
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                lo = std::min(lo, seq.at(t, j, d));
                hi = std::max(hi, seq.at(t, j, d));
            }
        if (hi > lo) {
            any_extent = true;
            double inv = 2.0 / (hi - lo);
            for (std::size_t t = 0; t < seq.t_len; ++t)
                for (std::size_t j = 0; j < kNumJoints; ++j)
                    out.at(t, j, d) = (seq.at(t, j, d) - lo) * inv - 1.0;
        } else {
            for (std::size_t t = 0; t < seq.t_len; ++t)
                for (std::size_t j = 0; j < kNumJoints; ++j) out.at(t, j, d) = 0.0;
        }
    }
    if (!any_extent) throw DegenerateInput("normalize_coords: all dimensions have zero extent");
    return out;
}

// ---- augmentation -------------------------------------------------------------

SkeletonSequence augment(const SkeletonSequence& seq, const AugmentSpec& spec) {
    seq.validate();
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);

    std::uniform_real_distribution<double> rot_dist(-spec.rotation_max_rad,
                                                    spec.rotation_max_rad);
    std::uniform_real_distribution<double> scale_dist(spec.scale_range.first,
                                                      spec.scale_range.second);
    std::uniform_real_distribution<double> stretch_dist(spec.time_stretch_range.first,
                                                        spec.time_stretch_range.second);
    double angle = spec.rotation_max_rad > 0.0 ? rot_dist(rng) : 0.0;
    double scl = spec.scale_range.first < spec.scale_range.second ? scale_dist(rng)
                                                                  : spec.scale_range.first;
    double stretch = spec.time_stretch_range.first < spec.time_stretch_range.second
                         ? stretch_dist(rng)
                         : spec.time_stretch_range.first;

    SkeletonSequence work = seq;
    // centroid over all joints and frames
    std::vector<double> ctr(seq.dims, 0.0);
    for (std::size_t t = 0; t < seq.t_len; ++t)
        for (std::size_t j = 0; j < kNumJoints; ++j)
            for (std::size_t d = 0; d < seq.dims; ++d) ctr[d] += seq.at(t, j, d);
    for (auto& v : ctr) v /= (double)(seq.t_len * kNumJoints);

    double ca = std::cos(angle), sa = std::sin(angle);
    if (angle != 0.0 || scl != 1.0)
    for (std::size_t t = 0; t < seq.t_len; ++t)
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            double x = seq.at(t, j, 0) - ctr[0];
            double y = seq.at(t, j, 1) - ctr[1];
            // rotation in the xy-plane (the z axis is untouched for D=3)
            double rx = ca * x - sa * y;
            double ry = sa * x + ca * y;
            work.at(t, j, 0) = ctr[0] + scl * rx;
            work.at(t, j, 1) = ctr[1] + scl * ry;
            for (std::size_t d = 2; d < seq.dims; ++d)
                work.at(t, j, d) = ctr[d] + scl * (seq.at(t, j, d) - ctr[d]);
        }

    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (auto& v : work.coords) v += noise(rng);
    }

    if (stretch != 1.0) {
        std::size_t new_t = std::max<std::size_t>(
            2, (std::size_t)std::llround((double)seq.t_len * stretch));
        SkeletonSequence res = work;
        res.t_len = new_t;
        res.coords.assign(new_t * kNumJoints * seq.dims, 0.0);
        for (std::size_t t = 0; t < new_t; ++t) {
            double src = new_t == 1 ? 0.0
                                    : (double)t * (double)(work.t_len - 1) / (double)(new_t - 1);
            std::size_t lo = (std::size_t)src;
            std::size_t hi = std::min(lo + 1, work.t_len - 1);
            double w = src - (double)lo;
            for (std::size_t j = 0; j < kNumJoints; ++j)
                for (std::size_t d = 0; d < seq.dims; ++d)
                    res.at(t, j, d) = (1.0 - w) * work.at(lo, j, d) + w * work.at(hi, j, d);
        }
        work = std::move(res);
    }
    work.validate();
    return work;
}

// ---- synthetic generator -----------------------------------------------------

namespace {

// 21-joint hand pose offsets relative to the wrist, unit hand scale.
// Joints: 0 wrist, then 4 per finger (thumb, index, middle, ring, pinky).
std::vector<double> hand_pose(int shape_id) {
    if (shape_id < 0 || shape_id >= kNumShapeIds)
        throw FormatError("UnknownShapeId: " + std::to_string(shape_id));
    // Base direction (radians from +y) and curl in [0,1] per finger.
    struct Finger { double angle; double curl; double len; };
    std::vector<std::array<Finger, 5>> shapes = {
        // fist: everything curled
        {{{-1.1, 0.9, 0.5}, {-0.25, 0.95, 1.0}, {0.0, 0.95, 1.05}, {0.25, 0.95, 1.0}, {0.5, 0.95, 0.8}}},
        // open palm: spread, straight
        {{{-1.1, 0.05, 0.5}, {-0.35, 0.0, 1.0}, {0.0, 0.0, 1.05}, {0.35, 0.0, 1.0}, {0.65, 0.0, 0.8}}},
        // point: index straight, rest curled
        {{{-1.0, 0.8, 0.5}, {-0.1, 0.0, 1.0}, {0.1, 0.95, 1.05}, {0.3, 0.95, 1.0}, {0.5, 0.95, 0.8}}},
        // pinch: thumb and index toward each other, rest straight
        {{{-0.55, 0.45, 0.6}, {-0.3, 0.55, 1.0}, {0.1, 0.1, 1.05}, {0.35, 0.1, 1.0}, {0.6, 0.1, 0.8}}},
        // L: thumb out sideways, index straight, rest curled
        {{{-1.5, 0.0, 0.6}, {0.0, 0.0, 1.0}, {0.2, 0.95, 1.05}, {0.4, 0.95, 1.0}, {0.6, 0.95, 0.8}}},
    };
    const auto& fingers = shapes[(std::size_t)shape_id];
    std::vector<double> off(kNumHandJoints * 2, 0.0);
    for (int f = 0; f < 5; ++f) {
        const Finger& fg = fingers[(std::size_t)f];
        // Each segment bends further with curl; joint k at cumulative position.
        double x = 0.12 * ((double)f - 2.0);  // knuckle spread at the palm
        double y = 0.35;
        double seg = 0.22 * fg.len;
        double ang = fg.angle;
        for (int k = 0; k < 4; ++k) {
            ang += fg.curl * 0.85 * (k > 0 ? 1.0 : 0.4);  // progressive bend
            x += seg * std::sin(ang);
            y += seg * std::cos(ang) * (1.0 - 0.75 * fg.curl * (k > 0 ? 1.0 : 0.0));
            int j = 1 + f * 4 + k;
            off[(std::size_t)j * 2] = x;
            off[(std::size_t)j * 2 + 1] = y;
        }
    }
    return off;
}

// Parametric wrist curve, phase s in [0,1], unit amplitude, starts near 0.
std::pair<double, double> traj_curve(int traj_id, double s) {
    constexpr double kTau = 6.283185307179586;
    switch (traj_id) {
        case 0:  // circle
            return {0.35 * (std::cos(kTau * s) - 1.0), 0.35 * std::sin(kTau * s)};
        case 1:  // horizontal sweep
            return {0.7 * (2.0 * s - 1.0), 0.0};
        case 2:  // vertical sweep
            return {0.0, 0.7 * (2.0 * s - 1.0)};
        case 3:  // figure-eight
            return {0.35 * std::sin(2.0 * kTau * s), 0.35 * std::sin(kTau * s)};
        case 4:  // diagonal sweep
            return {0.5 * (2.0 * s - 1.0), 0.5 * (2.0 * s - 1.0)};
        default:
            throw FormatError("UnknownTrajId: " + std::to_string(traj_id));
    }
}

}  // namespace

SkeletonSequence synth_generate(const SynthClassSpec& spec, double noise_sigma,
                                std::uint64_t seed) {
    if (spec.shape_id < 0 || spec.shape_id >= kNumShapeIds)
        throw FormatError("UnknownShapeId: " + std::to_string(spec.shape_id));
    if (spec.traj_id < 0 || spec.traj_id >= kNumTrajIds)
        throw FormatError("UnknownTrajId: " + std::to_string(spec.traj_id));
    if (spec.duration_frames < 2)
        throw FormatError("SynthClassSpec: duration_frames must be >= 2");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Nuisance factors drawn before anything trajectory-dependent so that equal
    // seeds give identical hand placement regardless of traj_id.
    double off_x = (unit(rng) - 0.5) * 0.6;
    double off_y = (unit(rng) - 0.5) * 0.6;
    double global_scale = 0.85 + unit(rng) * 0.35;
    double amplitude = 0.7 + unit(rng) * 0.6;
    double win_frac = 0.55 + unit(rng) * 0.3;   // active gesture window
    double win_pos = unit(rng);

    std::size_t T = spec.duration_frames;
    std::size_t t_active = std::max<std::size_t>(2, (std::size_t)std::llround(win_frac * (double)T));
    t_active = std::min(t_active, T);
    std::size_t t0 = (std::size_t)std::llround(win_pos * (double)(T - t_active));

    // Facial landmarks, fixed for the whole sequence.
    const double face[5][2] = {
        {0.0, 0.55},     // nose
        {-0.12, 0.30},   // left outer mouth corner
        {-0.04, 0.28},   // left inner
        {0.04, 0.28},    // right inner
        {0.12, 0.30},    // right outer
    };

    std::vector<double> pose = hand_pose(spec.shape_id);
    constexpr double kHandScale = 0.28;
    const double base_x = 0.05, base_y = -0.55;  // signing space below the face

    SkeletonSequence seq;
    seq.t_len = T;
    seq.dims = 2;
    seq.coords.assign(T * kNumJoints * 2, 0.0);

    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (std::size_t t = 0; t < T; ++t) {
        double s;
        if (t < t0) s = 0.0;
        else if (t >= t0 + t_active) s = 1.0;
        else s = (double)(t - t0) / (double)(t_active - 1);
        auto [cx, cy] = traj_curve(spec.traj_id, s);
        double wx = base_x + amplitude * cx;
        double wy = base_y + amplitude * cy;
        for (std::size_t j = 0; j < kNumHandJoints; ++j) {
            double hx = wx + kHandScale * pose[j * 2];
            double hy = wy + kHandScale * pose[j * 2 + 1];
            if (noise_sigma > 0.0) {
                hx += noise(rng);
                hy += noise(rng);
            }
            seq.at(t, j, 0) = off_x + global_scale * hx;
            seq.at(t, j, 1) = off_y + global_scale * hy;
        }
        for (std::size_t f = 0; f < 5; ++f) {
            seq.at(t, kNoseJoint + f, 0) = off_x + global_scale * face[f][0];
            seq.at(t, kNoseJoint + f, 1) = off_y + global_scale * face[f][1];
        }
    }
    seq.validate();
    return seq;
}

}  // namespace dslnet
