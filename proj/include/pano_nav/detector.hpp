#pragma once

// Simulated object detector: perturbs ground-truth boxes with a seeded,
// parametric noise model (misses, centroid/size jitter, label confusion and
// Poisson false positives per view).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"
#include "pano_nav/panocam.hpp"

namespace pano_nav {

struct NoiseModel {
    double centroidJitterStd = 0.02;
    double sizeJitterStd = 0.02;
    double missRate = 0.1;
    double falsePositiveRate = 0.2;  // expected spurious boxes per view
    double labelConfusionRate = 0.05;
    std::uint64_t seed = 0;
    int classCount = kDefaultClassCount;

    static NoiseModel zero(int classCount = kDefaultClassCount) {
        return {0.0, 0.0, 0.0, 0.0, 0.0, 0, classCount};
    }

    bool is_zero() const {
        return centroidJitterStd == 0.0 && sizeJitterStd == 0.0 && missRate == 0.0 && falsePositiveRate == 0.0 &&
               labelConfusionRate == 0.0;
    }

    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

inline void validate(const NoiseModel& n) {
    auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!(n.centroidJitterStd >= 0.0) || !(n.sizeJitterStd >= 0.0) || !rate(n.missRate) ||
        !(n.falsePositiveRate >= 0.0) || !rate(n.labelConfusionRate) || n.classCount < 2)
        throw Error(ErrorKind::ConfigError, "noise model parameters out of range");
}

struct Detection {
    BoundingBox2D box;  // box.classId is the reported (possibly wrong) label
    double confidence = 1.0;
    std::optional<int> sourceObjectId;

    int label() const { return box.classId; }

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// drawKey for one sweep of one episode.
inline std::uint64_t draw_key(std::uint64_t episodeId, int timestep) {
    return hash_combine(episodeId, static_cast<std::uint64_t>(timestep));
}

inline constexpr double kMinBoxSize = 1e-3;

/// Clamps a box into the unit square: size in [kMinBoxSize, 1], extent inside [0, 1].
inline void clamp_to_unit_square(BoundingBox2D& b) {
    b.w = std::clamp(b.w, kMinBoxSize, 1.0);
    b.h = std::clamp(b.h, kMinBoxSize, 1.0);
    b.cx = std::clamp(b.cx, b.w / 2.0, 1.0 - b.w / 2.0);
    b.cy = std::clamp(b.cy, b.h / 2.0, 1.0 - b.h / 2.0);
}

inline std::vector<Detection> detect(const std::vector<BoundingBox2D>& groundTruth, const NoiseModel& noise,
                                     std::uint64_t drawKey) {
    validate(noise);
    Rng rng(hash_combine(noise.seed, drawKey));
    const bool jitter = noise.centroidJitterStd > 0.0 || noise.sizeJitterStd > 0.0;
    std::vector<Detection> out;
    out.reserve(groundTruth.size());

    for (const auto& gt : groundTruth) {
        // Each box consumes the same number of draws whatever happens to it,
        // so one box's fate never shifts another's.
        const double missDraw = rng.uniform();
        const double dcx = rng.normal(0.0, 1.0) * noise.centroidJitterStd;
        const double dcy = rng.normal(0.0, 1.0) * noise.centroidJitterStd;
        const double dw = rng.normal(0.0, 1.0) * noise.sizeJitterStd;
        const double dh = rng.normal(0.0, 1.0) * noise.sizeJitterStd;
        const double confuseDraw = rng.uniform();
        const auto otherClass = static_cast<int>(rng.below(static_cast<std::uint64_t>(noise.classCount - 1)));
        if (missDraw < noise.missRate) continue;

        Detection d;
        d.box = gt;
        d.sourceObjectId = gt.objectId;
        if (jitter) {
            d.box.cx += dcx;
            d.box.cy += dcy;
            d.box.w += dw;
            d.box.h += dh;
            clamp_to_unit_square(d.box);
        }
        d.confidence = std::exp(-(std::abs(dcx) + std::abs(dcy) + std::abs(dw) + std::abs(dh)) / 0.1);
        if (confuseDraw < noise.labelConfusionRate) {
            d.box.classId = otherClass >= gt.classId ? otherClass + 1 : otherClass;
            d.confidence *= 0.5;
        }
        out.push_back(d);
    }

    for (int p = 0; p < kPanoramicViews; ++p) {
        const int count = rng.poisson(noise.falsePositiveRate);
        for (int k = 0; k < count; ++k) {
            Detection d;
            d.box.p = p;
            d.box.w = rng.uniform(0.02, 0.3);
            d.box.h = rng.uniform(0.02, 0.3);
            d.box.cx = rng.uniform(d.box.w / 2.0, 1.0 - d.box.w / 2.0);
            d.box.cy = rng.uniform(d.box.h / 2.0, 1.0 - d.box.h / 2.0);
            d.box.classId = static_cast<int>(rng.below(static_cast<std::uint64_t>(noise.classCount)));
            d.box.objectId = -1;
            d.confidence = rng.uniform(0.01, 0.5);
            out.push_back(d);
        }
    }
    return out;
}

} // namespace pano_nav
