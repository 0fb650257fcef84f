#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pano_nav/detector.hpp"

using namespace pano_nav;

namespace {

std::vector<BoundingBox2D> boxes(int n) {
    std::vector<BoundingBox2D> out;
    for (int i = 0; i < n; ++i) out.push_back({i % 8, 0.3 + 0.4 * ((i * 7) % 10) / 10.0, 0.5, 0.2, 0.2, i, i % 32});
    return out;
}

// |observed - expected| within three binomial standard deviations.
void within_binomial(int hits, int trials, double p) {
    const double sd = std::sqrt(trials * p * (1.0 - p));
    EXPECT_LE(std::abs(hits - trials * p), 3.0 * sd) << hits << " of " << trials << " vs p=" << p;
}

} // namespace

TEST(Detector, ZeroNoiseIsIdentity) {
    const auto gt = boxes(40);
    const auto out = detect(gt, NoiseModel::zero(), 17);
    ASSERT_EQ(out.size(), gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        EXPECT_EQ(out[i].box, gt[i]);
        EXPECT_EQ(out[i].confidence, 1.0);
        EXPECT_EQ(out[i].sourceObjectId, gt[i].objectId);
    }
}

TEST(Detector, AlwaysMissAndNoFalsePositivesGivesNothing) {
    NoiseModel n = NoiseModel::zero();
    n.missRate = 1.0;
    EXPECT_TRUE(detect(boxes(50), n, 3).empty());
}

TEST(Detector, SameKeySameOutput) {
    const NoiseModel n;
    const auto gt = boxes(30);
    EXPECT_EQ(detect(gt, n, 99), detect(gt, n, 99));
    EXPECT_NE(detect(gt, n, 99), detect(gt, n, 100));
}

TEST(Detector, JitteredBoxesStayInside) {
    NoiseModel n;
    n.centroidJitterStd = 0.3;
    n.sizeJitterStd = 0.3;
    for (std::uint64_t k = 0; k < 50; ++k)
        for (const auto& d : detect(boxes(20), n, k)) {
            EXPECT_GE(d.box.cx - d.box.w / 2, -1e-12);
            EXPECT_LE(d.box.cx + d.box.w / 2, 1.0 + 1e-12);
            EXPECT_GE(d.box.cy - d.box.h / 2, -1e-12);
            EXPECT_LE(d.box.cy + d.box.h / 2, 1.0 + 1e-12);
            EXPECT_GT(d.confidence, 0.0);
            EXPECT_LE(d.confidence, 1.0);
            EXPECT_GE(d.label(), 0);
            EXPECT_LT(d.label(), n.classCount);
        }
}

TEST(DetectorStatistics, MissRate) {
    NoiseModel n = NoiseModel::zero();
    n.missRate = 0.3;
    int kept = 0, total = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        kept += static_cast<int>(detect(boxes(100), n, k).size());
        total += 100;
    }
    within_binomial(total - kept, total, 0.3);
}

TEST(DetectorStatistics, ConfusionRateAndWrongLabels) {
    NoiseModel n = NoiseModel::zero();
    n.labelConfusionRate = 0.2;
    int confused = 0, total = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto gt = boxes(100);
        for (const auto& d : detect(gt, n, k)) {
            const auto& src = gt[static_cast<std::size_t>(*d.sourceObjectId)];
            confused += d.label() != src.classId;
            if (d.label() != src.classId) {
                EXPECT_EQ(d.confidence, 0.5);
            }
            ++total;
        }
    }
    EXPECT_EQ(total, 10000);
    within_binomial(confused, total, 0.2);
}

TEST(DetectorStatistics, FalsePositivesArePoisson) {
    NoiseModel n = NoiseModel::zero();
    n.falsePositiveRate = 0.5;
    const int sweeps = 1250;  // 10,000 views
    int spurious = 0;
    for (int k = 0; k < sweeps; ++k)
        for (const auto& d : detect({}, n, static_cast<std::uint64_t>(k))) {
            EXPECT_FALSE(d.sourceObjectId.has_value());
            ++spurious;
        }
    const double mean = 0.5 * 8 * sweeps;
    EXPECT_LE(std::abs(spurious - mean), 3.0 * std::sqrt(mean));
}

TEST(Detector, InvalidParametersRejected) {
    NoiseModel n;
    n.missRate = 1.5;
    EXPECT_THROW(detect(boxes(1), n, 0), Error);
    n = {};
    n.falsePositiveRate = -1.0;
    EXPECT_THROW(detect(boxes(1), n, 0), Error);
}

TEST(Detector, DrawKeySeparatesSweeps) {
    EXPECT_NE(draw_key(1, 0), draw_key(1, 1));
    EXPECT_NE(draw_key(1, 0), draw_key(2, 0));
    EXPECT_EQ(draw_key(5, 3), draw_key(5, 3));
}
