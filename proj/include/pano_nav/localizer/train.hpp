#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"
#include "pano_nav/localizer/network.hpp"

namespace pano_nav {

struct TrainingSample {
    TokenSequence input;
    double psi = 0.0;  // degrees
};

struct TrainConfig {
    double learningRate = 0.02;
    int epochs = 30;
    int batchSize = 16;
    std::uint64_t seed = 0;
    double initScale = 0.1;
    double momentum = 0.9;
    double gradClip = 1.0;  // max global gradient norm per batch; <= 0 disables

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c) {
    if (!(c.learningRate > 0.0) || c.epochs < 1 || c.batchSize < 1 || !(c.initScale >= 0.0) ||
        !(c.momentum >= 0.0 && c.momentum < 1.0))
        throw Error(ErrorKind::ConfigError, "invalid training configuration");
}

struct TrainResult {
    LocalizerModel model;
    std::vector<double> lossCurve;  // mean loss per epoch
};

/// Minibatch SGD with momentum over the analytic gradients. The loss recorded
/// for an epoch is the mean of the per-sample losses seen during that epoch.
inline TrainResult train(LocalizerModel model, const std::vector<TrainingSample>& data, const TrainConfig& cfg) {
    validate(cfg);
    if (data.empty()) throw Error(ErrorKind::ValidationError, "training set is empty");

    TrainResult result;
    std::vector<double> grad(model.params.size());
    std::vector<double> velocity(model.params.size(), 0.0);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epochLoss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batchSize)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batchSize));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = data[order[i]];
                epochLoss += backward(model, s.input, s.psi, grad);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            double norm2 = 0.0;
            for (double& gi : grad) {
                gi *= inv;
                norm2 += gi * gi;
            }
            if (!std::isfinite(norm2)) throw Error(ErrorKind::DivergedTraining, "non-finite gradient");
            double clip = 1.0;
            if (cfg.gradClip > 0.0 && norm2 > cfg.gradClip * cfg.gradClip) clip = cfg.gradClip / std::sqrt(norm2);
            for (std::size_t j = 0; j < grad.size(); ++j) {
                velocity[j] = cfg.momentum * velocity[j] + clip * grad[j];
                model.params[j] -= cfg.learningRate * velocity[j];
            }
        }
        epochLoss /= static_cast<double>(data.size());
        if (!std::isfinite(epochLoss)) throw Error(ErrorKind::DivergedTraining, "loss became non-finite");
        result.lossCurve.push_back(epochLoss);
    }
    result.model = std::move(model);
    return result;
}

inline TrainResult train(const std::vector<TrainingSample>& data, const ModelShape& shape, const TrainConfig& cfg) {
    return train(init_model(shape, cfg.seed, cfg.initScale), data, cfg);
}

inline double mean_loss(const LocalizerModel& model, const std::vector<TrainingSample>& data) {
    double total = 0.0;
    for (const auto& s : data) total += loss(predict_raw(model, s.input), s.psi);
    return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

/// Mean absolute angular error of the normalized prediction, degrees.
inline double mean_angular_error(const LocalizerModel& model, const std::vector<TrainingSample>& data) {
    double total = 0.0;
    for (const auto& s : data) total += angular_distance_deg(predict(model, s.input).degrees(), s.psi);
    return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

} // namespace pano_nav
