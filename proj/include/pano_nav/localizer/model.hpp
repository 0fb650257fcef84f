#pragma once

// Parameters of the goal-direction localizer: a single pre-norm attention
// block (two heads, GELU feed-forward) over mixed spatial and text tokens,
// pooled at [CLS] and read out by a linear head.
//
// All parameters live in one flat array; named tensors are views into it.
// That keeps optimizer steps, finite-difference checks and checkpointing
// uniform over the whole model.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"

namespace pano_nav {

inline constexpr int kDefaultModelDim = 32;
inline constexpr int kAttentionHeads = 2;
inline constexpr int kSpecialCls = 0;
inline constexpr int kSpecialSep = 1;
inline constexpr int kSpecialPad = 2;

struct TensorSlot {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

struct ModelShape {
    int classCount = 32;
    int vocabSize = 42;
    int dim = kDefaultModelDim;

    int heads() const { return kAttentionHeads; }
    int head_dim() const { return dim / kAttentionHeads; }
    int hidden() const { return 4 * dim; }

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Offsets of every tensor in the flat parameter array.
struct ParamLayout {
    TensorSlot classEmb, wordEmb, specialEmb, segmentEmb;
    TensorSlot ln1Gain, ln1Bias, wq, wk, wv;
    TensorSlot ln2Gain, ln2Bias, w1, b1, w2, b2;
    TensorSlot wOut, bOut;
    std::size_t total = 0;

    explicit ParamLayout(const ModelShape& s) {
        const int D = s.dim;
        auto add = [this](TensorSlot& slot, const char* name, int rows, int cols) {
            slot = {name, total, rows, cols};
            total += slot.size();
        };
        add(classEmb, "classEmbeddings", s.classCount, D);
        add(wordEmb, "wordEmbeddings", s.vocabSize, D);
        add(specialEmb, "specialEmbeddings", 3, D);
        add(segmentEmb, "segmentEmbeddings", 2, D);
        add(ln1Gain, "ln1Gain", 1, D);
        add(ln1Bias, "ln1Bias", 1, D);
        add(wq, "wq", D, D);
        add(wk, "wk", D, D);
        add(wv, "wv", D, D);
        add(ln2Gain, "ln2Gain", 1, D);
        add(ln2Bias, "ln2Bias", 1, D);
        add(w1, "w1", s.hidden(), D);
        add(b1, "b1", 1, s.hidden());
        add(w2, "w2", D, s.hidden());
        add(b2, "b2", 1, D);
        add(wOut, "wOut", 2, D);
        add(bOut, "bOut", 1, 2);
    }

    std::vector<const TensorSlot*> slots() const {
        return {&classEmb, &wordEmb, &specialEmb, &segmentEmb, &ln1Gain, &ln1Bias, &wq, &wk, &wv,
                &ln2Gain,  &ln2Bias, &w1,         &b1,         &w2,      &b2,      &wOut, &bOut};
    }
};

struct LocalizerModel {
    ModelShape shape;
    std::uint64_t seed = 0;
    std::vector<double> params;

    LocalizerModel() : LocalizerModel(ModelShape{}) {}
    explicit LocalizerModel(const ModelShape& s) : shape(s), params(ParamLayout(s).total, 0.0) {
        if (s.dim <= 0 || s.dim % kAttentionHeads != 0)
            throw Error(ErrorKind::ConfigError, "model dim must be a positive multiple of the head count");
        if (s.classCount <= 0 || s.vocabSize <= 0) throw Error(ErrorKind::ConfigError, "empty vocabulary");
    }

    ParamLayout layout() const { return ParamLayout(shape); }

    std::span<double> tensor(const TensorSlot& t) { return {params.data() + t.offset, t.size()}; }
    std::span<const double> tensor(const TensorSlot& t) const { return {params.data() + t.offset, t.size()}; }

    /// Row `r` of a matrix tensor.
    std::span<const double> row(const TensorSlot& t, int r) const {
        return {params.data() + t.offset + static_cast<std::size_t>(r) * static_cast<std::size_t>(t.cols),
                static_cast<std::size_t>(t.cols)};
    }

    friend bool operator==(const LocalizerModel&, const LocalizerModel&) = default;
};

/// Gaussian weights with stddev `initScale`; layer-norm gains start at 1 and
/// biases at 0.
inline LocalizerModel init_model(const ModelShape& shape, std::uint64_t seed, double initScale) {
    LocalizerModel m(shape);
    m.seed = seed;
    Rng rng(seed);
    for (double& p : m.params) p = rng.normal(0.0, initScale);
    const auto L = m.layout();
    for (const TensorSlot* t : {&L.ln1Gain, &L.ln2Gain})
        for (double& g : m.tensor(*t)) g = 1.0;
    for (const TensorSlot* t : {&L.ln1Bias, &L.ln2Bias, &L.b1, &L.b2, &L.bOut})
        for (double& b : m.tensor(*t)) b = 0.0;
    return m;
}

inline void zero_output_head(LocalizerModel& m) {
    const auto L = m.layout();
    for (double& w : m.tensor(L.wOut)) w = 0.0;
    for (double& b : m.tensor(L.bOut)) b = 0.0;
}

} // namespace pano_nav
