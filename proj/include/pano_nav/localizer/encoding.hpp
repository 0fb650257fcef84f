#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <tuple>
#include <vector>

#include "pano_nav/core/angles.hpp"
#include "pano_nav/detector.hpp"
#include "pano_nav/localizer/model.hpp"
#include "pano_nav/panocam.hpp"
#include "pano_nav/vocab.hpp"

namespace pano_nav {

inline constexpr int kMaxSequenceLength = 64;

/// (sin theta, cos theta, sin phi, w, h). There is no cos phi component, so
/// phi and 180 - phi encode identically.
using SpatialEncoding = std::array<double, 5>;

inline SpatialEncoding spatial_encoding(const PanoramicAngles& a, double w, double h) {
    return {sin_deg(normalize_deg(a.theta)), cos_deg(normalize_deg(a.theta)), sin_deg(a.phi), w, h};
}

/// raw5 repeated and truncated to `dim` entries.
inline std::vector<double> tile(const SpatialEncoding& raw, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] = raw[static_cast<std::size_t>(i % 5)];
    return out;
}

struct SpatialToken {
    SpatialEncoding raw{};
    int classId = 0;
    std::vector<double> vector;
};

inline SpatialToken encode_spatial_token(const PanoramicAngles& angles, double w, double h, int classId,
                                         const LocalizerModel& model) {
    if (classId < 0 || classId >= model.shape.classCount)
        throw Error(ErrorKind::ValidationError, "class id outside the model vocabulary");
    SpatialToken tok;
    tok.raw = spatial_encoding(angles, w, h);
    tok.classId = classId;
    tok.vector = tile(tok.raw, model.shape.dim);
    const auto emb = model.row(model.layout().classEmb, classId);
    for (std::size_t i = 0; i < tok.vector.size(); ++i) tok.vector[i] += emb[i];
    return tok;
}

enum class TokenKind { Cls, Spatial, Sep, Word };

/// One input position, kept symbolic so the network can route gradients back
/// into the embedding tables.
struct Token {
    TokenKind kind = TokenKind::Cls;
    SpatialEncoding raw{};  // Spatial
    int classId = -1;       // Spatial
    int wordId = -1;        // Word
    int segment = 0;        // 0 spatial/special, 1 current instruction, 2 next instruction

    friend bool operator==(const Token&, const Token&) = default;
};

/// [CLS] spatial... [SEP] L_k L_{k+1} [SEP]. [CLS] also carries the mean
/// word embedding of each instruction, so the pooled query sees the text.
struct TokenSequence {
    std::vector<Token> tokens;
    std::vector<int> instrK;
    std::vector<int> instrK1;

    std::size_t size() const { return tokens.size(); }
    std::vector<int> segment_ids() const {
        std::vector<int> ids;
        for (const auto& t : tokens) ids.push_back(t.segment);
        return ids;
    }

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

namespace detail {

inline auto detection_key(const Detection& d) {
    return std::make_tuple(d.box.p, d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.classId, d.confidence,
                           d.sourceObjectId.value_or(-1));
}

} // namespace detail

/// Canonical input sequence. Detections beyond the length cap are dropped
/// lowest-confidence first; survivors are ordered by (p, theta).
inline TokenSequence build_input(std::vector<Detection> detections, const CameraIntrinsics& cam, double pitchDeg,
                                 const std::vector<int>& instrK, const std::vector<int>& instrK1,
                                 int maxLength = kMaxSequenceLength) {
    TokenSequence seq;
    seq.instrK = instrK;
    seq.instrK1 = instrK1;
    const int textLen = static_cast<int>(instrK.size() + instrK1.size());
    const int room = std::max(0, maxLength - 3 - textLen);

    if (static_cast<int>(detections.size()) > room) {
        std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            return detail::detection_key(a) < detail::detection_key(b);
        });
        detections.resize(static_cast<std::size_t>(room));
    }

    struct Entry {
        double theta;
        Detection det;
        PanoramicAngles angles;
    };
    std::vector<Entry> entries;
    for (const auto& d : detections) {
        const auto a = to_panoramic(d.box, cam, pitchDeg);
        entries.push_back({a.theta, d, a});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.det.box.p != b.det.box.p) return a.det.box.p < b.det.box.p;
        if (a.theta != b.theta) return a.theta < b.theta;
        return detail::detection_key(a.det) < detail::detection_key(b.det);
    });

    seq.tokens.push_back({TokenKind::Cls});
    for (const auto& e : entries) {
        Token t;
        t.kind = TokenKind::Spatial;
        t.raw = spatial_encoding(e.angles, e.det.box.w, e.det.box.h);
        t.classId = e.det.label();
        seq.tokens.push_back(t);
    }
    seq.tokens.push_back({TokenKind::Sep});
    for (int w : instrK) seq.tokens.push_back({TokenKind::Word, {}, -1, w, 1});
    for (int w : instrK1) seq.tokens.push_back({TokenKind::Word, {}, -1, w, 2});
    seq.tokens.push_back({TokenKind::Sep});
    return seq;
}

} // namespace pano_nav
