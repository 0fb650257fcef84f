#pragma once

// Forward and backward passes of the localizer, generic over the scalar type
// so the finite-difference check can run in extended precision.
//
// Only the [CLS] row feeds the output head. With a single block that row
// depends on the other positions solely through their keys and values, so
// the second norm and the feed-forward layer run for [CLS] alone. This is
// exact, not an approximation.
//
// The pass is split into stages (embed, norm + projections, attention, head)
// so callers can restart from the first stage a parameter touches.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "pano_nav/core/angles.hpp"
#include "pano_nav/core/error.hpp"
#include "pano_nav/localizer/direction.hpp"
#include "pano_nav/localizer/encoding.hpp"
#include "pano_nav/localizer/model.hpp"

namespace pano_nav {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kDegenerateNorm = 1e-8;

namespace net {

template <typename Real>
using Vec = std::vector<Real>;
template <typename Real>
using Rows = std::vector<std::vector<Real>>;

// y += A x, A is rows x cols row-major.
template <typename Real>
void gemv_add(std::span<const Real> A, int rows, int cols, std::span<const Real> x, std::span<Real> y) {
    for (int r = 0; r < rows; ++r) {
        const Real* a = A.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        Real acc = 0;
        for (int c = 0; c < cols; ++c) acc += a[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] += acc;
    }
}

// x += A^T y.
template <typename Real>
void gemv_t_add(std::span<const Real> A, int rows, int cols, std::span<const Real> y, std::span<Real> x) {
    for (int r = 0; r < rows; ++r) {
        const Real* a = A.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        const Real yr = y[static_cast<std::size_t>(r)];
        if (yr == 0) continue;
        for (int c = 0; c < cols; ++c) x[static_cast<std::size_t>(c)] += a[c] * yr;
    }
}

// G += y x^T.
template <typename Real>
void outer_add(std::span<Real> G, int rows, int cols, std::span<const Real> y, std::span<const Real> x) {
    for (int r = 0; r < rows; ++r) {
        Real* g = G.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        const Real yr = y[static_cast<std::size_t>(r)];
        if (yr == 0) continue;
        for (int c = 0; c < cols; ++c) g[c] += yr * x[static_cast<std::size_t>(c)];
    }
}

template <typename Real>
struct NormCache {
    Vec<Real> xhat;
    Real invStd = 0;
};

template <typename Real>
Vec<Real> layer_norm(std::span<const Real> x, std::span<const Real> gain, std::span<const Real> bias,
                     NormCache<Real>& cache) {
    const std::size_t n = x.size();
    Real mean = 0;
    for (Real v : x) mean += v;
    mean /= static_cast<Real>(n);
    Real var = 0;
    for (Real v : x) var += (v - mean) * (v - mean);
    var /= static_cast<Real>(n);
    cache.invStd = 1 / std::sqrt(var + static_cast<Real>(kLayerNormEps));
    cache.xhat.resize(n);
    Vec<Real> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        cache.xhat[i] = (x[i] - mean) * cache.invStd;
        out[i] = gain[i] * cache.xhat[i] + bias[i];
    }
    return out;
}

/// Accumulates gain/bias gradients and returns the input gradient.
template <typename Real>
Vec<Real> layer_norm_backward(std::span<const Real> dOut, std::span<const Real> gain, const NormCache<Real>& cache,
                              std::span<Real> dGain, std::span<Real> dBias) {
    const std::size_t n = dOut.size();
    Vec<Real> dxhat(n);
    Real meanD = 0, meanDX = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dGain[i] += dOut[i] * cache.xhat[i];
        dBias[i] += dOut[i];
        dxhat[i] = dOut[i] * gain[i];
        meanD += dxhat[i];
        meanDX += dxhat[i] * cache.xhat[i];
    }
    meanD /= static_cast<Real>(n);
    meanDX /= static_cast<Real>(n);
    Vec<Real> dx(n);
    for (std::size_t i = 0; i < n; ++i) dx[i] = cache.invStd * (dxhat[i] - meanD - cache.xhat[i] * meanDX);
    return dx;
}

// tanh approximation of GELU; smooth, so finite differences stay well behaved.
template <typename Real>
Real gelu(Real z) {
    const Real c = static_cast<Real>(0.79788456080286535588L);  // sqrt(2/pi)
    return Real(0.5) * z * (1 + std::tanh(c * (z + Real(0.044715) * z * z * z)));
}

template <typename Real>
Real gelu_grad(Real z) {
    const Real c = static_cast<Real>(0.79788456080286535588L);
    const Real t = std::tanh(c * (z + Real(0.044715) * z * z * z));
    return Real(0.5) * (1 + t) + Real(0.5) * z * (1 - t * t) * c * (1 + 3 * Real(0.044715) * z * z);
}

/// Parameter views for one model shape.
template <typename Real>
struct Params {
    ModelShape shape;
    ParamLayout layout;
    std::span<const Real> all;

    Params(const ModelShape& s, std::span<const Real> p) : shape(s), layout(s), all(p) {}

    std::span<const Real> t(const TensorSlot& slot) const { return all.subspan(slot.offset, slot.size()); }
    std::span<const Real> row(const TensorSlot& slot, int r) const {
        return all.subspan(slot.offset + static_cast<std::size_t>(r) * static_cast<std::size_t>(slot.cols),
                           static_cast<std::size_t>(slot.cols));
    }
};

template <typename Real>
Rows<Real> embed(const Params<Real>& P, const TokenSequence& seq) {
    const auto& L = P.layout;
    const int D = P.shape.dim;
    Rows<Real> x;
    x.reserve(seq.size());
    auto addRow = [&](Vec<Real>& v, const TensorSlot& t, int r, Real scale) {
        const auto row = P.row(t, r);
        for (int i = 0; i < D; ++i) v[static_cast<std::size_t>(i)] += scale * row[static_cast<std::size_t>(i)];
    };
    for (const auto& tok : seq.tokens) {
        Vec<Real> v(static_cast<std::size_t>(D), Real(0));
        switch (tok.kind) {
        case TokenKind::Cls:
            addRow(v, L.specialEmb, kSpecialCls, 1);
            for (const auto* instr : {&seq.instrK, &seq.instrK1})
                for (int w : *instr) addRow(v, L.wordEmb, w, Real(1) / static_cast<Real>(instr->size()));
            break;
        case TokenKind::Spatial:
            for (int i = 0; i < D; ++i) v[static_cast<std::size_t>(i)] = static_cast<Real>(tok.raw[static_cast<std::size_t>(i % 5)]);
            addRow(v, L.classEmb, tok.classId, 1);
            break;
        case TokenKind::Sep:
            addRow(v, L.specialEmb, kSpecialSep, 1);
            break;
        case TokenKind::Word:
            addRow(v, L.wordEmb, tok.wordId, 1);
            addRow(v, L.segmentEmb, tok.segment - 1, 1);
            break;
        }
        x.push_back(std::move(v));
    }
    return x;
}

template <typename Real>
struct Cache {
    Rows<Real> x;  // inputs
    Rows<Real> n;  // LN1 outputs
    std::vector<NormCache<Real>> ln1;
    Vec<Real> q;
    Rows<Real> k, v;
    Rows<Real> attn;  // per head, softmax weights over positions
    Vec<Real> h0;     // [CLS] after the attention residual
    NormCache<Real> ln2;
    Vec<Real> m, z1, u, y;
    std::array<Real, 2> raw{};
};

template <typename Real>
void stage_norm(const Params<Real>& P, Cache<Real>& c) {
    const std::size_t T = c.x.size();
    c.n.resize(T);
    c.ln1.resize(T);
    for (std::size_t i = 0; i < T; ++i)
        c.n[i] = layer_norm<Real>(c.x[i], P.t(P.layout.ln1Gain), P.t(P.layout.ln1Bias), c.ln1[i]);
}

template <typename Real>
Rows<Real> project_all(const Params<Real>& P, const TensorSlot& w, const Rows<Real>& n) {
    const int D = P.shape.dim;
    Rows<Real> out(n.size(), Vec<Real>(static_cast<std::size_t>(D), Real(0)));
    for (std::size_t i = 0; i < n.size(); ++i) gemv_add<Real>(P.t(w), D, D, n[i], out[i]);
    return out;
}

template <typename Real>
Vec<Real> project_query(const Params<Real>& P, const Rows<Real>& n) {
    Vec<Real> q(static_cast<std::size_t>(P.shape.dim), Real(0));
    gemv_add<Real>(P.t(P.layout.wq), P.shape.dim, P.shape.dim, n[0], q);
    return q;
}

/// Attention for the [CLS] query; fills attn and returns h0 = x0 + heads.
template <typename Real>
Vec<Real> attend(const Params<Real>& P, const Vec<Real>& x0, const Vec<Real>& q, const Rows<Real>& k,
                 const Rows<Real>& v, Rows<Real>* attnOut = nullptr) {
    const int H = P.shape.heads();
    const int dh = P.shape.head_dim();
    const std::size_t T = k.size();
    const Real scale = 1 / std::sqrt(static_cast<Real>(dh));
    Rows<Real> attn(static_cast<std::size_t>(H), Vec<Real>(T, Real(0)));
    Vec<Real> h0 = x0;
    for (int h = 0; h < H; ++h) {
        const std::size_t off = static_cast<std::size_t>(h * dh);
        Vec<Real>& a = attn[static_cast<std::size_t>(h)];
        Real mx = -std::numeric_limits<Real>::infinity();
        for (std::size_t i = 0; i < T; ++i) {
            Real s = 0;
            for (int j = 0; j < dh; ++j) s += q[off + j] * k[i][off + j];
            a[i] = s * scale;
            mx = std::max(mx, a[i]);
        }
        Real sum = 0;
        for (auto& ai : a) {
            ai = std::exp(ai - mx);
            sum += ai;
        }
        for (auto& ai : a) ai /= sum;
        for (std::size_t i = 0; i < T; ++i)
            for (int j = 0; j < dh; ++j) h0[off + j] += a[i] * v[i][off + j];
    }
    if (attnOut) *attnOut = std::move(attn);
    return h0;
}

/// LN2, feed-forward and output head on the [CLS] row.
template <typename Real>
std::array<Real, 2> head(const Params<Real>& P, const Vec<Real>& h0, Cache<Real>* c = nullptr) {
    const auto& L = P.layout;
    const int D = P.shape.dim;
    const int F = P.shape.hidden();
    NormCache<Real> ln2;
    Vec<Real> m = layer_norm<Real>(h0, P.t(L.ln2Gain), P.t(L.ln2Bias), ln2);
    Vec<Real> z1(P.t(L.b1).begin(), P.t(L.b1).end());
    gemv_add<Real>(P.t(L.w1), F, D, m, z1);
    Vec<Real> u(static_cast<std::size_t>(F));
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = gelu(z1[i]);
    Vec<Real> y(P.t(L.b2).begin(), P.t(L.b2).end());
    gemv_add<Real>(P.t(L.w2), D, F, u, y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h0[i];
    Vec<Real> raw(P.t(L.bOut).begin(), P.t(L.bOut).end());
    gemv_add<Real>(P.t(L.wOut), 2, D, y, raw);
    if (c) {
        c->ln2 = std::move(ln2);
        c->m = std::move(m);
        c->z1 = std::move(z1);
        c->u = std::move(u);
        c->y = std::move(y);
    }
    return {raw[0], raw[1]};
}

template <typename Real>
Cache<Real> forward(const Params<Real>& P, const TokenSequence& seq) {
    if (seq.size() == 0 || seq.tokens.front().kind != TokenKind::Cls)
        throw Error(ErrorKind::ValidationError, "token sequence must start with [CLS]");
    Cache<Real> c;
    c.x = embed(P, seq);
    stage_norm(P, c);
    c.k = project_all(P, P.layout.wk, c.n);
    c.v = project_all(P, P.layout.wv, c.n);
    c.q = project_query(P, c.n);
    c.h0 = attend(P, c.x[0], c.q, c.k, c.v, &c.attn);
    c.raw = head(P, c.h0, &c);
    return c;
}

template <typename Real>
Real loss(std::array<Real, 2> raw, double psiDeg) {
    const Real a = raw[0] - static_cast<Real>(sin_deg(psiDeg));
    const Real b = raw[1] - static_cast<Real>(cos_deg(psiDeg));
    return a * a + b * b;
}

/// Adds d loss / d params into `grad` and returns the loss.
template <typename Real>
Real backward(const Params<Real>& P, const TokenSequence& seq, double psiDeg, std::span<Real> grad) {
    const auto& L = P.layout;
    const int D = P.shape.dim;
    const int H = P.shape.heads();
    const int dh = P.shape.head_dim();
    const int F = P.shape.hidden();
    const Cache<Real> c = forward(P, seq);
    const std::size_t T = seq.size();
    const auto Dz = static_cast<std::size_t>(D);
    auto g = [&](const TensorSlot& t) { return grad.subspan(t.offset, t.size()); };

    const std::array<Real, 2> dRaw{2 * (c.raw[0] - static_cast<Real>(sin_deg(psiDeg))),
                                   2 * (c.raw[1] - static_cast<Real>(cos_deg(psiDeg)))};
    g(L.bOut)[0] += dRaw[0];
    g(L.bOut)[1] += dRaw[1];
    outer_add<Real>(g(L.wOut), 2, D, dRaw, c.y);
    Vec<Real> dy(Dz, Real(0));
    gemv_t_add<Real>(P.t(L.wOut), 2, D, dRaw, dy);

    // Feed-forward branch.
    for (std::size_t i = 0; i < Dz; ++i) g(L.b2)[i] += dy[i];
    outer_add<Real>(g(L.w2), D, F, dy, c.u);
    Vec<Real> du(static_cast<std::size_t>(F), Real(0));
    gemv_t_add<Real>(P.t(L.w2), D, F, dy, du);
    Vec<Real> dz1(static_cast<std::size_t>(F));
    for (std::size_t i = 0; i < dz1.size(); ++i) {
        dz1[i] = du[i] * gelu_grad(c.z1[i]);
        g(L.b1)[i] += dz1[i];
    }
    outer_add<Real>(g(L.w1), F, D, dz1, c.m);
    Vec<Real> dm(Dz, Real(0));
    gemv_t_add<Real>(P.t(L.w1), F, D, dz1, dm);
    Vec<Real> dh0 = layer_norm_backward<Real>(dm, P.t(L.ln2Gain), c.ln2, g(L.ln2Gain), g(L.ln2Bias));
    for (std::size_t i = 0; i < Dz; ++i) dh0[i] += dy[i];

    // Attention: dh0 reaches x0 through the residual and every position
    // through the keys and values.
    Rows<Real> dx(T, Vec<Real>(Dz, Real(0)));
    dx[0] = dh0;
    Vec<Real> dq(Dz, Real(0));
    Rows<Real> dk(T, Vec<Real>(Dz, Real(0)));
    Rows<Real> dv(T, Vec<Real>(Dz, Real(0)));
    const Real scale = 1 / std::sqrt(static_cast<Real>(dh));
    for (int h = 0; h < H; ++h) {
        const std::size_t off = static_cast<std::size_t>(h * dh);
        const Vec<Real>& a = c.attn[static_cast<std::size_t>(h)];
        Vec<Real> da(T, Real(0));
        Real weighted = 0;
        for (std::size_t i = 0; i < T; ++i) {
            for (int j = 0; j < dh; ++j) {
                da[i] += dh0[off + j] * c.v[i][off + j];
                dv[i][off + j] += a[i] * dh0[off + j];
            }
            weighted += a[i] * da[i];
        }
        for (std::size_t i = 0; i < T; ++i) {
            const Real ds = a[i] * (da[i] - weighted) * scale;
            if (ds == 0) continue;
            for (int j = 0; j < dh; ++j) {
                dq[off + j] += ds * c.k[i][off + j];
                dk[i][off + j] += ds * c.q[off + j];
            }
        }
    }

    Rows<Real> dn(T, Vec<Real>(Dz, Real(0)));
    outer_add<Real>(g(L.wq), D, D, dq, c.n[0]);
    gemv_t_add<Real>(P.t(L.wq), D, D, dq, dn[0]);
    for (std::size_t i = 0; i < T; ++i) {
        outer_add<Real>(g(L.wk), D, D, dk[i], c.n[i]);
        gemv_t_add<Real>(P.t(L.wk), D, D, dk[i], dn[i]);
        outer_add<Real>(g(L.wv), D, D, dv[i], c.n[i]);
        gemv_t_add<Real>(P.t(L.wv), D, D, dv[i], dn[i]);
        const Vec<Real> dxi = layer_norm_backward<Real>(dn[i], P.t(L.ln1Gain), c.ln1[i], g(L.ln1Gain), g(L.ln1Bias));
        for (std::size_t j = 0; j < Dz; ++j) dx[i][j] += dxi[j];
    }

    // Embedding tables.
    auto addRow = [&](const TensorSlot& t, int r, const Vec<Real>& d, Real s) {
        auto rowGrad = g(t).subspan(static_cast<std::size_t>(r) * Dz, Dz);
        for (std::size_t j = 0; j < Dz; ++j) rowGrad[j] += s * d[j];
    };
    for (std::size_t i = 0; i < T; ++i) {
        const Token& tok = seq.tokens[i];
        switch (tok.kind) {
        case TokenKind::Cls:
            addRow(L.specialEmb, kSpecialCls, dx[i], 1);
            for (const auto* instr : {&seq.instrK, &seq.instrK1})
                for (int w : *instr) addRow(L.wordEmb, w, dx[i], Real(1) / static_cast<Real>(instr->size()));
            break;
        case TokenKind::Spatial:
            addRow(L.classEmb, tok.classId, dx[i], 1);
            break;
        case TokenKind::Sep:
            addRow(L.specialEmb, kSpecialSep, dx[i], 1);
            break;
        case TokenKind::Word:
            addRow(L.wordEmb, tok.wordId, dx[i], 1);
            addRow(L.segmentEmb, tok.segment - 1, dx[i], 1);
            break;
        }
    }
    return loss<Real>(c.raw, psiDeg);
}

} // namespace net

/// Input vectors of every position.
inline std::vector<std::vector<double>> embed(const LocalizerModel& model, const TokenSequence& seq) {
    return net::embed(net::Params<double>(model.shape, model.params), seq);
}

/// Squared error against (sin psi, cos psi).
inline double loss(std::array<double, 2> raw, double psiDeg) { return net::loss<double>(raw, psiDeg); }

/// Unnormalized 2-vector from the output head.
inline std::array<double, 2> predict_raw(const LocalizerModel& model, const TokenSequence& seq) {
    return net::forward(net::Params<double>(model.shape, model.params), seq).raw;
}

/// Unit-norm direction; raw outputs shorter than 1e-8 fall back to (0, 1).
inline GoalDirection predict(const LocalizerModel& model, const TokenSequence& seq) {
    const auto raw = predict_raw(model, seq);
    if (!std::isfinite(raw[0]) || !std::isfinite(raw[1]))
        throw Error(ErrorKind::NonFiniteOutput, "localizer produced a non-finite output");
    const double norm = std::hypot(raw[0], raw[1]);
    if (norm < kDegenerateNorm) return {0.0, 1.0};
    return {raw[0] / norm, raw[1] / norm};
}

/// Adds d loss / d params for one sample into `grad`; returns the loss.
inline double backward(const LocalizerModel& model, const TokenSequence& seq, double psiDeg, std::span<double> grad) {
    return net::backward(net::Params<double>(model.shape, model.params), seq, psiDeg, grad);
}

} // namespace pano_nav
