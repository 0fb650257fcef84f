#pragma once

// Finite-difference check of the localizer's analytic gradient.
//
// Everything runs in long double. In double, the rounding noise in
// (L+ - L-) / 2eps swamps the smallest gradients well before truncation
// error gets small enough, whatever eps is picked.
//
// A perturbed loss is rebuilt from the unperturbed pass: only the values the
// parameter feeds are recomputed. Downstream of the attention, the
// perturbation enters as an exact delta (the output head and the second
// feed-forward matrix are linear in what they receive), so perturbed and
// unperturbed losses share almost all of their rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/localizer/network.hpp"
#include "pano_nav/localizer/train.hpp"

namespace pano_nav {

namespace detail {

// Parameters the sample reads. Unread embedding rows leave the loss
// bit-identical, so their finite difference is exactly zero.
inline std::vector<bool> params_read(const ParamLayout& L, const TokenSequence& seq) {
    std::vector<bool> used(L.total, false);
    auto mark = [&](const TensorSlot& t, int r) {
        const std::size_t begin = t.offset + static_cast<std::size_t>(r) * static_cast<std::size_t>(t.cols);
        std::fill_n(used.begin() + static_cast<std::ptrdiff_t>(begin), t.cols, true);
    };
    mark(L.specialEmb, kSpecialCls);
    for (const auto& tok : seq.tokens) {
        if (tok.kind == TokenKind::Spatial) mark(L.classEmb, tok.classId);
        if (tok.kind == TokenKind::Sep) mark(L.specialEmb, kSpecialSep);
        if (tok.kind == TokenKind::Word) {
            mark(L.wordEmb, tok.wordId);
            mark(L.segmentEmb, tok.segment - 1);
        }
    }
    for (const auto* instr : {&seq.instrK, &seq.instrK1})
        for (int w : *instr) mark(L.wordEmb, w);
    std::fill(used.begin() + static_cast<std::ptrdiff_t>(L.ln1Gain.offset), used.end(), true);
    return used;
}

template <typename Real>
class Perturber {
public:
    Perturber(const net::Params<Real>& P, const TokenSequence& seq, std::vector<Real>& params, double psi)
        : P_(P), L_(P.layout), seq_(seq), params_(params), psi_(psi), base_(net::forward(P, seq)) {}

    /// Loss with parameter j shifted by s.
    Real loss_at(std::size_t j, Real s) {
        const int D = P_.shape.dim;
        const int F = P_.shape.hidden();
        const auto& b = base_;

        if (j >= L_.bOut.offset) {
            auto raw = b.raw;
            raw[j - L_.bOut.offset] += s;
            return loss(raw);
        }
        if (j >= L_.wOut.offset) {
            const auto [o, c] = rc(j, L_.wOut);
            auto raw = b.raw;
            raw[o] += s * b.y[c];
            return loss(raw);
        }
        if (j >= L_.b2.offset) return loss_dy(j - L_.b2.offset, s);
        if (j >= L_.w2.offset) {
            const auto [c, r] = rc(j, L_.w2);
            return loss_dy(c, s * b.u[r]);
        }
        if (j >= L_.b1.offset) return loss_dz(j - L_.b1.offset, s);
        if (j >= L_.w1.offset) {
            const auto [r, c] = rc(j, L_.w1);
            return loss_dz(r, s * b.m[c]);
        }
        if (j >= L_.ln2Gain.offset) {
            // One component of the normalized [CLS] row moves.
            const bool gain = j < L_.ln2Bias.offset;
            const std::size_t c = j - (gain ? L_.ln2Gain.offset : L_.ln2Bias.offset);
            const Real dm = gain ? s * b.ln2.xhat[c] : s;
            const auto w1 = P_.t(L_.w1);
            net::Vec<Real> du(static_cast<std::size_t>(F));
            for (std::size_t r = 0; r < du.size(); ++r)
                du[r] = net::gelu(b.z1[r] + w1[r * static_cast<std::size_t>(D) + c] * dm) - b.u[r];
            net::Vec<Real> dy(static_cast<std::size_t>(D), Real(0));
            net::gemv_add<Real>(P_.t(L_.w2), D, F, du, dy);
            return loss_y(dy);
        }
        if (j >= L_.wq.offset) {
            net::Vec<Real> q = b.q;
            net::Rows<Real> k = b.k, v = b.v;
            if (j < L_.wk.offset) {
                const auto [r, c] = rc(j, L_.wq);
                q[r] += s * b.n[0][c];
            } else {
                const bool key = j < L_.wv.offset;
                const auto [r, c] = rc(j, key ? L_.wk : L_.wv);
                auto& rows = key ? k : v;
                for (std::size_t i = 0; i < rows.size(); ++i) rows[i][r] += s * b.n[i][c];
            }
            return loss(net::head(P_, net::attend(P_, b.x[0], q, k, v)));
        }

        const Real saved = params_[j];
        params_[j] = saved + s;
        Real out;
        if (j >= L_.ln1Gain.offset) {
            out = loss(net::forward(P_, seq_).raw);
        } else {
            // Embedding entry: only the positions reading it move.
            const auto x = net::embed(P_, seq_);
            net::Vec<Real> q = b.q;
            net::Rows<Real> k = b.k, v = b.v;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] == b.x[i]) continue;
                net::NormCache<Real> nc;
                const auto n = net::layer_norm<Real>(x[i], P_.t(L_.ln1Gain), P_.t(L_.ln1Bias), nc);
                std::fill(k[i].begin(), k[i].end(), Real(0));
                std::fill(v[i].begin(), v[i].end(), Real(0));
                net::gemv_add<Real>(P_.t(L_.wk), D, D, n, k[i]);
                net::gemv_add<Real>(P_.t(L_.wv), D, D, n, v[i]);
                if (i == 0) {
                    std::fill(q.begin(), q.end(), Real(0));
                    net::gemv_add<Real>(P_.t(L_.wq), D, D, n, q);
                }
            }
            out = loss(net::head(P_, net::attend(P_, x[0], q, k, v)));
        }
        params_[j] = saved;
        return out;
    }

private:
    std::pair<std::size_t, std::size_t> rc(std::size_t j, const TensorSlot& t) const {
        const std::size_t local = j - t.offset;
        return {local / static_cast<std::size_t>(t.cols), local % static_cast<std::size_t>(t.cols)};
    }

    Real loss(const std::array<Real, 2>& raw) const { return net::loss<Real>(raw, psi_); }

    Real loss_y(const net::Vec<Real>& dy) const {
        auto raw = base_.raw;
        net::Vec<Real> draw(2, Real(0));
        net::gemv_add<Real>(P_.t(L_.wOut), 2, P_.shape.dim, dy, draw);
        raw[0] += draw[0];
        raw[1] += draw[1];
        return loss(raw);
    }

    // Shift of one component of the block output.
    Real loss_dy(std::size_t c, Real dy) const {
        auto raw = base_.raw;
        const auto wOut = P_.t(L_.wOut);
        const auto D = static_cast<std::size_t>(P_.shape.dim);
        raw[0] += wOut[c] * dy;
        raw[1] += wOut[D + c] * dy;
        return loss(raw);
    }

    // Shift of one hidden pre-activation.
    Real loss_dz(std::size_t r, Real dz) const {
        const Real du = net::gelu(base_.z1[r] + dz) - base_.u[r];
        const auto w2 = P_.t(L_.w2);
        const auto F = static_cast<std::size_t>(P_.shape.hidden());
        net::Vec<Real> dy(static_cast<std::size_t>(P_.shape.dim));
        for (std::size_t c = 0; c < dy.size(); ++c) dy[c] = w2[c * F + r] * du;
        return loss_y(dy);
    }

    const net::Params<Real>& P_;
    const ParamLayout& L_;
    const TokenSequence& seq_;
    std::vector<Real>& params_;
    double psi_;
    net::Cache<Real> base_;
};

} // namespace detail

/// Largest relative disagreement |a - n| / max(|a|, |n|, 1e-8) between the
/// analytic gradient and central differences with step eps, over every
/// parameter.
inline double grad_check(const LocalizerModel& model, const TrainingSample& sample, double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3))
        throw Error(ErrorKind::ValidationError, "grad_check step must lie in [1e-6, 1e-3]");
    using R = long double;
    std::vector<R> p(model.params.begin(), model.params.end());
    const net::Params<R> P(model.shape, p);

    std::vector<R> analytic(p.size(), R(0));
    net::backward<R>(P, sample.input, sample.psi, analytic);
    const auto used = detail::params_read(P.layout, sample.input);
    detail::Perturber<R> perturb(P, sample.input, p, sample.psi);

    const R h = static_cast<R>(eps);
    double worst = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const R numeric = used[j] ? (perturb.loss_at(j, h) - perturb.loss_at(j, -h)) / (2 * h) : R(0);
        const R denom = std::max({std::abs(analytic[j]), std::abs(numeric), R(1e-8)});
        worst = std::max(worst, static_cast<double>(std::abs(analytic[j] - numeric) / denom));
    }
    return worst;
}

} // namespace pano_nav
