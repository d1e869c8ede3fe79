#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fmanet/autodiff.hpp"
#include "fmanet/rng.hpp"
#include "fmanet/tensor.hpp"

namespace testutil {

using fmanet::Rng;
using fmanet::Tensor;
namespace ad = fmanet::ad;

inline Tensor rand_tensor(Rng& rng, std::vector<int> dims, double lo = -1.0, double hi = 1.0) {
    Tensor t{std::move(dims)};
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// scalar probe: dot the op output with fixed pseudo-random weights
inline ad::Value probe(ad::Value v, uint64_t seed = 7) {
    Rng rng(seed);
    Tensor w = rand_tensor(rng, v.val().dims(), -1.0, 1.0);
    return ad::sum(ad::mul(v, v.tape->constant(w)));
}

using LossBuilder = std::function<ad::Value(ad::Tape&, std::vector<ad::Value>&)>;

// max over all input elements of |analytic - central difference| relative error
inline double max_fd_error(const std::vector<Tensor>& inputs, const LossBuilder& build,
                           double eps = 1e-5) {
    ad::Tape tape;
    std::vector<ad::Value> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t.clone(), true));
    ad::Value loss = build(tape, leaves);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (auto& l : leaves) grads.push_back(tape.grad(l));

    auto eval = [&](const std::vector<Tensor>& ins) {
        ad::Tape t2;
        std::vector<ad::Value> ls;
        for (const auto& t : ins) ls.push_back(t2.leaf(t.clone(), false));
        return build(t2, ls).val().item();
    };

    double max_err = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        for (int64_t j = 0; j < inputs[i].numel(); ++j) {
            std::vector<Tensor> plus, minus;
            for (size_t k = 0; k < inputs.size(); ++k) {
                plus.push_back(inputs[k].clone());
                minus.push_back(inputs[k].clone());
            }
            plus[i][j] += eps;
            minus[i][j] -= eps;
            const double fd = (eval(plus) - eval(minus)) / (2.0 * eps);
            const double a = grads[i][j];
            const double err = std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// ---- independent brute-force oracles (plain loops, no library kernels) ----

inline Tensor oracle_conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int H = x.dim(0), W = x.dim(1), Ci = x.dim(2), k = w.dim(0), Co = w.dim(3), r = k / 2;
    Tensor y{{H, W, Co}};
    for (int h = 0; h < H; ++h)
        for (int ww = 0; ww < W; ++ww)
            for (int co = 0; co < Co; ++co) {
                double acc = b[co];
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        for (int ci = 0; ci < Ci; ++ci)
                            acc += w.at(dy + r, dx + r, ci, co) *
                                   x.at(clampi(h + dy, 0, H - 1), clampi(ww + dx, 0, W - 1), ci);
                y.at(h, ww, co) = acc;
            }
    return y;
}

inline Tensor oracle_conv3d(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
    const int kt = w.dim(0), k = w.dim(1), Co = w.dim(4), rt = kt / 2, r = k / 2;
    Tensor y{{T, H, W, Co}};
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int ww = 0; ww < W; ++ww)
                for (int co = 0; co < Co; ++co) {
                    double acc = b[co];
                    for (int dt = -rt; dt <= rt; ++dt)
                        for (int dy = -r; dy <= r; ++dy)
                            for (int dx = -r; dx <= r; ++dx)
                                for (int ci = 0; ci < Ci; ++ci)
                                    acc += w.at(dt + rt, dy + r, dx + r, ci, co) *
                                           x.at(clampi(t + dt, 0, T - 1), clampi(h + dy, 0, H - 1),
                                                clampi(ww + dx, 0, W - 1), ci);
                    y.at(t, h, ww, co) = acc;
                }
    return y;
}

// direct bilinear sample with clamped coordinates
inline double oracle_bilinear_at(const Tensor& img, double y, double x, int c) {
    const int H = img.dim(0), W = img.dim(1);
    y = std::min(std::max(y, 0.0), static_cast<double>(H - 1));
    x = std::min(std::max(x, 0.0), static_cast<double>(W - 1));
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = y - y0, fx = x - x0;
    return (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
           fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
}

inline Tensor oracle_warp(const Tensor& x, const Tensor& flow, const Tensor& mask) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor y{{H, W, C}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                y.at(h, w, c) = mask.at(h, w, 0) *
                                oracle_bilinear_at(x, h + flow.at(h, w, 1), w + flow.at(h, w, 0), c);
    return y;
}

// Eq.-5 filtering with arbitrary stride; x TxHxW (single channel)
inline Tensor oracle_dyn_video_strided(const Tensor& x, const Tensor& F, int stride) {
    const int T = x.dim(0), Hx = x.dim(1), Wx = x.dim(2);
    const int Ho = F.dim(1), Wo = F.dim(2);
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(F.dim(3)))));
    const int r = k / 2, a = (stride - 1) / 2;
    Tensor y{{Ho, Wo}};
    for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t)
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        acc += F.at(t, ho, wo, (dy + r) * k + dx + r) *
                               x.at(t, clampi(stride * ho + a + dy, 0, Hx - 1),
                                    clampi(stride * wo + a + dx, 0, Wx - 1));
            y.at(ho, wo) = acc;
        }
    return y;
}

inline Tensor oracle_dyn_video(const Tensor& x, const Tensor& F) {
    return oracle_dyn_video_strided(x, F, 1);
}

// warp each frame by its pair (loops + direct bilinear), single channel
inline Tensor oracle_warp_frames(const Tensor& x, const Tensor& f) {
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor y{{T, H, W}};
    for (int t = 0; t < T; ++t) {
        Tensor frame{{H, W, 1}};
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) frame.at(h, w, 0) = x.at(t, h, w);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                y.at(t, h, w) = f.at(t, h, w, 2) * oracle_bilinear_at(frame, h + f.at(t, h, w, 1),
                                                                      w + f.at(t, h, w, 0), 0);
    }
    return y;
}

inline Tensor oracle_fgdf(const Tensor& x, const Tensor& f, const Tensor& F) {
    return oracle_dyn_video(oracle_warp_frames(x, f), F);
}

inline Tensor oracle_upsample_flow(const Tensor& f, int s) {
    const int T = f.dim(0), H = f.dim(1), W = f.dim(2);
    Tensor out{{T, H * s, W * s, 3}};
    for (int t = 0; t < T; ++t) {
        Tensor ft{{H, W, 3}};
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int c = 0; c < 3; ++c) ft.at(h, w, c) = f.at(t, h, w, c);
        for (int y = 0; y < H * s; ++y)
            for (int x = 0; x < W * s; ++x) {
                const double cy = (y + 0.5) / s - 0.5, cx = (x + 0.5) / s - 0.5;
                for (int c = 0; c < 3; ++c) {
                    const double v = oracle_bilinear_at(ft, cy, cx, c);
                    out.at(t, y, x, c) = c < 2 ? v * s : v;
                }
            }
    }
    return out;
}

inline Tensor oracle_fgdf_downsample(const Tensor& Y, const Tensor& fY, const Tensor& KD, int s) {
    const Tensor fhr = oracle_upsample_flow(fY, s);
    const Tensor Yw = oracle_warp_frames(Y, fhr);
    return oracle_dyn_video_strided(Yw, KD, s);
}

inline Tensor oracle_fgdf_upsample(const Tensor& X, const Tensor& fX, const Tensor& KR, int s) {
    const Tensor Xw = oracle_warp_frames(X, fX);
    const int T = X.dim(0), H = X.dim(1), W = X.dim(2);
    const int ksq = KR.dim(3) / (s * s);
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ksq))));
    const int r = k / 2;
    Tensor y{{H * s, W * s}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int py = 0; py < s; ++py)
                for (int px = 0; px < s; ++px) {
                    double acc = 0.0;
                    for (int t = 0; t < T; ++t)
                        for (int dy = -r; dy <= r; ++dy)
                            for (int dx = -r; dx <= r; ++dx)
                                acc += KR.at(t, h, w, (py * s + px) * ksq + (dy + r) * k + dx + r) *
                                       Xw.at(t, clampi(h + dy, 0, H - 1), clampi(w + dx, 0, W - 1));
                    y.at(h * s + py, w * s + px) = acc;
                }
    return y;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace testutil
