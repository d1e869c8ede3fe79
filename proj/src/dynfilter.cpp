#include "fmanet/dynfilter.hpp"

#include <algorithm>
#include <cmath>

#include "fmanet/common.hpp"

namespace fmanet {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// kernel side length from a k^2 channel count; rejects even and non-square sizes
int kernel_side(int ksq) {
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ksq))));
    fm_check(k * k == ksq, "per-pixel kernel channels ", ksq, " are not a square");
    fm_check(k % 2 == 1, "kernel size must be odd, got ", k);
    return k;
}

// rank-3 video (TxHxW) is treated as single-channel rank-4
Tensor as_video4(const Tensor& x, const char* op) {
    if (x.rank() == 4) return x;
    fm_check(x.rank() == 3, op, ": input must be TxHxW or TxHxWxC, got ", x.shape_str());
    return x.reshaped({x.dim(0), x.dim(1), x.dim(2), 1});
}

Tensor lower_like(const Tensor& out4, const Tensor& original_input) {
    if (original_input.rank() == 4) return out4;
    std::vector<int> d(out4.dims().begin(), out4.dims().end() - 1);
    return out4.reshaped(d);
}

}  // namespace

namespace ops {

Tensor dyn_filter_strided(const Tensor& x_in, const Tensor& F, int stride) {
    const Tensor x = as_video4(x_in, "dyn_filter_strided");
    fm_check(F.rank() == 4, "dyn_filter_strided: kernels must be TxHxWxk^2, got ", F.shape_str());
    const int T = x.dim(0), Hx = x.dim(1), Wx = x.dim(2), C = x.dim(3);
    const int Ho = F.dim(1), Wo = F.dim(2);
    const int k = kernel_side(F.dim(3));
    fm_check(F.dim(0) == T, "dyn_filter_strided: kernel frames ", F.dim(0), " != input frames ", T);
    fm_check(stride >= 1, "dyn_filter_strided: stride must be >= 1, got ", stride);
    fm_check(Hx == Ho * stride && Wx == Wo * stride, "dyn_filter_strided: input ", x.shape_str(),
             " is not stride*", stride, " of kernel grid ", F.shape_str());
    const int r = k / 2, a = (stride - 1) / 2;

    Tensor y{{Ho, Wo, C}};
    parallel_for(Ho, [&](int ho) {
        for (int wo = 0; wo < Wo; ++wo) {
            double* yr = y.data() + (static_cast<int64_t>(ho) * Wo + wo) * C;
            for (int t = 0; t < T; ++t) {
                const double* Fr = F.data() + ((static_cast<int64_t>(t) * Ho + ho) * Wo + wo) * k * k;
                for (int ki = 0; ki < k * k; ++ki) {
                    const double fv = Fr[ki];
                    const int ih = clampi(stride * ho + a + ki / k - r, 0, Hx - 1);
                    const int iw = clampi(stride * wo + a + ki % k - r, 0, Wx - 1);
                    const double* xr = x.data() + ((static_cast<int64_t>(t) * Hx + ih) * Wx + iw) * C;
                    for (int c = 0; c < C; ++c) yr[c] += fv * xr[c];
                }
            }
        }
    });
    return lower_like(y, x_in);
}

std::tuple<Tensor, Tensor> dyn_filter_strided_vjp(const Tensor& x_in, const Tensor& F, int stride,
                                                  const Tensor& g_in) {
    const Tensor x = as_video4(x_in, "dyn_filter_strided_vjp");
    const Tensor g = g_in.rank() == 3 ? g_in : g_in.reshaped({g_in.dim(0), g_in.dim(1), 1});
    const int T = x.dim(0), Hx = x.dim(1), Wx = x.dim(2), C = x.dim(3);
    const int Ho = F.dim(1), Wo = F.dim(2);
    const int k = kernel_side(F.dim(3));
    const int r = k / 2, a = (stride - 1) / 2;

    Tensor gF{F.dims()};
    Tensor gx{x.dims()};
    parallel_for(T, [&](int t) {
        for (int ho = 0; ho < Ho; ++ho)
            for (int wo = 0; wo < Wo; ++wo) {
                const double* gr = g.data() + (static_cast<int64_t>(ho) * Wo + wo) * C;
                const double* Fr = F.data() + ((static_cast<int64_t>(t) * Ho + ho) * Wo + wo) * k * k;
                double* gFr = gF.data() + ((static_cast<int64_t>(t) * Ho + ho) * Wo + wo) * k * k;
                for (int ki = 0; ki < k * k; ++ki) {
                    const int ih = clampi(stride * ho + a + ki / k - r, 0, Hx - 1);
                    const int iw = clampi(stride * wo + a + ki % k - r, 0, Wx - 1);
                    const double* xr = x.data() + ((static_cast<int64_t>(t) * Hx + ih) * Wx + iw) * C;
                    double* gxr = gx.data() + ((static_cast<int64_t>(t) * Hx + ih) * Wx + iw) * C;
                    const double fv = Fr[ki];
                    double acc = 0.0;
                    for (int c = 0; c < C; ++c) {
                        acc += gr[c] * xr[c];
                        gxr[c] += gr[c] * fv;
                    }
                    gFr[ki] = acc;
                }
            }
    });
    return {x_in.rank() == 4 ? gx : gx.reshaped(x_in.dims()), gF};
}

Tensor dyn_filter_phased(const Tensor& x_in, const Tensor& F, int s) {
    const Tensor x = as_video4(x_in, "dyn_filter_phased");
    fm_check(F.rank() == 4, "dyn_filter_phased: kernels must be TxHxWx(s^2*k^2), got ", F.shape_str());
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    fm_check(s >= 1, "dyn_filter_phased: scale must be >= 1, got ", s);
    fm_check(F.dim(0) == T && F.dim(1) == H && F.dim(2) == W, "dyn_filter_phased: kernel grid ",
             F.shape_str(), " does not match input ", x.shape_str());
    fm_check(F.dim(3) % (s * s) == 0, "dyn_filter_phased: kernel channels ", F.dim(3),
             " not divisible by s^2=", s * s);
    const int k = kernel_side(F.dim(3) / (s * s));
    const int r = k / 2;

    Tensor y{{H * s, W * s, C}};
    parallel_for(H, [&](int h) {
        for (int w = 0; w < W; ++w)
            for (int phase = 0; phase < s * s; ++phase) {
                const int oy = h * s + phase / s, ox = w * s + phase % s;
                double* yr = y.data() + (static_cast<int64_t>(oy) * W * s + ox) * C;
                for (int t = 0; t < T; ++t) {
                    const double* Fr = F.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * F.dim(3) +
                                       static_cast<int64_t>(phase) * k * k;
                    for (int ki = 0; ki < k * k; ++ki) {
                        const double fv = Fr[ki];
                        const int ih = clampi(h + ki / k - r, 0, H - 1);
                        const int iw = clampi(w + ki % k - r, 0, W - 1);
                        const double* xr = x.data() + ((static_cast<int64_t>(t) * H + ih) * W + iw) * C;
                        for (int c = 0; c < C; ++c) yr[c] += fv * xr[c];
                    }
                }
            }
    });
    return lower_like(y, x_in);
}

std::tuple<Tensor, Tensor> dyn_filter_phased_vjp(const Tensor& x_in, const Tensor& F, int s,
                                                 const Tensor& g_in) {
    const Tensor x = as_video4(x_in, "dyn_filter_phased_vjp");
    const Tensor g = g_in.rank() == 3 ? g_in : g_in.reshaped({g_in.dim(0), g_in.dim(1), 1});
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const int k = kernel_side(F.dim(3) / (s * s));
    const int r = k / 2;

    Tensor gF{F.dims()};
    Tensor gx{x.dims()};
    parallel_for(T, [&](int t) {
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int phase = 0; phase < s * s; ++phase) {
                    const int oy = h * s + phase / s, ox = w * s + phase % s;
                    const double* gr = g.data() + (static_cast<int64_t>(oy) * W * s + ox) * C;
                    const double* Fr = F.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * F.dim(3) +
                                       static_cast<int64_t>(phase) * k * k;
                    double* gFr = gF.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * F.dim(3) +
                                  static_cast<int64_t>(phase) * k * k;
                    for (int ki = 0; ki < k * k; ++ki) {
                        const int ih = clampi(h + ki / k - r, 0, H - 1);
                        const int iw = clampi(w + ki % k - r, 0, W - 1);
                        const double* xr = x.data() + ((static_cast<int64_t>(t) * H + ih) * W + iw) * C;
                        double* gxr = gx.data() + ((static_cast<int64_t>(t) * H + ih) * W + iw) * C;
                        const double fv = Fr[ki];
                        double acc = 0.0;
                        for (int c = 0; c < C; ++c) {
                            acc += gr[c] * xr[c];
                            gxr[c] += gr[c] * fv;
                        }
                        gFr[ki] = acc;
                    }
                }
    });
    return {x_in.rank() == 4 ? gx : gx.reshaped(x_in.dims()), gF};
}

Tensor flow_upsample_scale(const Tensor& f, int s) {
    fm_check(f.rank() == 4 && f.dim(3) == 3, "flow_upsample_scale: expected TxHxWx3, got ",
             f.shape_str());
    const int T = f.dim(0), H = f.dim(1), W = f.dim(2);
    Tensor out{{T, H * s, W * s, 3}};
    for (int t = 0; t < T; ++t) {
        Tensor ft = slice(f, 0, t, 1).reshaped({H, W, 3});
        Tensor up = bilinear_upsample(ft, s);
        for (int h = 0; h < H * s; ++h)
            for (int w = 0; w < W * s; ++w) {
                out.at(t, h, w, 0) = up.at(h, w, 0) * s;
                out.at(t, h, w, 1) = up.at(h, w, 1) * s;
                out.at(t, h, w, 2) = up.at(h, w, 2);
            }
    }
    return out;
}

Tensor flow_upsample_scale_vjp(const Tensor& f, int s, const Tensor& g) {
    const int T = f.dim(0), H = f.dim(1), W = f.dim(2);
    Tensor gf{f.dims()};
    for (int t = 0; t < T; ++t) {
        Tensor gt = slice(g, 0, t, 1).reshaped({H * s, W * s, 3});
        Tensor scaled{{H * s, W * s, 3}};
        for (int h = 0; h < H * s; ++h)
            for (int w = 0; w < W * s; ++w) {
                scaled.at(h, w, 0) = gt.at(h, w, 0) * s;
                scaled.at(h, w, 1) = gt.at(h, w, 1) * s;
                scaled.at(h, w, 2) = gt.at(h, w, 2);
            }
        Tensor ft = slice(f, 0, t, 1).reshaped({H, W, 3});
        Tensor gft = bilinear_upsample_vjp(ft, s, scaled);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int c = 0; c < 3; ++c) gf.at(t, h, w, c) = gft.at(h, w, c);
    }
    return gf;
}

Tensor dynamic_filter_image(const Tensor& x, const Tensor& F) {
    Tensor x3 = x;
    if (x.rank() == 2) x3 = x.reshaped({x.dim(0), x.dim(1), 1});
    fm_check(x3.rank() == 3, "dynamic_filter_image: input must be HxW or HxWxC, got ", x.shape_str());
    Tensor x4 = x3.reshaped({1, x3.dim(0), x3.dim(1), x3.dim(2)});
    Tensor y = dyn_filter_strided(x4, F, 1);
    return x.rank() == 2 ? y.reshaped({x.dim(0), x.dim(1)}) : y;
}

Tensor dynamic_filter_video(const Tensor& x, const Tensor& F) { return dyn_filter_strided(x, F, 1); }

Tensor fgdf(const Tensor& x_in, const Tensor& f, const Tensor& F) {
    const Tensor x = as_video4(x_in, "fgdf");
    Tensor warped = warp_frames(x, f);
    Tensor y = dyn_filter_strided(warped, F, 1);
    return lower_like(y, x_in);
}

Tensor fgdf_downsample(const Tensor& Y_in, const Tensor& fY, const Tensor& KD, int s) {
    const Tensor Y = as_video4(Y_in, "fgdf_downsample");
    fm_check(s >= 1, "fgdf_downsample: scale must be >= 1, got ", s);
    fm_check(Y.dim(1) % s == 0 && Y.dim(2) % s == 0, "fgdf_downsample: HR dims ", Y.shape_str(),
             " not divisible by s=", s);
    fm_check(fY.rank() == 4 && fY.dim(3) == 3 && fY.dim(1) == Y.dim(1) / s && fY.dim(2) == Y.dim(2) / s,
             "fgdf_downsample: flow-mask must be TxHxWx3 at LR resolution, got ", fY.shape_str());
    Tensor fhr = flow_upsample_scale(fY, s);
    Tensor Yw = warp_frames(Y, fhr);
    Tensor y = dyn_filter_strided(Yw, KD, s);
    return lower_like(y, Y_in);
}

Tensor fgdf_upsample(const Tensor& X_in, const Tensor& fX, const Tensor& KR, int s) {
    const Tensor X = as_video4(X_in, "fgdf_upsample");
    Tensor Xw = warp_frames(X, fX);
    Tensor y = dyn_filter_phased(Xw, KR, s);
    return lower_like(y, X_in);
}

Tensor normalize_degradation(const Tensor& raw) { return sigmoid(raw); }

Tensor normalize_restoration(const Tensor& raw, int s) {
    fm_check(raw.rank() == 4, "normalize_restoration: expected TxHxWx(s^2*k^2), got ", raw.shape_str());
    fm_check(raw.dim(3) % (s * s) == 0, "normalize_restoration: channels ", raw.dim(3),
             " not divisible by s^2=", s * s);
    const int T = raw.dim(0), H = raw.dim(1), W = raw.dim(2);
    const int ksq = raw.dim(3) / (s * s);
    const int group = T * ksq;
    const double uniform = 1.0 / group;
    Tensor out{raw.dims()};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int phase = 0; phase < s * s; ++phase) {
                double m = 0.0;
                for (int t = 0; t < T; ++t)
                    for (int ki = 0; ki < ksq; ++ki) m += raw.at(t, h, w, phase * ksq + ki);
                m /= group;
                for (int t = 0; t < T; ++t)
                    for (int ki = 0; ki < ksq; ++ki)
                        out.at(t, h, w, phase * ksq + ki) = raw.at(t, h, w, phase * ksq + ki) - m + uniform;
            }
    return out;
}

Tensor normalize_restoration_vjp(const Tensor& raw, int s, const Tensor& g) {
    const int T = raw.dim(0), H = raw.dim(1), W = raw.dim(2);
    const int ksq = raw.dim(3) / (s * s);
    const int group = T * ksq;
    Tensor out{raw.dims()};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int phase = 0; phase < s * s; ++phase) {
                double m = 0.0;
                for (int t = 0; t < T; ++t)
                    for (int ki = 0; ki < ksq; ++ki) m += g.at(t, h, w, phase * ksq + ki);
                m /= group;
                for (int t = 0; t < T; ++t)
                    for (int ki = 0; ki < ksq; ++ki)
                        out.at(t, h, w, phase * ksq + ki) = g.at(t, h, w, phase * ksq + ki) - m;
            }
    return out;
}

}  // namespace ops

namespace ad {

Value dynamic_filter_image(Value x, Value F) {
    Tensor xv = x.val(), Fv = F.val();
    return x.tape->apply("dynamic_filter_image", {x, F}, ops::dynamic_filter_image(xv, Fv),
                         [xv, Fv](const Tensor& g) {
                             Tensor x3 = xv.rank() == 2 ? xv.reshaped({xv.dim(0), xv.dim(1), 1}) : xv;
                             Tensor x4 = x3.reshaped({1, x3.dim(0), x3.dim(1), x3.dim(2)});
                             Tensor g3 = g.rank() == 2 ? g.reshaped({g.dim(0), g.dim(1), 1}) : g;
                             auto [gx, gF] = ops::dyn_filter_strided_vjp(x4, Fv, 1, g3);
                             return std::vector<Tensor>{gx.reshaped(xv.dims()), gF};
                         });
}

Value dynamic_filter_video(Value x, Value F) {
    Tensor xv = x.val(), Fv = F.val();
    return x.tape->apply("dynamic_filter_video", {x, F}, ops::dynamic_filter_video(xv, Fv),
                         [xv, Fv](const Tensor& g) {
                             auto [gx, gF] = ops::dyn_filter_strided_vjp(xv, Fv, 1, g);
                             return std::vector<Tensor>{gx, gF};
                         });
}

Value fgdf(Value x, Value f, Value F) {
    Tensor xv = x.val(), fv = f.val(), Fv = F.val();
    return x.tape->apply("fgdf", {x, f, F}, ops::fgdf(xv, fv, Fv), [xv, fv, Fv](const Tensor& g) {
        const Tensor x4 = xv.rank() == 4 ? xv : xv.reshaped({xv.dim(0), xv.dim(1), xv.dim(2), 1});
        Tensor warped = ops::warp_frames(x4, fv);
        auto [gw, gF] = ops::dyn_filter_strided_vjp(warped, Fv, 1, g);
        auto [gx, gf] = ops::warp_frames_vjp(x4, fv, gw);
        return std::vector<Tensor>{gx.reshaped(xv.dims()), gf, gF};
    });
}

Value fgdf_downsample(Value Y, Value fY, Value KD, int s) {
    Tensor Yv = Y.val(), fv = fY.val(), Kv = KD.val();
    return Y.tape->apply("fgdf_downsample", {Y, fY, KD}, ops::fgdf_downsample(Yv, fv, Kv, s),
                         [Yv, fv, Kv, s](const Tensor& g) {
                             const Tensor Y4 =
                                 Yv.rank() == 4 ? Yv : Yv.reshaped({Yv.dim(0), Yv.dim(1), Yv.dim(2), 1});
                             Tensor fhr = ops::flow_upsample_scale(fv, s);
                             Tensor Yw = ops::warp_frames(Y4, fhr);
                             auto [gYw, gK] = ops::dyn_filter_strided_vjp(Yw, Kv, s, g);
                             auto [gY, gfhr] = ops::warp_frames_vjp(Y4, fhr, gYw);
                             Tensor gf = ops::flow_upsample_scale_vjp(fv, s, gfhr);
                             return std::vector<Tensor>{gY.reshaped(Yv.dims()), gf, gK};
                         });
}

Value fgdf_upsample(Value X, Value fX, Value KR, int s) {
    Tensor Xv = X.val(), fv = fX.val(), Kv = KR.val();
    return X.tape->apply("fgdf_upsample", {X, fX, KR}, ops::fgdf_upsample(Xv, fv, Kv, s),
                         [Xv, fv, Kv, s](const Tensor& g) {
                             const Tensor X4 =
                                 Xv.rank() == 4 ? Xv : Xv.reshaped({Xv.dim(0), Xv.dim(1), Xv.dim(2), 1});
                             Tensor Xw = ops::warp_frames(X4, fv);
                             auto [gXw, gK] = ops::dyn_filter_phased_vjp(Xw, Kv, s, g);
                             auto [gX, gf] = ops::warp_frames_vjp(X4, fv, gXw);
                             return std::vector<Tensor>{gX.reshaped(Xv.dims()), gf, gK};
                         });
}

Value flow_upsample_scale(Value f, int s) {
    Tensor fv = f.val();
    return f.tape->apply("flow_upsample_scale", {f}, ops::flow_upsample_scale(fv, s),
                         [fv, s](const Tensor& g) {
                             return std::vector<Tensor>{ops::flow_upsample_scale_vjp(fv, s, g)};
                         });
}

Value normalize_degradation(Value raw) { return sigmoid(raw); }

Value normalize_restoration(Value raw, int s) {
    Tensor rv = raw.val();
    return raw.tape->apply("normalize_restoration", {raw}, ops::normalize_restoration(rv, s),
                           [rv, s](const Tensor& g) {
                               return std::vector<Tensor>{ops::normalize_restoration_vjp(rv, s, g)};
                           });
}

}  // namespace ad

}  // namespace fmanet
