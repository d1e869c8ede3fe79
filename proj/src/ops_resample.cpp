#include <algorithm>
#include <cmath>

#include "fmanet/common.hpp"
#include "fmanet/ops.hpp"

namespace fmanet::ops {

namespace {

struct Taps {
    int i0, i1;
    double f;  // weight of i1
};

// source coordinate for output index i at integer scale s, align-corners=false
inline Taps bilinear_taps(int i, int s, int in_size) {
    const double c = (i + 0.5) / s - 0.5;
    const double cc = std::min(std::max(c, 0.0), static_cast<double>(in_size - 1));
    int i0 = static_cast<int>(std::floor(cc));
    double f = cc - i0;
    int i1 = i0 + 1;
    if (i1 > in_size - 1) {
        i1 = in_size - 1;
        if (i0 > in_size - 1) i0 = in_size - 1;
    }
    return {i0, i1, f};
}

// Catmull-Rom weights (a = -0.5) for fractional offset t in [0,1)
inline void cubic_weights(double t, double w[4]) {
    const double a = -0.5;
    const double t2 = t * t, t3 = t2 * t;
    w[0] = a * (t3 - 2.0 * t2 + t);
    w[1] = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0;
    w[2] = -(a + 2.0) * t3 + (2.0 * a + 3.0) * t2 - a * t;
    w[3] = a * (t3 - t2);
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, int s) {
    fm_check(x.rank() == 3, "bilinear_upsample: expected HxWxC, got ", x.shape_str());
    fm_check(s >= 1, "bilinear_upsample: scale must be >= 1, got ", s);
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (s == 1) return x.clone();
    Tensor y{{H * s, W * s, C}};
    parallel_for(H * s, [&](int oy) {
        const Taps ty = bilinear_taps(oy, s, H);
        for (int ox = 0; ox < W * s; ++ox) {
            const Taps tx = bilinear_taps(ox, s, W);
            for (int c = 0; c < C; ++c) {
                const double top = (1.0 - tx.f) * x.at(ty.i0, tx.i0, c) + tx.f * x.at(ty.i0, tx.i1, c);
                const double bot = (1.0 - tx.f) * x.at(ty.i1, tx.i0, c) + tx.f * x.at(ty.i1, tx.i1, c);
                y.at(oy, ox, c) = (1.0 - ty.f) * top + ty.f * bot;
            }
        }
    });
    return y;
}

Tensor bilinear_upsample_vjp(const Tensor& x, int s, const Tensor& g) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (s == 1) return g.clone();
    Tensor gx{x.dims()};
    for (int oy = 0; oy < H * s; ++oy) {
        const Taps ty = bilinear_taps(oy, s, H);
        for (int ox = 0; ox < W * s; ++ox) {
            const Taps tx = bilinear_taps(ox, s, W);
            for (int c = 0; c < C; ++c) {
                const double gv = g.at(oy, ox, c);
                gx.at(ty.i0, tx.i0, c) += (1.0 - ty.f) * (1.0 - tx.f) * gv;
                gx.at(ty.i0, tx.i1, c) += (1.0 - ty.f) * tx.f * gv;
                gx.at(ty.i1, tx.i0, c) += ty.f * (1.0 - tx.f) * gv;
                gx.at(ty.i1, tx.i1, c) += ty.f * tx.f * gv;
            }
        }
    }
    return gx;
}

Tensor bicubic_resize(const Tensor& x, int out_h, int out_w) {
    fm_check(x.rank() == 3, "bicubic_resize: expected HxWxC, got ", x.shape_str());
    fm_check(out_h >= 1 && out_w >= 1, "bicubic_resize: bad output size ", out_h, "x", out_w);
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (out_h == H && out_w == W) return x.clone();
    Tensor y{{out_h, out_w, C}};
    const double sy = static_cast<double>(H) / out_h;
    const double sx = static_cast<double>(W) / out_w;
    parallel_for(out_h, [&](int oy) {
        const double cy = (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(cy));
        double wy[4];
        cubic_weights(cy - y0, wy);
        for (int ox = 0; ox < out_w; ++ox) {
            const double cx = (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(cx));
            double wx[4];
            cubic_weights(cx - x0, wx);
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const int iy = std::min(std::max(y0 - 1 + j, 0), H - 1);
                    double row = 0.0;
                    for (int i = 0; i < 4; ++i) {
                        const int ix = std::min(std::max(x0 - 1 + i, 0), W - 1);
                        row += wx[i] * x.at(iy, ix, c);
                    }
                    acc += wy[j] * row;
                }
                y.at(oy, ox, c) = acc;
            }
        }
    });
    return y;
}

}  // namespace fmanet::ops
