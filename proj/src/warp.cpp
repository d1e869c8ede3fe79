#include "fmanet/warp.hpp"

#include <algorithm>
#include <cmath>

#include "fmanet/common.hpp"

namespace fmanet {

namespace {

struct Sample {
    int h0, h1, w0, w1;
    double fy, fx;
    bool in_y, in_x;  // strictly inside: gradient flows through the coordinate
};

inline Sample locate(double hy, double hx, int H, int W) {
    Sample s;
    s.in_y = hy > 0.0 && hy < static_cast<double>(H - 1);
    s.in_x = hx > 0.0 && hx < static_cast<double>(W - 1);
    const double cy = std::min(std::max(hy, 0.0), static_cast<double>(H - 1));
    const double cx = std::min(std::max(hx, 0.0), static_cast<double>(W - 1));
    s.h0 = static_cast<int>(std::floor(cy));
    s.w0 = static_cast<int>(std::floor(cx));
    s.fy = cy - s.h0;
    s.fx = cx - s.w0;
    s.h1 = std::min(s.h0 + 1, H - 1);
    s.w1 = std::min(s.w0 + 1, W - 1);
    return s;
}

void check_warp_shapes(const Tensor& x, const Tensor& flow, const Tensor& mask) {
    fm_check(x.rank() == 3, "backward_warp: x must be HxWxC, got ", x.shape_str());
    fm_check(flow.rank() == 3 && flow.dim(2) == 2, "backward_warp: flow must be HxWx2, got ",
             flow.shape_str());
    fm_check(mask.rank() == 3 && mask.dim(2) == 1, "backward_warp: mask must be HxWx1, got ",
             mask.shape_str());
    fm_check(flow.dim(0) == x.dim(0) && flow.dim(1) == x.dim(1), "backward_warp: flow dims ",
             flow.shape_str(), " do not match image ", x.shape_str());
    fm_check(mask.dim(0) == x.dim(0) && mask.dim(1) == x.dim(1), "backward_warp: mask dims ",
             mask.shape_str(), " do not match image ", x.shape_str());
}

}  // namespace

namespace ops {

Tensor backward_warp(const Tensor& x, const Tensor& flow, const Tensor& mask) {
    check_warp_shapes(x, flow, mask);
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor y{{H, W, C}};
    parallel_for(H, [&](int h) {
        for (int w = 0; w < W; ++w) {
            const double u = flow.at(h, w, 0);
            const double v = flow.at(h, w, 1);
            const double m = mask.at(h, w, 0);
            const Sample s = locate(h + v, w + u, H, W);
            for (int c = 0; c < C; ++c) {
                const double top = (1.0 - s.fx) * x.at(s.h0, s.w0, c) + s.fx * x.at(s.h0, s.w1, c);
                const double bot = (1.0 - s.fx) * x.at(s.h1, s.w0, c) + s.fx * x.at(s.h1, s.w1, c);
                y.at(h, w, c) = m * ((1.0 - s.fy) * top + s.fy * bot);
            }
        }
    });
    return y;
}

std::tuple<Tensor, Tensor, Tensor> backward_warp_vjp(const Tensor& x, const Tensor& flow,
                                                     const Tensor& mask, const Tensor& g) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor gx{x.dims()}, gf{flow.dims()}, gm{mask.dims()};
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const double u = flow.at(h, w, 0);
            const double v = flow.at(h, w, 1);
            const double m = mask.at(h, w, 0);
            const Sample s = locate(h + v, w + u, H, W);
            double gmask = 0.0, gu = 0.0, gv = 0.0;
            for (int c = 0; c < C; ++c) {
                const double gv_out = g.at(h, w, c);
                const double x00 = x.at(s.h0, s.w0, c), x01 = x.at(s.h0, s.w1, c);
                const double x10 = x.at(s.h1, s.w0, c), x11 = x.at(s.h1, s.w1, c);
                const double top = (1.0 - s.fx) * x00 + s.fx * x01;
                const double bot = (1.0 - s.fx) * x10 + s.fx * x11;
                gmask += gv_out * ((1.0 - s.fy) * top + s.fy * bot);
                const double gs = gv_out * m;
                gx.at(s.h0, s.w0, c) += gs * (1.0 - s.fy) * (1.0 - s.fx);
                gx.at(s.h0, s.w1, c) += gs * (1.0 - s.fy) * s.fx;
                gx.at(s.h1, s.w0, c) += gs * s.fy * (1.0 - s.fx);
                gx.at(s.h1, s.w1, c) += gs * s.fy * s.fx;
                if (s.in_x) gu += gs * ((1.0 - s.fy) * (x01 - x00) + s.fy * (x11 - x10));
                if (s.in_y) gv += gs * ((1.0 - s.fx) * (x10 - x00) + s.fx * (x11 - x01));
            }
            gf.at(h, w, 0) = gu;
            gf.at(h, w, 1) = gv;
            gm.at(h, w, 0) = gmask;
        }
    }
    return {gx, gf, gm};
}

Tensor warp_frames(const Tensor& x, const Tensor& f) {
    fm_check(x.rank() == 4, "warp_frames: x must be TxHxWxC, got ", x.shape_str());
    fm_check(f.rank() == 4 && f.dim(3) == 3, "warp_frames: f must be TxHxWx3, got ", f.shape_str());
    fm_check(f.dim(0) == x.dim(0) && f.dim(1) == x.dim(1) && f.dim(2) == x.dim(2),
             "warp_frames: flow dims ", f.shape_str(), " do not match ", x.shape_str());
    const int T = x.dim(0);
    Tensor y{x.dims()};
    const int64_t frame = x.numel() / T;
    const int64_t fframe = f.numel() / T;
    for (int t = 0; t < T; ++t) {
        Tensor xt = ops::slice(x, 0, t, 1).reshaped({x.dim(1), x.dim(2), x.dim(3)});
        Tensor ft = ops::slice(f, 0, t, 1).reshaped({f.dim(1), f.dim(2), 3});
        Tensor flow = ops::slice(ft, 2, 0, 2);
        Tensor mask = ops::slice(ft, 2, 2, 1);
        Tensor yt = backward_warp(xt, flow, mask);
        std::copy(yt.data(), yt.data() + frame, y.data() + t * frame);
        (void)fframe;
    }
    return y;
}

std::tuple<Tensor, Tensor> warp_frames_vjp(const Tensor& x, const Tensor& f, const Tensor& g) {
    const int T = x.dim(0);
    Tensor gx{x.dims()}, gf{f.dims()};
    const int64_t frame = x.numel() / T;
    for (int t = 0; t < T; ++t) {
        Tensor xt = ops::slice(x, 0, t, 1).reshaped({x.dim(1), x.dim(2), x.dim(3)});
        Tensor ft = ops::slice(f, 0, t, 1).reshaped({f.dim(1), f.dim(2), 3});
        Tensor flow = ops::slice(ft, 2, 0, 2);
        Tensor mask = ops::slice(ft, 2, 2, 1);
        Tensor gt = ops::slice(g, 0, t, 1).reshaped({x.dim(1), x.dim(2), x.dim(3)});
        auto [gxt, gft, gmt] = backward_warp_vjp(xt, flow, mask, gt);
        std::copy(gxt.data(), gxt.data() + frame, gx.data() + t * frame);
        const int H = f.dim(1), W = f.dim(2);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                gf.at(t, h, w, 0) = gft.at(h, w, 0);
                gf.at(t, h, w, 1) = gft.at(h, w, 1);
                gf.at(t, h, w, 2) = gmt.at(h, w, 0);
            }
    }
    return {gx, gf};
}

Tensor warp_sequence(const Tensor& x, const Tensor& f, int n, WarpAggregate mode) {
    fm_check(n >= 1, "warp_sequence: need at least one flow-mask pair, got n=", n);
    fm_check(x.rank() == 4, "warp_sequence: x must be TxHxWxC, got ", x.shape_str());
    fm_check(f.rank() == 4 && f.dim(3) == 3 * n, "warp_sequence: f channels ", f.shape_str(),
             " != 3n with n=", n);
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor out = mode == WarpAggregate::Mean ? Tensor{{T, H, W, C}} : Tensor{{T, H, W, n * C}};
    for (int j = 0; j < n; ++j) {
        Tensor fj{{T, H, W, 3}};
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    for (int c = 0; c < 3; ++c) fj.at(t, h, w, c) = f.at(t, h, w, 3 * j + c);
        Tensor wj = warp_frames(x, fj);
        if (mode == WarpAggregate::Mean) {
            const int64_t m = out.numel();
            for (int64_t i = 0; i < m; ++i) out[i] += wj[i];
        } else {
            for (int t = 0; t < T; ++t)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        for (int c = 0; c < C; ++c) out.at(t, h, w, j * C + c) = wj.at(t, h, w, c);
        }
    }
    if (mode == WarpAggregate::Mean && n > 1) {
        const int64_t m = out.numel();
        const double inv = 1.0 / n;
        for (int64_t i = 0; i < m; ++i) out[i] *= inv;
    }
    return out;
}

}  // namespace ops

namespace ad {

Value backward_warp(Value x, Value flow, Value mask) {
    Tensor xv = x.val(), fv = flow.val(), mv = mask.val();
    return x.tape->apply("backward_warp", {x, flow, mask}, ops::backward_warp(xv, fv, mv),
                         [xv, fv, mv](const Tensor& g) {
                             auto [gx, gf, gm] = ops::backward_warp_vjp(xv, fv, mv, g);
                             return std::vector<Tensor>{gx, gf, gm};
                         });
}

Value warp_frames(Value x, Value f) {
    Tensor xv = x.val(), fv = f.val();
    return x.tape->apply("warp_frames", {x, f}, ops::warp_frames(xv, fv), [xv, fv](const Tensor& g) {
        auto [gx, gf] = ops::warp_frames_vjp(xv, fv, g);
        return std::vector<Tensor>{gx, gf};
    });
}

Value warp_sequence(Value x, Value f, int n, WarpAggregate mode) {
    fm_check(n >= 1, "warp_sequence: need at least one flow-mask pair, got n=", n);
    const int C = x.val().dim(3);
    std::vector<Value> copies;
    copies.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        // pair j occupies channels [3j, 3j+3)
        Value fj = slice(f, 3, 3 * j, 3);
        copies.push_back(warp_frames(x, fj));
    }
    if (mode == WarpAggregate::Concat) return concat(copies, 3);
    Value acc = copies[0];
    for (int j = 1; j < n; ++j) acc = add(acc, copies[j]);
    (void)C;
    return scale(acc, 1.0 / n);
}

}  // namespace ad

}  // namespace fmanet
