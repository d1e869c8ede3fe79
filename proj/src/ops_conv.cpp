#include <algorithm>
#include <vector>

#include "fmanet/common.hpp"
#include "fmanet/ops.hpp"

namespace fmanet::ops {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

Tensor pad_replicate2d(const Tensor& x, int r) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor y{{H + 2 * r, W + 2 * r, C}};
    for (int i = 0; i < H + 2 * r; ++i) {
        const int si = clampi(i - r, 0, H - 1);
        for (int j = 0; j < W + 2 * r; ++j) {
            const int sj = clampi(j - r, 0, W - 1);
            const double* src = x.data() + (static_cast<int64_t>(si) * W + sj) * C;
            double* dst = y.data() + (static_cast<int64_t>(i) * (W + 2 * r) + j) * C;
            std::copy(src, src + C, dst);
        }
    }
    return y;
}

// fold gradients of the padded tensor back onto the source (adjoint of pad)
Tensor unpad_fold2d(const Tensor& gp, int r, int H, int W) {
    const int C = gp.dim(2);
    Tensor g{{H, W, C}};
    const int Hp = H + 2 * r, Wp = W + 2 * r;
    for (int i = 0; i < Hp; ++i) {
        const int si = clampi(i - r, 0, H - 1);
        for (int j = 0; j < Wp; ++j) {
            const int sj = clampi(j - r, 0, W - 1);
            const double* src = gp.data() + (static_cast<int64_t>(i) * Wp + j) * C;
            double* dst = g.data() + (static_cast<int64_t>(si) * W + sj) * C;
            for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
    }
    return g;
}

Tensor pad_replicate3d(const Tensor& x, int rt, int r) {
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor y{{T + 2 * rt, H + 2 * r, W + 2 * r, C}};
    const int Hp = H + 2 * r, Wp = W + 2 * r;
    for (int t = 0; t < T + 2 * rt; ++t) {
        const int st = clampi(t - rt, 0, T - 1);
        for (int i = 0; i < Hp; ++i) {
            const int si = clampi(i - r, 0, H - 1);
            for (int j = 0; j < Wp; ++j) {
                const int sj = clampi(j - r, 0, W - 1);
                const double* src = x.data() + ((static_cast<int64_t>(st) * H + si) * W + sj) * C;
                double* dst = y.data() + ((static_cast<int64_t>(t) * Hp + i) * Wp + j) * C;
                std::copy(src, src + C, dst);
            }
        }
    }
    return y;
}

Tensor unpad_fold3d(const Tensor& gp, int rt, int r, int T, int H, int W) {
    const int C = gp.dim(3);
    Tensor g{{T, H, W, C}};
    const int Tp = T + 2 * rt, Hp = H + 2 * r, Wp = W + 2 * r;
    for (int t = 0; t < Tp; ++t) {
        const int st = clampi(t - rt, 0, T - 1);
        for (int i = 0; i < Hp; ++i) {
            const int si = clampi(i - r, 0, H - 1);
            for (int j = 0; j < Wp; ++j) {
                const int sj = clampi(j - r, 0, W - 1);
                const double* src = gp.data() + ((static_cast<int64_t>(t) * Hp + i) * Wp + j) * C;
                double* dst = g.data() + ((static_cast<int64_t>(st) * H + si) * W + sj) * C;
                for (int c = 0; c < C; ++c) dst[c] += src[c];
            }
        }
    }
    return g;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    fm_check(x.rank() == 3, "conv2d: input must be HxWxC, got ", x.shape_str());
    fm_check(w.rank() == 4, "conv2d: weights must be kxkxCixCo, got ", w.shape_str());
    const int H = x.dim(0), W = x.dim(1), Ci = x.dim(2);
    const int k = w.dim(0), Co = w.dim(3);
    fm_check(w.dim(1) == k, "conv2d: kernel must be square, got ", w.shape_str());
    fm_check(k % 2 == 1, "conv2d: kernel size must be odd, got ", k);
    fm_check(w.dim(2) == Ci, "conv2d: input channels ", Ci, " != weight Cin ", w.dim(2));
    fm_check(b.rank() == 1 && b.dim(0) == Co, "conv2d: bias dim ", b.shape_str(), " != Cout ", Co);

    const int r = k / 2;
    const Tensor xp = pad_replicate2d(x, r);
    const int Wp = W + 2 * r;
    Tensor y{{H, W, Co}};
    parallel_for(H, [&](int i) {
        std::vector<double> acc(static_cast<size_t>(Co));
        for (int j = 0; j < W; ++j) {
            for (int co = 0; co < Co; ++co) acc[static_cast<size_t>(co)] = b[co];
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx) {
                    const double* xr = xp.data() + ((static_cast<int64_t>(i) + dy) * Wp + j + dx) * Ci;
                    const double* wr = w.data() + ((static_cast<int64_t>(dy) * k + dx) * Ci) * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double xv = xr[ci];
                        const double* wc = wr + static_cast<int64_t>(ci) * Co;
                        for (int co = 0; co < Co; ++co) acc[static_cast<size_t>(co)] += xv * wc[co];
                    }
                }
            double* yr = y.data() + (static_cast<int64_t>(i) * W + j) * Co;
            for (int co = 0; co < Co; ++co) yr[co] = acc[static_cast<size_t>(co)];
        }
    });
    return y;
}

std::tuple<Tensor, Tensor, Tensor> conv2d_vjp(const Tensor& x, const Tensor& w, const Tensor& g) {
    const int H = x.dim(0), W = x.dim(1), Ci = x.dim(2);
    const int k = w.dim(0), Co = w.dim(3);
    const int r = k / 2;
    const Tensor xp = pad_replicate2d(x, r);
    const int Hp = H + 2 * r, Wp = W + 2 * r;

    // grad wrt padded input, gather form: each padded cell collects the
    // outputs whose window covers it
    Tensor gxp{{Hp, Wp, Ci}};
    parallel_for(Hp, [&](int i) {
        for (int j = 0; j < Wp; ++j) {
            double* gr = gxp.data() + (static_cast<int64_t>(i) * Wp + j) * Ci;
            for (int dy = 0; dy < k; ++dy) {
                const int oy = i - dy;
                if (oy < 0 || oy >= H) continue;
                for (int dx = 0; dx < k; ++dx) {
                    const int ox = j - dx;
                    if (ox < 0 || ox >= W) continue;
                    const double* go = g.data() + (static_cast<int64_t>(oy) * W + ox) * Co;
                    const double* wr = w.data() + ((static_cast<int64_t>(dy) * k + dx) * Ci) * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double* wc = wr + static_cast<int64_t>(ci) * Co;
                        double acc = 0.0;
                        for (int co = 0; co < Co; ++co) acc += go[co] * wc[co];
                        gr[ci] += acc;
                    }
                }
            }
        }
    });
    Tensor gx = unpad_fold2d(gxp, r, H, W);

    Tensor gw{w.dims()};
    parallel_for(k * k, [&](int tap) {
        const int dy = tap / k, dx = tap % k;
        double* gwr = gw.data() + ((static_cast<int64_t>(dy) * k + dx) * Ci) * Co;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                const double* xr = xp.data() + ((static_cast<int64_t>(i) + dy) * Wp + j + dx) * Ci;
                const double* go = g.data() + (static_cast<int64_t>(i) * W + j) * Co;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double xv = xr[ci];
                    double* dst = gwr + static_cast<int64_t>(ci) * Co;
                    for (int co = 0; co < Co; ++co) dst[co] += xv * go[co];
                }
            }
    });

    Tensor gb{{Co}};
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int64_t p = 0; p < hw; ++p) {
        const double* go = g.data() + p * Co;
        for (int co = 0; co < Co; ++co) gb[co] += go[co];
    }
    return {gx, gw, gb};
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b) {
    fm_check(x.rank() == 4, "conv3d: input must be TxHxWxC, got ", x.shape_str());
    fm_check(w.rank() == 5, "conv3d: weights must be ktxkxkxCixCo, got ", w.shape_str());
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
    const int kt = w.dim(0), k = w.dim(1), Co = w.dim(4);
    fm_check(w.dim(2) == k, "conv3d: spatial kernel must be square, got ", w.shape_str());
    fm_check(k % 2 == 1 && kt % 2 == 1, "conv3d: kernel sizes must be odd, got ", kt, "x", k);
    fm_check(w.dim(3) == Ci, "conv3d: input channels ", Ci, " != weight Cin ", w.dim(3));
    fm_check(b.rank() == 1 && b.dim(0) == Co, "conv3d: bias dim ", b.shape_str(), " != Cout ", Co);

    const int rt = kt / 2, r = k / 2;
    const Tensor xp = pad_replicate3d(x, rt, r);
    const int Hp = H + 2 * r, Wp = W + 2 * r;
    Tensor y{{T, H, W, Co}};
    parallel_for(T * H, [&](int th) {
        const int t = th / H, i = th % H;
        std::vector<double> acc(static_cast<size_t>(Co));
        for (int j = 0; j < W; ++j) {
            for (int co = 0; co < Co; ++co) acc[static_cast<size_t>(co)] = b[co];
            for (int dt = 0; dt < kt; ++dt)
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        const double* xr =
                            xp.data() + (((static_cast<int64_t>(t) + dt) * Hp + i + dy) * Wp + j + dx) * Ci;
                        const double* wr = w.data() + (((static_cast<int64_t>(dt) * k + dy) * k + dx) * Ci) * Co;
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double xv = xr[ci];
                            const double* wc = wr + static_cast<int64_t>(ci) * Co;
                            for (int co = 0; co < Co; ++co) acc[static_cast<size_t>(co)] += xv * wc[co];
                        }
                    }
            double* yr = y.data() + ((static_cast<int64_t>(t) * H + i) * W + j) * Co;
            for (int co = 0; co < Co; ++co) yr[co] = acc[static_cast<size_t>(co)];
        }
    });
    return y;
}

std::tuple<Tensor, Tensor, Tensor> conv3d_vjp(const Tensor& x, const Tensor& w, const Tensor& g) {
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
    const int kt = w.dim(0), k = w.dim(1), Co = w.dim(4);
    const int rt = kt / 2, r = k / 2;
    const Tensor xp = pad_replicate3d(x, rt, r);
    const int Tp = T + 2 * rt, Hp = H + 2 * r, Wp = W + 2 * r;

    Tensor gxp{{Tp, Hp, Wp, Ci}};
    parallel_for(Tp * Hp, [&](int ti) {
        const int t = ti / Hp, i = ti % Hp;
        for (int j = 0; j < Wp; ++j) {
            double* gr = gxp.data() + ((static_cast<int64_t>(t) * Hp + i) * Wp + j) * Ci;
            for (int dt = 0; dt < kt; ++dt) {
                const int ot = t - dt;
                if (ot < 0 || ot >= T) continue;
                for (int dy = 0; dy < k; ++dy) {
                    const int oy = i - dy;
                    if (oy < 0 || oy >= H) continue;
                    for (int dx = 0; dx < k; ++dx) {
                        const int ox = j - dx;
                        if (ox < 0 || ox >= W) continue;
                        const double* go = g.data() + ((static_cast<int64_t>(ot) * H + oy) * W + ox) * Co;
                        const double* wr = w.data() + (((static_cast<int64_t>(dt) * k + dy) * k + dx) * Ci) * Co;
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double* wc = wr + static_cast<int64_t>(ci) * Co;
                            double acc = 0.0;
                            for (int co = 0; co < Co; ++co) acc += go[co] * wc[co];
                            gr[ci] += acc;
                        }
                    }
                }
            }
        }
    });
    Tensor gx = unpad_fold3d(gxp, rt, r, T, H, W);

    Tensor gw{w.dims()};
    parallel_for(kt * k * k, [&](int tap) {
        const int dt = tap / (k * k), dy = (tap / k) % k, dx = tap % k;
        double* gwr = gw.data() + (((static_cast<int64_t>(dt) * k + dy) * k + dx) * Ci) * Co;
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const double* xr =
                        xp.data() + (((static_cast<int64_t>(t) + dt) * Hp + i + dy) * Wp + j + dx) * Ci;
                    const double* go = g.data() + ((static_cast<int64_t>(t) * H + i) * W + j) * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double xv = xr[ci];
                        double* dst = gwr + static_cast<int64_t>(ci) * Co;
                        for (int co = 0; co < Co; ++co) dst[co] += xv * go[co];
                    }
                }
    });

    Tensor gb{{Co}};
    const int64_t thw = static_cast<int64_t>(T) * H * W;
    for (int64_t p = 0; p < thw; ++p) {
        const double* go = g.data() + p * Co;
        for (int co = 0; co < Co; ++co) gb[co] += go[co];
    }
    return {gx, gw, gb};
}

}  // namespace fmanet::ops
