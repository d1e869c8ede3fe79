#include "fmanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fmanet/common.hpp"

namespace fmanet::metrics {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr int kBlock = 4;
constexpr int kSearch = 4;

Tensor to_gray(const Tensor& img) {
    if (img.rank() == 2) return img;
    fm_check(img.rank() == 3, "expected HxW or HxWxC image, got ", img.shape_str());
    const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
    Tensor g{{H, W}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) acc += img.at(h, w, c);
            g.at(h, w) = acc / C;
        }
    return g;
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWin * kWin);
        const int r = kWin / 2;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                const double dy = i - r, dx = j - r;
                v[static_cast<size_t>(i * kWin + j)] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
                sum += v[static_cast<size_t>(i * kWin + j)];
            }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return w;
}

// search offsets ordered by |dy|+|dx| then (dy, dx): ties resolve toward the
// smallest displacement, deterministically
const std::vector<std::pair<int, int>>& search_order() {
    static const std::vector<std::pair<int, int>> order = [] {
        std::vector<std::pair<int, int>> v;
        for (int dy = -kSearch; dy <= kSearch; ++dy)
            for (int dx = -kSearch; dx <= kSearch; ++dx) v.emplace_back(dy, dx);
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            const int ma = std::abs(a.first) + std::abs(a.second);
            const int mb = std::abs(b.first) + std::abs(b.second);
            if (ma != mb) return ma < mb;
            return a < b;
        });
        return v;
    }();
    return order;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

double block_sad(const Tensor& prev, const Tensor& next, int by, int bx, int dy, int dx) {
    const int H = prev.dim(0), W = prev.dim(1);
    double sad = 0.0;
    for (int i = 0; i < kBlock; ++i)
        for (int j = 0; j < kBlock; ++j) {
            const int py = by * kBlock + i, px = bx * kBlock + j;
            const int qy = clampi(py + dy, 0, H - 1), qx = clampi(px + dx, 0, W - 1);
            sad += std::fabs(prev.at(py, px) - next.at(qy, qx));
        }
    return sad;
}

Tensor half_resolution(const Tensor& g) {
    const int H = std::max(g.dim(0) / 2, 1), W = std::max(g.dim(1) / 2, 1);
    Tensor out{{H, W}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            double acc = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const int yy = std::min(2 * h + i, g.dim(0) - 1);
                    const int xx = std::min(2 * w + j, g.dim(1) - 1);
                    acc += g.at(yy, xx);
                }
            out.at(h, w) = acc * 0.25;
        }
    return out;
}

// SAD search around an initial displacement
void refine_block(const Tensor& prev, const Tensor& next, int by, int bx, int init_dy, int init_dx,
                  int& out_dy, int& out_dx) {
    double best = -1.0;
    out_dy = init_dy;
    out_dx = init_dx;
    for (const auto& [dy, dx] : search_order()) {
        const double sad = block_sad(prev, next, by, bx, init_dy + dy, init_dx + dx);
        if (best < 0.0 || sad < best) {
            best = sad;
            out_dy = init_dy + dy;
            out_dx = init_dx + dx;
        }
    }
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    fm_check(a.same_shape(b), "psnr: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
    double mse = 0.0;
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse < 1e-12) return 99.0;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a_in, const Tensor& b_in, double peak) {
    fm_check(a_in.same_shape(b_in), "ssim: shape mismatch ", a_in.shape_str(), " vs ", b_in.shape_str());
    const Tensor a = to_gray(a_in), b = to_gray(b_in);
    const int H = a.dim(0), W = a.dim(1);
    fm_check(H >= kWin && W >= kWin, "ssim: image ", a.shape_str(), " smaller than the ", kWin, "x",
             kWin, " window");
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const auto& win = gaussian_window();

    double acc = 0.0;
    int64_t count = 0;
    for (int y = 0; y + kWin <= H; ++y)
        for (int x = 0; x + kWin <= W; ++x) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double w = win[static_cast<size_t>(i * kWin + j)];
                    const double va = a.at(y + i, x + j), vb = b.at(y + i, x + j);
                    ma += w * va;
                    mb += w * vb;
                    saa += w * va * va;
                    sbb += w * vb * vb;
                    sab += w * va * vb;
                }
            const double var_a = saa - ma * ma;
            const double var_b = sbb - mb * mb;
            const double cov = sab - ma * mb;
            const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            acc += num / den;
            ++count;
        }
    return acc / static_cast<double>(count);
}

Tensor block_matching_flow(const Tensor& prev_in, const Tensor& next_in) {
    const Tensor prev = to_gray(prev_in), next = to_gray(next_in);
    fm_check(prev.same_shape(next), "block_matching_flow: shape mismatch");
    const int H = prev.dim(0), W = prev.dim(1);
    fm_check(H >= kBlock && W >= kBlock, "block_matching_flow: frames ", prev.shape_str(),
             " smaller than a ", kBlock, "x", kBlock, " block");
    const int bh = H / kBlock, bw = W / kBlock;

    // coarse level at half resolution
    const Tensor ph = half_resolution(prev), nh = half_resolution(next);
    const int cbh = std::max(ph.dim(0) / kBlock, 1), cbw = std::max(ph.dim(1) / kBlock, 1);
    std::vector<int> cdy(static_cast<size_t>(cbh * cbw)), cdx(static_cast<size_t>(cbh * cbw));
    const bool has_coarse = ph.dim(0) >= kBlock && ph.dim(1) >= kBlock;
    if (has_coarse) {
        for (int by = 0; by < cbh; ++by)
            for (int bx = 0; bx < cbw; ++bx)
                refine_block(ph, nh, by, bx, 0, 0, cdy[static_cast<size_t>(by * cbw + bx)],
                             cdx[static_cast<size_t>(by * cbw + bx)]);
    }

    Tensor flow{{bh, bw, 2}};
    for (int by = 0; by < bh; ++by)
        for (int bx = 0; bx < bw; ++bx) {
            int iy = 0, ix = 0;
            if (has_coarse) {
                const int cby = clampi(by / 2, 0, cbh - 1), cbx = clampi(bx / 2, 0, cbw - 1);
                iy = 2 * cdy[static_cast<size_t>(cby * cbw + cbx)];
                ix = 2 * cdx[static_cast<size_t>(cby * cbw + cbx)];
            }
            int dy = 0, dx = 0;
            refine_block(prev, next, by, bx, iy, ix, dy, dx);
            flow.at(by, bx, 0) = dx;
            flow.at(by, bx, 1) = dy;
        }
    return flow;
}

double tof(const Tensor& out_seq, const Tensor& gt_seq) {
    fm_check(out_seq.same_shape(gt_seq), "tof: shape mismatch ", out_seq.shape_str(), " vs ",
             gt_seq.shape_str());
    fm_check(out_seq.rank() == 4 || out_seq.rank() == 3, "tof: expected TxHxW(xC), got ",
             out_seq.shape_str());
    const int T = out_seq.dim(0);
    fm_check(T >= 2, "tof: needs at least 2 frames, got ", T);

    double acc = 0.0;
    int64_t count = 0;
    for (int t = 0; t + 1 < T; ++t) {
        std::vector<int> fd(out_seq.dims().begin() + 1, out_seq.dims().end());
        auto take = [&](const Tensor& seq) {
            const int64_t n = seq.numel() / T;
            Tensor f{fd};
            std::copy(seq.data() + t * n, seq.data() + (t + 1) * n, f.data());
            return f;
        };
        auto take_next = [&](const Tensor& seq) {
            const int64_t n = seq.numel() / T;
            Tensor f{fd};
            std::copy(seq.data() + (t + 1) * n, seq.data() + (t + 2) * n, f.data());
            return f;
        };
        const Tensor fo = block_matching_flow(take(out_seq), take_next(out_seq));
        const Tensor fg = block_matching_flow(take(gt_seq), take_next(gt_seq));
        const int64_t n = fo.numel();
        for (int64_t i = 0; i < n; ++i) acc += std::fabs(fo[i] - fg[i]);
        count += n / 2;
    }
    return acc / static_cast<double>(count);
}

}  // namespace fmanet::metrics
