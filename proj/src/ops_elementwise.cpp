#include <algorithm>
#include <cmath>

#include "fmanet/common.hpp"
#include "fmanet/ops.hpp"

namespace fmanet::ops {

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
    fm_check(a.same_shape(b), op, ": shape mismatch ", a.shape_str(), " vs ", b.shape_str());
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    Tensor y{a.dims()};
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same(a, b, "sub");
    Tensor y{a.dims()};
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same(a, b, "mul");
    Tensor y{a.dims()};
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
    return y;
}

Tensor scale(const Tensor& a, double c) {
    Tensor y{a.dims()};
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] * c;
    return y;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor y{a.dims()};
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] + c;
    return y;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y{x.dims()};
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y;
}

Tensor sigmoid_vjp(const Tensor& y, const Tensor& g) {
    Tensor r{y.dims()};
    const int64_t n = y.numel();
    for (int64_t i = 0; i < n; ++i) r[i] = g[i] * y[i] * (1.0 - y[i]);
    return r;
}

Tensor gelu(const Tensor& x) {
    Tensor y{x.dims()};
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    return y;
}

Tensor gelu_vjp(const Tensor& x, const Tensor& g) {
    Tensor r{x.dims()};
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        r[i] = g[i] * (cdf + x[i] * pdf);
    }
    return r;
}

Tensor absval(const Tensor& x) {
    Tensor y{x.dims()};
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = std::fabs(x[i]);
    return y;
}

Tensor absval_vjp(const Tensor& x, const Tensor& g) {
    Tensor r{x.dims()};
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) r[i] = x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
    return r;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return Tensor::scalar(acc);
}

Tensor mean(const Tensor& x) {
    return Tensor::scalar(sum(x).item() / static_cast<double>(x.numel()));
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    fm_check(!xs.empty(), "concat: no inputs");
    const int r = xs[0].rank();
    fm_check(axis >= 0 && axis < r, "concat: bad axis ", axis);
    int cat = 0;
    for (const auto& x : xs) {
        fm_check(x.rank() == r, "concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            fm_check(i == axis || x.dim(i) == xs[0].dim(i), "concat: dim ", i, " mismatch ",
                     x.shape_str(), " vs ", xs[0].shape_str());
        cat += x.dim(axis);
    }
    std::vector<int> od = xs[0].dims();
    od[static_cast<size_t>(axis)] = cat;
    Tensor y{od};

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= od[static_cast<size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= od[static_cast<size_t>(i)];

    int64_t off = 0;
    for (const auto& x : xs) {
        const int64_t xa = x.dim(axis);
        for (int64_t o = 0; o < outer; ++o) {
            const double* src = x.data() + o * xa * inner;
            double* dst = y.data() + (o * cat + off) * inner;
            std::copy(src, src + xa * inner, dst);
        }
        off += xa;
    }
    return y;
}

std::vector<Tensor> concat_vjp(const std::vector<Tensor>& xs, int axis, const Tensor& g) {
    std::vector<Tensor> out;
    out.reserve(xs.size());
    int off = 0;
    for (const auto& x : xs) {
        out.push_back(slice(g, axis, off, x.dim(axis)));
        off += x.dim(axis);
    }
    return out;
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    const int r = x.rank();
    fm_check(axis >= 0 && axis < r, "slice: bad axis ", axis);
    fm_check(start >= 0 && len > 0 && start + len <= x.dim(axis), "slice: range [", start, ",",
             start + len, ") outside dim ", x.dim(axis));
    std::vector<int> od = x.dims();
    od[static_cast<size_t>(axis)] = len;
    Tensor y{od};

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
    const int64_t xa = x.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
        const double* src = x.data() + (o * xa + start) * inner;
        double* dst = y.data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    return y;
}

Tensor slice_vjp(const Tensor& x, int axis, int start, int len, const Tensor& g) {
    Tensor gx{x.dims()};
    int64_t outer = 1, inner = 1;
    const int r = x.rank();
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
    const int64_t xa = x.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
        const double* src = g.data() + o * len * inner;
        double* dst = gx.data() + (o * xa + start) * inner;
        std::copy(src, src + len * inner, dst);
    }
    return gx;
}

Tensor fold_time(const Tensor& x) {
    fm_check(x.rank() == 4, "fold_time: expected TxHxWxC, got ", x.shape_str());
    const int T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor y{{H, W, T * C}};
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double* src = x.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * C;
                double* dst = y.data() + (static_cast<int64_t>(h) * W + w) * T * C + static_cast<int64_t>(t) * C;
                std::copy(src, src + C, dst);
            }
    return y;
}

Tensor unfold_time(const Tensor& y, int T) {
    fm_check(y.rank() == 3, "unfold_time: expected HxWx(T*C), got ", y.shape_str());
    fm_check(y.dim(2) % T == 0, "unfold_time: channels ", y.dim(2), " not divisible by T=", T);
    const int H = y.dim(0), W = y.dim(1), C = y.dim(2) / T;
    Tensor x{{T, H, W, C}};
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double* src = y.data() + (static_cast<int64_t>(h) * W + w) * T * C + static_cast<int64_t>(t) * C;
                double* dst = x.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * C;
                std::copy(src, src + C, dst);
            }
    return x;
}

Tensor repeat_time(const Tensor& x, int T) {
    fm_check(x.rank() == 3, "repeat_time: expected HxWxC, got ", x.shape_str());
    fm_check(T >= 1, "repeat_time: T must be >= 1");
    Tensor y{{T, x.dim(0), x.dim(1), x.dim(2)}};
    const int64_t n = x.numel();
    for (int t = 0; t < T; ++t) std::copy(x.data(), x.data() + n, y.data() + t * n);
    return y;
}

Tensor repeat_time_vjp(const Tensor& g) {
    const int T = g.dim(0);
    Tensor r{{g.dim(1), g.dim(2), g.dim(3)}};
    const int64_t n = r.numel();
    for (int t = 0; t < T; ++t) {
        const double* src = g.data() + t * n;
        for (int64_t i = 0; i < n; ++i) r[i] += src[i];
    }
    return r;
}

Tensor pixel_shuffle(const Tensor& x, int s) {
    fm_check(x.rank() == 3, "pixel_shuffle: expected HxWxC, got ", x.shape_str());
    fm_check(s >= 1, "pixel_shuffle: scale must be >= 1, got ", s);
    const int H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
    fm_check(Cin % (s * s) == 0, "pixel_shuffle: channels ", Cin, " not divisible by s^2=", s * s);
    const int C = Cin / (s * s);
    Tensor y{{H * s, W * s, C}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx)
                        y.at(h * s + dy, w * s + dx, c) = x.at(h, w, c * s * s + dy * s + dx);
    return y;
}

Tensor pixel_unshuffle(const Tensor& y, int s) {
    fm_check(y.rank() == 3, "pixel_unshuffle: expected HxWxC, got ", y.shape_str());
    fm_check(s >= 1, "pixel_unshuffle: scale must be >= 1, got ", s);
    fm_check(y.dim(0) % s == 0 && y.dim(1) % s == 0, "pixel_unshuffle: spatial dims ", y.shape_str(),
             " not divisible by s=", s);
    const int H = y.dim(0) / s, W = y.dim(1) / s, C = y.dim(2);
    Tensor x{{H, W, C * s * s}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx)
                        x.at(h, w, c * s * s + dy * s + dx) = y.at(h * s + dy, w * s + dx, c);
    return x;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    fm_check(a.rank() == 2 && b.rank() == 2, "matmul: expected rank-2 operands");
    fm_check(a.dim(1) == b.dim(0), "matmul: inner dims mismatch ", a.shape_str(), " vs ", b.shape_str());
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor y{{m, n}};
    parallel_for(m, [&](int i) {
        double* yrow = y.data() + static_cast<int64_t>(i) * n;
        const double* arow = a.data() + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b.data() + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) yrow[j] += av * brow[j];
        }
    });
    return y;
}

Tensor transpose2d(const Tensor& a) {
    fm_check(a.rank() == 2, "transpose2d: expected rank-2");
    Tensor y{{a.dim(1), a.dim(0)}};
    for (int i = 0; i < a.dim(0); ++i)
        for (int j = 0; j < a.dim(1); ++j) y.at(j, i) = a.at(i, j);
    return y;
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    fm_check(a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0), "add_rowvec: shapes ",
             a.shape_str(), " vs ", b.shape_str());
    Tensor y{a.dims()};
    const int m = a.dim(0), n = a.dim(1);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) y.at(i, j) = a.at(i, j) + b[j];
    return y;
}

Tensor softmax_rows(const Tensor& x) {
    fm_check(x.rank() == 2, "softmax_rows: expected rank-2, got ", x.shape_str());
    const int m = x.dim(0), n = x.dim(1);
    Tensor y{x.dims()};
    for (int i = 0; i < m; ++i) {
        const double* xr = x.data() + static_cast<int64_t>(i) * n;
        double* yr = y.data() + static_cast<int64_t>(i) * n;
        double mx = xr[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            z += yr[j];
        }
        for (int j = 0; j < n; ++j) yr[j] /= z;
    }
    return y;
}

Tensor softmax_rows_vjp(const Tensor& y, const Tensor& g) {
    const int m = y.dim(0), n = y.dim(1);
    Tensor r{y.dims()};
    for (int i = 0; i < m; ++i) {
        const double* yr = y.data() + static_cast<int64_t>(i) * n;
        const double* gr = g.data() + static_cast<int64_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += yr[j] * gr[j];
        double* rr = r.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) rr[j] = yr[j] * (gr[j] - dot);
    }
    return r;
}

}  // namespace fmanet::ops
