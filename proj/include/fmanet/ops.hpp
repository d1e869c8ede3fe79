#pragma once

#include <tuple>
#include <vector>

#include "fmanet/tensor.hpp"

// Plain tensor kernels with hand-written vector-Jacobian products. The
// autodiff tape wraps these; the degradation simulator calls the forward
// paths directly, so both sides of every round-trip share one code path.
namespace fmanet::ops {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_vjp(const Tensor& y, const Tensor& g);  // y = sigmoid(x)
Tensor gelu(const Tensor& x);
Tensor gelu_vjp(const Tensor& x, const Tensor& g);
Tensor absval(const Tensor& x);
Tensor absval_vjp(const Tensor& x, const Tensor& g);
Tensor sum(const Tensor& x);   // -> [1]
Tensor mean(const Tensor& x);  // -> [1]

// ---- shape / data movement ----
Tensor concat(const std::vector<Tensor>& xs, int axis);
std::vector<Tensor> concat_vjp(const std::vector<Tensor>& xs, int axis, const Tensor& g);
Tensor slice(const Tensor& x, int axis, int start, int len);
Tensor slice_vjp(const Tensor& x, int axis, int start, int len, const Tensor& g);

// T x H x W x C -> H x W x (T*C), channel index t*C + c. Inverse: unfold_time.
Tensor fold_time(const Tensor& x);
Tensor unfold_time(const Tensor& y, int T);

// H x W x C -> T x H x W x C (replicate along a new leading time axis)
Tensor repeat_time(const Tensor& x, int T);
Tensor repeat_time_vjp(const Tensor& g);  // sum over time

// H x W x (s*s*C) -> sH x sW x C, input channel index c*s*s + dy*s + dx
Tensor pixel_shuffle(const Tensor& x, int s);
Tensor pixel_unshuffle(const Tensor& y, int s);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose2d(const Tensor& a);
Tensor add_rowvec(const Tensor& a, const Tensor& b);  // [m,n] + [n]
Tensor softmax_rows(const Tensor& x);                 // softmax over last axis of [m,n]
Tensor softmax_rows_vjp(const Tensor& y, const Tensor& g);

// ---- resampling ----
// align-corners=false: output i samples input at (i+0.5)/s - 0.5, clamped.
Tensor bilinear_upsample(const Tensor& x, int s);  // H x W x C -> sH x sW x C
Tensor bilinear_upsample_vjp(const Tensor& x, int s, const Tensor& g);

// Catmull-Rom (a=-0.5) resize to an arbitrary size, clamp-to-edge.
Tensor bicubic_resize(const Tensor& x, int out_h, int out_w);

// ---- convolution (replicate padding, odd kernels, cross-correlation) ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);  // x HxWxCi, w kxkxCixCo
std::tuple<Tensor, Tensor, Tensor> conv2d_vjp(const Tensor& x, const Tensor& w, const Tensor& g);
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b);  // x TxHxWxCi, w ktxkxkxCixCo
std::tuple<Tensor, Tensor, Tensor> conv3d_vjp(const Tensor& x, const Tensor& w, const Tensor& g);

}  // namespace fmanet::ops
