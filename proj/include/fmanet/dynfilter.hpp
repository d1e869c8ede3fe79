#pragma once

#include <tuple>

#include "fmanet/autodiff.hpp"
#include "fmanet/tensor.hpp"
#include "fmanet/warp.hpp"

namespace fmanet {

// Per-pixel kernel banks are TxHxWxk^2 with k odd. Kernel taps enumerate
// row-major from (-k/2,-k/2) to (k/2,k/2): tap index k_i maps to the offset
// (dy, dx) = (k_i / k - k/2, k_i % k - k/2). Tests depend on this order.
// Multi-channel inputs are filtered with the same per-pixel kernel for every
// channel (kernels are channel-shared). Out-of-range taps clamp to the edge.
//
// Restoration banks are TxHxWx(s^2*k^2); the per-frame channel for subpixel
// phase (py,px) and tap k_i is (py*s+px)*k^2 + k_i. The kernel group of one
// HR output pixel spans all T frames and k^2 taps of its phase.

namespace ops {

// Eq.-5-style filtering, window anchored at stride*p + (stride-1)/2 on the
// input grid. x TxHxWxC (or TxHxW), F Tx(H/stride)x(W/stride)xk^2.
Tensor dyn_filter_strided(const Tensor& x, const Tensor& F, int stride);
std::tuple<Tensor, Tensor> dyn_filter_strided_vjp(const Tensor& x, const Tensor& F, int stride,
                                                  const Tensor& g);

// s^2-phase dynamic upsampling: each LR pixel emits an sxs block.
Tensor dyn_filter_phased(const Tensor& x, const Tensor& F, int s);
std::tuple<Tensor, Tensor> dyn_filter_phased_vjp(const Tensor& x, const Tensor& F, int s,
                                                 const Tensor& g);

// bilinear ×s upsampling of a TxHxWx3 flow-mask stack; flow channels are
// scaled by s, the mask channel is not
Tensor flow_upsample_scale(const Tensor& f, int s);
Tensor flow_upsample_scale_vjp(const Tensor& f, int s, const Tensor& g);

// spec-facing operators -------------------------------------------------

Tensor dynamic_filter_image(const Tensor& x, const Tensor& F);  // x HxW(xC), F 1xHxWxk^2
Tensor dynamic_filter_video(const Tensor& x, const Tensor& F);  // x TxHxW(xC) -> HxW(xC)

// warp each frame toward the center by its flow-mask pair, then filter
Tensor fgdf(const Tensor& x, const Tensor& f, const Tensor& F);

// warp HR frames by s * (f upsampled ×s), filter with stride s
Tensor fgdf_downsample(const Tensor& Y, const Tensor& fY, const Tensor& KD, int s);

// warp LR frames, then phase-wise dynamic upsampling
Tensor fgdf_upsample(const Tensor& X, const Tensor& fX, const Tensor& KR, int s);

Tensor normalize_degradation(const Tensor& raw);  // elementwise sigmoid

// per (pixel, phase) group over T*k^2 weights: w - mean(group) + 1/(T*k^2)
Tensor normalize_restoration(const Tensor& raw, int s);
Tensor normalize_restoration_vjp(const Tensor& raw, int s, const Tensor& g);

}  // namespace ops

namespace ad {

Value dynamic_filter_image(Value x, Value F);
Value dynamic_filter_video(Value x, Value F);
Value fgdf(Value x, Value f, Value F);
Value fgdf_downsample(Value Y, Value fY, Value KD, int s);
Value fgdf_upsample(Value X, Value fX, Value KR, int s);
Value flow_upsample_scale(Value f, int s);
Value normalize_degradation(Value raw);
Value normalize_restoration(Value raw, int s);

}  // namespace ad

}  // namespace fmanet
