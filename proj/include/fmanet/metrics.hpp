#pragma once

#include "fmanet/tensor.hpp"

namespace fmanet::metrics {

// 10*log10(peak^2 / MSE), capped at 99 dB when MSE < 1e-12
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5), standard
// C1=(0.01*peak)^2, C2=(0.03*peak)^2. Multi-channel inputs are reduced to
// grayscale by channel mean.
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

// Temporal consistency: mean |flow(out_t -> out_{t+1}) - flow(gt_t -> gt_{t+1})|_1
// with flows from the built-in two-level block matcher (4x4 blocks, +-4 search).
double tof(const Tensor& out_seq, const Tensor& gt_seq);

// per-block flow between two grayscale frames (exposed for tests);
// returns (bh x bw x 2) with (u, v) per 4x4 block
Tensor block_matching_flow(const Tensor& prev, const Tensor& next);

}  // namespace fmanet::metrics
