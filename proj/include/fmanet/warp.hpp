#pragma once

#include <tuple>

#include "fmanet/autodiff.hpp"
#include "fmanet/tensor.hpp"

namespace fmanet {

// Flow channel convention, used everywhere a flow-mask tensor appears:
// channel 0 = horizontal displacement u (along W), channel 1 = vertical
// displacement v (along H), channel 2 = occlusion mask. Flows are in pixel
// units at the resolution of the tensor they displace. Multi-flow-mask
// tensors pack n pairs per frame as [u_1, v_1, o_1, u_2, v_2, o_2, ...].

namespace ops {

// out(p,c) = mask(p) * BilinearSample(x, p + flow(p), c); sample coordinates
// clamped to the image rectangle.
Tensor backward_warp(const Tensor& x, const Tensor& flow, const Tensor& mask);
std::tuple<Tensor, Tensor, Tensor> backward_warp_vjp(const Tensor& x, const Tensor& flow,
                                                     const Tensor& mask, const Tensor& g);

// per-frame warp of a sequence by a single flow-mask pair per frame
Tensor warp_frames(const Tensor& x, const Tensor& f);  // x TxHxWxC, f TxHxWx3
std::tuple<Tensor, Tensor> warp_frames_vjp(const Tensor& x, const Tensor& f, const Tensor& g);

}  // namespace ops

enum class WarpAggregate { Mean, Concat };

namespace ops {
// n-pair warp toward the center index; Mean averages the n warped copies
// (TxHxWxC), Concat stacks them along channels (TxHxWxnC)
Tensor warp_sequence(const Tensor& x, const Tensor& f, int n, WarpAggregate mode);
}  // namespace ops

namespace ad {
Value backward_warp(Value x, Value flow, Value mask);
Value warp_frames(Value x, Value f);
Value warp_sequence(Value x, Value f, int n, WarpAggregate mode);
}  // namespace ad

}  // namespace fmanet
