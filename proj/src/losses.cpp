#include "fmanet/losses.hpp"

#include "fmanet/common.hpp"
#include "fmanet/warp.hpp"

namespace fmanet::losses {

using ad::Value;

double l1(const Tensor& a, const Tensor& b) {
    fm_check(a.same_shape(b), "l1: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
    double acc = 0.0;
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc / static_cast<double>(n);
}

namespace {

// sum over frame offsets of l1 between each warped frame and the center frame
Value warp_loss(ad::Tape& tape, Value frames, Value flow_mask, Value center) {
    Value warped = ad::warp_frames(frames, flow_mask);
    const int T = frames.dim(0);
    const std::vector<int> fd{frames.dim(1), frames.dim(2), frames.dim(3)};
    Value acc;
    for (int t = 0; t < T; ++t) {
        Value wt = ad::reshape(ad::slice(warped, 0, t, 1), fd);
        Value term = ad::l1(wt, center);
        acc = t == 0 ? term : acc + term;
    }
    (void)tape;
    return acc;
}

Value flow_channels(Value f, int n_pairs) {
    std::vector<Value> parts;
    for (int j = 0; j < n_pairs; ++j) parts.push_back(ad::slice(f, 3, 3 * j, 2));
    return parts.size() == 1 ? parts[0] : ad::concat(parts, 3);
}

}  // namespace

std::pair<Value, LossBreakdown> loss_D(ad::Tape& tape, const NetDOutput& d, const LossInputs& in,
                                       const Config& cfg) {
    fm_check(d.Xc_hat.defined(), "loss_D: Net^D was run without Y, no synthesized center frame");
    Value recon = ad::l1(d.Xc_hat, in.Xc);

    Value f_hr = ad::flow_upsample_scale(d.fY, cfg.s);
    Value warp = warp_loss(tape, in.Y, f_hr, in.Yc);

    Value flow = ad::l1(flow_channels(d.fY, 1), flow_channels(in.fgt, 1));
    Value ta = ad::l1(d.XSharpD, in.XSharp);

    Value total = recon + ad::scale(warp, cfg.lambda1) + ad::scale(flow, cfg.lambda2) +
                  ad::scale(ta, cfg.lambda3);

    LossBreakdown bd;
    bd.recon = recon.val().item();
    bd.warp = warp.val().item();
    bd.flow = flow.val().item();
    bd.ta = ta.val().item();
    bd.w_warp = cfg.lambda1;
    bd.w_flow = cfg.lambda2;
    bd.w_ta = cfg.lambda3;
    bd.total = total.val().item();
    return {total, bd};
}

std::pair<Value, LossBreakdown> loss_total(ad::Tape& tape, const NetROutput& r, Value lossD,
                                           const LossBreakdown& lossD_bd, const LossInputs& in,
                                           const Config& cfg) {
    Value recon = ad::l1(r.Yc_hat, in.Yc);
    Value warp = warp_loss(tape, in.X, r.fX, in.Xc);
    Value ta = ad::l1(r.XSharpR, in.XSharp);

    Value total = recon + ad::scale(warp, cfg.lambda4) + ad::scale(ta, cfg.lambda5) +
                  ad::scale(lossD, cfg.lambda6);

    LossBreakdown bd;
    bd.recon = recon.val().item();
    bd.warp = warp.val().item();
    bd.ta = ta.val().item();
    bd.coupled = lossD_bd.total;
    bd.w_warp = cfg.lambda4;
    bd.w_ta = cfg.lambda5;
    bd.w_coupled = cfg.lambda6;
    bd.total = total.val().item();
    return {total, bd};
}

}  // namespace fmanet::losses
