#pragma once

#include <utility>

#include "fmanet/config.hpp"
#include "fmanet/fmanet.hpp"

namespace fmanet {

// One stage loss with each component and its weight recorded; total is the
// weighted sum of the components.
struct LossBreakdown {
    double recon = 0.0;    // weight 1
    double warp = 0.0;     // lambda1 / lambda4
    double flow = 0.0;     // lambda2 (pseudo-GT flow supervision; Net^D only)
    double ta = 0.0;       // lambda3 / lambda5 (temporal anchor)
    double coupled = 0.0;  // lambda6 * L_D (joint stage only)
    double w_warp = 0.0, w_flow = 0.0, w_ta = 0.0, w_coupled = 0.0;
    double total = 0.0;
};

// tape constants for one training sample
struct LossInputs {
    ad::Value X;       // TxHxWx3 blurry LR window
    ad::Value Y;       // TxsHxsWx3 sharp HR window
    ad::Value Xc;      // HxWx3 blurry center frame
    ad::Value Yc;      // sHxsWx3 sharp center frame
    ad::Value fgt;     // TxHxWx3 ground-truth image flow-mask (stands in for the RAFT pseudo-GT)
    ad::Value XSharp;  // TxHxWx3 bicubic-downsampled sharp sequence
};

namespace losses {

double l1(const Tensor& a, const Tensor& b);  // mean absolute difference

// Net^D pre-training objective: reconstruction + warping + flow supervision
// + temporal anchor
std::pair<ad::Value, LossBreakdown> loss_D(ad::Tape& tape, const NetDOutput& d,
                                           const LossInputs& in, const Config& cfg);

// joint objective: restoration + warping + temporal anchor + coupled L_D
std::pair<ad::Value, LossBreakdown> loss_total(ad::Tape& tape, const NetROutput& r,
                                               ad::Value lossD, const LossBreakdown& lossD_bd,
                                               const LossInputs& in, const Config& cfg);

}  // namespace losses

}  // namespace fmanet
