#pragma once

#include <optional>
#include <vector>

#include "fmanet/blocks.hpp"
#include "fmanet/config.hpp"
#include "fmanet/dynfilter.hpp"

namespace fmanet {

struct NetDOutput {
    ad::Value fY;       // TxHxWx3 image flow-mask pair for Y (mask in (0,1))
    ad::Value KD;       // TxHxWxk_d^2 degradation kernels, sigmoid-normalized
    ad::Value Xc_hat;   // HxWx3 synthesized blurry center frame (training only)
    ad::Value XSharpD;  // TxHxWx3 image-domain projection of F^{D,M}
    ad::Value F_M;      // TxHxWxC refined anchored feature
    ad::Value f_M;      // TxHxWx3n refined multi-flow-mask pairs
    ad::Value Fw_M;     // HxWxC refined warped feature
    std::vector<ad::Value> Fw_steps;  // warped feature after each FRMA step
};

struct NetROutput {
    ad::Value fX;       // TxHxWx3 image flow-mask pair for X
    ad::Value KR;       // TxHxWx(s^2*k_r^2) restoration kernels, group-normalized
    ad::Value Yr_hat;   // sH x sW x 3 high-frequency branch
    ad::Value Yc_hat;   // sH x sW x 3 restored center frame
    ad::Value XSharpR;  // TxHxWx3
    std::vector<ad::Value> Fw_steps;
};

struct ForwardOptions {
    // force zero flow / unit mask into the FGDF operators (conventional
    // dynamic filtering, the ablation baseline); heads still run
    bool zero_flows = false;
    // bypass the learned heads with simulator ground truth
    const Tensor* override_fY = nullptr;
    const Tensor* override_KD = nullptr;
};

// initial refinement state: F_w = 0 and f = {flows 0, masks 1}
FrmaState init_states(ad::Tape& tape, const Config& cfg, int H, int W);

class FmaNet {
public:
    explicit FmaNet(const Config& cfg);

    ParamStore& params() { return params_; }
    const Config& config() const { return cfg_; }

    // X: TxHxWx3 blurry LR window. Y (optional): TxsHxsWx3 sharp HR window,
    // needed to synthesize Xc_hat during training.
    NetDOutput netD_forward(ad::Tape& tape, ad::Value X, std::optional<ad::Value> Y,
                            const ForwardOptions& opts = {});

    NetROutput netR_forward(ad::Tape& tape, ad::Value X, const NetDOutput& d,
                            const ForwardOptions& opts = {});

private:
    Config cfg_;
    ParamStore params_;
};

}  // namespace fmanet
