#include "fmanet/fmanet.hpp"

#include "fmanet/common.hpp"
#include "fmanet/warp.hpp"

namespace fmanet {

using ad::Value;

namespace {

// flow 0, mask 1 for n pairs per frame
Tensor identity_flow_mask(int T, int H, int W, int n) {
    Tensor f{{T, H, W, 3 * n}};
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int j = 0; j < n; ++j) f.at(t, h, w, 3 * j + 2) = 1.0;
    return f;
}

Value conv3d_p(ad::Tape& t, ParamStore& ps, Value x, const std::string& name, int k, int ci, int co) {
    Value w = ps.leaf(t, name + ".w", {k, k, k, ci, co});
    Value b = ps.leaf(t, name + ".b", {co}, ParamInit::Zero);
    return ad::conv3d(x, w, b);
}

Value conv2d_p(ad::Tape& t, ParamStore& ps, Value x, const std::string& name, int k, int ci, int co) {
    Value w = ps.leaf(t, name + ".w", {k, k, ci, co});
    Value b = ps.leaf(t, name + ".b", {co}, ParamInit::Zero);
    return ad::conv2d(x, w, b);
}

// two-layer conv3d stack projecting the multi-flow-mask tensor to an image
// flow-mask pair; the mask channel goes through a sigmoid
Value image_flow_head(ad::Tape& t, ParamStore& ps, Value f_M, const std::string& prefix, int n, int C) {
    Value h = ad::gelu(conv3d_p(t, ps, f_M, prefix + ".conv0", 3, 3 * n, C));
    Value raw = conv3d_p(t, ps, h, prefix + ".conv1", 3, C, 3);
    Value flow = ad::slice(raw, 3, 0, 2);
    Value mask = ad::sigmoid(ad::slice(raw, 3, 2, 1));
    return ad::concat({flow, mask}, 3);
}

}  // namespace

FrmaState init_states(ad::Tape& tape, const Config& cfg, int H, int W) {
    FrmaState st;
    st.F = tape.constant(Tensor::zeros({cfg.T, H, W, cfg.C}));
    st.Fw = tape.constant(Tensor::zeros({H, W, cfg.C}));
    st.f = tape.constant(identity_flow_mask(cfg.T, H, W, cfg.n));
    return st;
}

FmaNet::FmaNet(const Config& cfg) : cfg_(cfg), params_(cfg.seed) {}

NetDOutput FmaNet::netD_forward(ad::Tape& tape, Value X, std::optional<Value> Y,
                                const ForwardOptions& opts) {
    fm_check(X.rank() == 4 && X.dim(3) == 3, "netD: X must be TxHxWx3, got ", X.val().shape_str());
    fm_check(X.dim(0) == cfg_.T, "netD: X has ", X.dim(0), " frames, config says T=", cfg_.T);
    const int T = cfg_.T, H = X.dim(1), W = X.dim(2), C = cfg_.C;
    if (Y) {
        fm_check(Y->rank() == 4 && Y->dim(3) == 3 && Y->dim(0) == T, "netD: Y must be TxsHxsWx3");
        fm_check(Y->dim(1) == cfg_.s * H && Y->dim(2) == cfg_.s * W, "netD: Y spatial dims ",
                 Y->val().shape_str(), " != s*(H,W) with s=", cfg_.s);
    }
    BlockConfig bc{C, cfg_.D, cfg_.G, cfg_.n, T};

    Value e = conv3d_p(tape, params_, X, "netD.embed", 3, 3, C);
    Value F0 = blocks::rrdb3d(tape, params_, e, "netD.rrdb", bc);
    Value Fc0 = ad::reshape(ad::slice(F0, 0, cfg_.N(), 1), {H, W, C});

    FrmaState st = init_states(tape, cfg_, H, W);
    st.F = F0;

    NetDOutput out;
    for (int i = 0; i < cfg_.M; ++i) {
        st = blocks::frma_step(tape, params_, st, Fc0, std::nullopt, bc,
                               "netD.frma.step" + std::to_string(i));
        out.Fw_steps.push_back(st.Fw);
    }
    out.F_M = st.F;
    out.f_M = st.f;
    out.Fw_M = st.Fw;

    out.fY = image_flow_head(tape, params_, st.f, "netD.fhead", cfg_.n, C);
    Value kh = ad::gelu(conv2d_p(tape, params_, st.Fw, "netD.khead.conv0", 3, C, C));
    Value kraw = conv2d_p(tape, params_, kh, "netD.khead.conv1", 3, C, T * cfg_.k_d * cfg_.k_d);
    out.KD = ad::sigmoid(ad::unfold_time(kraw, T));

    Value fY_used = out.fY;
    Value KD_used = out.KD;
    if (opts.override_fY) fY_used = tape.constant(*opts.override_fY);
    if (opts.override_KD) KD_used = tape.constant(*opts.override_KD);
    if (opts.zero_flows) fY_used = tape.constant(identity_flow_mask(T, H, W, 1));

    if (Y) out.Xc_hat = ad::fgdf_downsample(*Y, fY_used, KD_used, cfg_.s);
    out.XSharpD = conv3d_p(tape, params_, st.F, "netD.sharp", 3, C, 3);
    return out;
}

NetROutput FmaNet::netR_forward(ad::Tape& tape, Value X, const NetDOutput& d,
                                const ForwardOptions& opts) {
    const int T = cfg_.T, H = X.dim(1), W = X.dim(2), C = cfg_.C, s = cfg_.s;
    fm_check(d.F_M.defined() && d.f_M.defined() && d.KD.defined(),
             "netR: degradation outputs are incomplete");
    fm_check(d.F_M.dim(1) == H && d.F_M.dim(2) == W && d.F_M.dim(3) == C,
             "netR: F^{D,M} shape ", d.F_M.val().shape_str(), " does not match config/input");
    fm_check(d.f_M.dim(3) == 3 * cfg_.n, "netR: f^{D,M} channels ", d.f_M.val().shape_str(),
             " != 3n");
    BlockConfig bc{C, cfg_.D, cfg_.G, cfg_.n, T};

    Value e = conv3d_p(tape, params_, ad::concat({X, d.F_M}, 3), "netR.embed", 3, 3 + C, C);
    Value F0 = blocks::rrdb3d(tape, params_, e, "netR.rrdb", bc);
    Value Fc0 = ad::reshape(ad::slice(F0, 0, cfg_.N(), 1), {H, W, C});

    // F_w^{R,0} = 0 and f^{R,0} = f^{D,M}
    FrmaState st = init_states(tape, cfg_, H, W);
    st.F = F0;
    st.f = d.f_M;

    NetROutput out;
    for (int i = 0; i < cfg_.M; ++i) {
        Value kD_i = blocks::derive_kD(tape, params_, d.KD, i, "netR", C);
        st = blocks::frma_step(tape, params_, st, Fc0, kD_i, bc, "netR.frma.step" + std::to_string(i));
        out.Fw_steps.push_back(st.Fw);
    }

    out.fX = image_flow_head(tape, params_, st.f, "netR.fhead", cfg_.n, C);
    Value kh = ad::gelu(conv2d_p(tape, params_, st.Fw, "netR.khead.conv0", 3, C, C));
    Value kraw = conv2d_p(tape, params_, kh, "netR.khead.conv1", 3, C, T * s * s * cfg_.k_r * cfg_.k_r);
    out.KR = ad::normalize_restoration(ad::unfold_time(kraw, T), s);

    Value hf = ad::gelu(conv2d_p(tape, params_, st.Fw, "netR.hfr.conv0", 3, C, C));
    Value hf2 = conv2d_p(tape, params_, hf, "netR.hfr.conv1", 3, C, 3 * s * s);
    out.Yr_hat = ad::pixel_shuffle(hf2, s);

    Value fX_used = opts.zero_flows ? tape.constant(identity_flow_mask(T, H, W, 1)) : out.fX;
    Value up = ad::fgdf_upsample(X, fX_used, out.KR, s);
    out.Yc_hat = out.Yr_hat + up;

    out.XSharpR = conv3d_p(tape, params_, st.F, "netR.sharp", 3, C, 3);
    return out;
}

}  // namespace fmanet
