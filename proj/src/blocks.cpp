#include "fmanet/blocks.hpp"

#include <cmath>

#include "fmanet/common.hpp"
#include "fmanet/rng.hpp"
#include "fmanet/warp.hpp"

namespace fmanet {

ad::Value ParamStore::leaf(ad::Tape& tape, const std::string& name, const std::vector<int>& dims,
                           ParamInit init) {
    if (cached_tape_ != &tape) {
        cached_tape_ = &tape;
        leaf_cache_.clear();
    }
    auto cached = leaf_cache_.find(name);
    if (cached != leaf_cache_.end()) return cached->second;

    auto it = values_.find(name);
    if (it == values_.end()) {
        if (frozen_)
            throw CheckpointError("checkpoint does not contain parameter '" + name + "'");
        Tensor t{dims};
        if (init == ParamInit::TruncNormal) {
            Rng rng(mix_seed(seed_, fnv1a64(name)));
            const int64_t n = t.numel();
            for (int64_t i = 0; i < n; ++i) t[i] = rng.truncated_normal(sigma_);
        }
        it = values_.emplace(name, std::move(t)).first;
    } else {
        fm_check(it->second.dims() == dims, "parameter '", name, "' has shape ",
                 it->second.shape_str(), ", model expects ", Tensor::zeros(dims).shape_str());
    }
    ad::Value v = tape.leaf(it->second, /*requires_grad=*/true);
    leaf_cache_.emplace(name, v);
    return v;
}

Tensor& ParamStore::tensor(const std::string& name) {
    auto it = values_.find(name);
    fm_check(it != values_.end(), "unknown parameter '", name, "'");
    return it->second;
}

std::map<std::string, Tensor> ParamStore::collect_grads(ad::Tape& tape) const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : leaf_cache_) out.emplace(name, tape.grad(v));
    return out;
}

void ParamStore::load(std::map<std::string, Tensor> values, bool frozen) {
    values_ = std::move(values);
    frozen_ = frozen;
    cached_tape_ = nullptr;
    leaf_cache_.clear();
}

namespace blocks {

using ad::Value;

namespace {

Value conv3d_p(ad::Tape& t, ParamStore& ps, Value x, const std::string& name, int kt, int k, int ci,
               int co, ParamInit init = ParamInit::TruncNormal) {
    Value w = ps.leaf(t, name + ".w", {kt, k, k, ci, co}, init);
    Value b = ps.leaf(t, name + ".b", {co}, ParamInit::Zero);
    return ad::conv3d(x, w, b);
}

Value conv2d_p(ad::Tape& t, ParamStore& ps, Value x, const std::string& name, int k, int ci, int co) {
    Value w = ps.leaf(t, name + ".w", {k, k, ci, co});
    Value b = ps.leaf(t, name + ".b", {co}, ParamInit::Zero);
    return ad::conv2d(x, w, b);
}

}  // namespace

Value rdb3d(ad::Tape& t, ParamStore& ps, Value x, const std::string& prefix, const BlockConfig& cfg) {
    fm_check(x.rank() == 4 && x.dim(3) == cfg.C, "rdb3d: expected TxHxWxC with C=", cfg.C, ", got ",
             x.val().shape_str());
    std::vector<Value> feats{x};
    int ci = cfg.C;
    for (int d = 0; d < cfg.D; ++d) {
        Value in = feats.size() == 1 ? feats[0] : ad::concat(feats, 3);
        Value h = ad::gelu(conv3d_p(t, ps, in, prefix + ".layer" + std::to_string(d), 3, 3, ci, cfg.G));
        feats.push_back(h);
        ci += cfg.G;
    }
    Value fused = conv3d_p(t, ps, ad::concat(feats, 3), prefix + ".fuse", 1, 1, ci, cfg.C);
    return x + fused;
}

Value rrdb3d(ad::Tape& t, ParamStore& ps, Value x, const std::string& prefix, const BlockConfig& cfg) {
    Value y = rdb3d(t, ps, x, prefix + ".rdb0", cfg);
    y = rdb3d(t, ps, y, prefix + ".rdb1", cfg);
    return x + ad::scale(y, 0.2);
}

Value transposed_attention(ad::Tape& t, ParamStore& ps, Value x, Value q_src,
                           const std::string& prefix) {
    fm_check(x.rank() == 3, "transposed_attention: x must be HxWxC, got ", x.val().shape_str());
    fm_check(q_src.rank() == 3 && q_src.dim(2) == x.dim(2),
             "transposed_attention: q_src channels ", q_src.val().shape_str(),
             " do not match x channels ", x.val().shape_str());
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Value wq = ps.leaf(t, prefix + ".wq", {C, C});
    Value wk = ps.leaf(t, prefix + ".wk", {C, C});
    Value wv = ps.leaf(t, prefix + ".wv", {C, C});

    Value xf = ad::reshape(x, {H * W, C});
    Value qf = ad::reshape(q_src, {H * W, C});
    Value Q = ad::matmul(qf, wq);
    Value K = ad::matmul(xf, wk);
    Value V = ad::matmul(xf, wv);

    // CxC attention map over flattened spatial positions, rows sum to 1
    Value logits = ad::scale(ad::matmul(ad::transpose2d(Q), K), 1.0 / std::sqrt(static_cast<double>(C)));
    Value A = ad::softmax_rows(logits);
    Value out = ad::matmul(V, ad::transpose2d(A));
    return ad::reshape(out, {H, W, C});
}

Value co_attention(ad::Tape& t, ParamStore& ps, Value F_w_tilde, Value F_c0,
                   const std::string& prefix) {
    return transposed_attention(t, ps, F_w_tilde, F_c0, prefix);
}

Value da_attention(ad::Tape& t, ParamStore& ps, Value F_w_tilde, Value kD_i,
                   const std::string& prefix) {
    return transposed_attention(t, ps, F_w_tilde, kD_i, prefix);
}

Value ffn(ad::Tape& t, ParamStore& ps, Value x, const std::string& prefix) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Value w1 = ps.leaf(t, prefix + ".w1", {C, 2 * C});
    Value b1 = ps.leaf(t, prefix + ".b1", {2 * C}, ParamInit::Zero);
    Value w2 = ps.leaf(t, prefix + ".w2", {C, C});
    Value b2 = ps.leaf(t, prefix + ".b2", {C}, ParamInit::Zero);
    Value xf = ad::reshape(x, {H * W, C});
    Value h = ad::add_rowvec(ad::matmul(xf, w1), b1);
    Value a = ad::slice(h, 1, 0, C);
    Value g = ad::slice(h, 1, C, C);
    Value y = ad::add_rowvec(ad::matmul(ad::gelu(a) * g, w2), b2);
    return ad::reshape(y, {H, W, C});
}

Value derive_kD(ad::Tape& t, ParamStore& ps, Value KD, int step, const std::string& prefix, int C) {
    fm_check(KD.rank() == 4, "derive_kD: expected TxHxWxk^2 kernels, got ", KD.val().shape_str());
    const int tk = KD.dim(0) * KD.dim(3);
    Value flat = ad::fold_time(KD);  // HxWx(T*k_d^2)
    const std::string base = prefix + ".kd_embed.step" + std::to_string(step);
    Value h = ad::gelu(conv2d_p(t, ps, flat, base + ".conv0", 3, tk, C));
    return conv2d_p(t, ps, h, base + ".conv1", 3, C, C);
}

FrmaState frma_step(ad::Tape& t, ParamStore& ps, const FrmaState& state, Value F_c0,
                    std::optional<Value> kD_i, const BlockConfig& cfg, const std::string& prefix) {
    const int T = state.F.dim(0), C = cfg.C, n = cfg.n;
    fm_check(state.f.dim(3) == 3 * n, "frma_step: flow-mask channels ", state.f.val().shape_str(),
             " != 3n with n=", n);

    Value F1 = rdb3d(t, ps, state.F, prefix + ".rdb", cfg);

    // residual flow-mask update; the update conv starts at zero so f passes
    // through unchanged before training
    Value warped_mean = ad::warp_sequence(F1, state.f, n, WarpAggregate::Mean);
    Value fc0_rep = ad::repeat_time(F_c0, T);
    Value e1 = ad::concat({state.f, warped_mean, fc0_rep}, 3);
    Value wu = ps.leaf(t, prefix + ".flow_update.w", {3, 3, 3, 3 * n + 2 * C, 3 * n}, ParamInit::Zero);
    Value bu = ps.leaf(t, prefix + ".flow_update.b", {3 * n}, ParamInit::Zero);
    Value f1 = state.f + ad::conv3d(e1, wu, bu);

    // aggregate all n warped hypotheses, flatten time into channels
    Value warped_all = ad::warp_sequence(F1, f1, n, WarpAggregate::Concat);
    Value folded = ad::fold_time(warped_all);  // HxWx(T*n*C)
    Value e2 = ad::concat({state.Fw, folded}, 2);
    Value fw_tilde = conv2d_p(t, ps, e2, prefix + ".fw_update", 3, C + T * n * C, C);

    Value a = fw_tilde + co_attention(t, ps, fw_tilde, F_c0, prefix + ".co");
    a = a + ffn(t, ps, a, prefix + ".co_ffn");
    if (kD_i) {
        a = a + da_attention(t, ps, a, *kD_i, prefix + ".da");
        a = a + ffn(t, ps, a, prefix + ".da_ffn");
    }
    return FrmaState{F1, a, f1};
}

}  // namespace blocks

}  // namespace fmanet
