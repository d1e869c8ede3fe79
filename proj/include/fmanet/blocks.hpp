#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmanet/autodiff.hpp"
#include "fmanet/tensor.hpp"

namespace fmanet {

enum class ParamInit { TruncNormal, Zero };

// Named trainable tensors living outside any tape. Each forward pass creates
// (and caches) one leaf per parameter so repeated uses accumulate gradients.
// Initialization draws from a per-name seeded stream, so values do not depend
// on the order parameters are first requested.
class ParamStore {
public:
    explicit ParamStore(uint64_t seed = 0, double init_sigma = 0.02)
        : seed_(seed), sigma_(init_sigma) {}

    // creates the tensor on first use (unless the store was loaded from a
    // checkpoint, where unknown names are an error)
    ad::Value leaf(ad::Tape& tape, const std::string& name, const std::vector<int>& dims,
                   ParamInit init = ParamInit::TruncNormal);

    bool has(const std::string& name) const { return values_.count(name) != 0; }
    Tensor& tensor(const std::string& name);
    const std::map<std::string, Tensor>& values() const { return values_; }
    std::map<std::string, Tensor>& values() { return values_; }

    // gradients for every parameter used on this tape (zeros for unused ones)
    std::map<std::string, Tensor> collect_grads(ad::Tape& tape) const;

    void load(std::map<std::string, Tensor> values, bool frozen = true);
    bool frozen() const { return frozen_; }
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    double sigma_;
    bool frozen_ = false;
    std::map<std::string, Tensor> values_;
    ad::Tape* cached_tape_ = nullptr;
    std::map<std::string, ad::Value> leaf_cache_;
};

struct BlockConfig {
    int C = 16;  // feature channels
    int D = 3;   // dense layers per RDB
    int G = 8;   // growth rate
    int n = 3;   // multi-flow-mask pairs
    int T = 3;   // frames
};

struct FrmaState {
    ad::Value F;   // TxHxWxC temporally-anchored feature
    ad::Value Fw;  // HxWxC warped feature
    ad::Value f;   // TxHxWx3n multi-flow-mask pairs
};

namespace blocks {

// densely connected 3x3x3 convs with growth G, 1x1x1 fusion, residual add
ad::Value rdb3d(ad::Tape& t, ParamStore& ps, ad::Value x, const std::string& prefix,
                const BlockConfig& cfg);

// two chained RDBs with 0.2 residual scaling
ad::Value rrdb3d(ad::Tape& t, ParamStore& ps, ad::Value x, const std::string& prefix,
                 const BlockConfig& cfg);

// Channel (transposed) attention, single head: Q from q_src, K and V from x,
// attention map is CxC over flattened spatial positions. No output projection.
ad::Value transposed_attention(ad::Tape& t, ParamStore& ps, ad::Value x, ad::Value q_src,
                               const std::string& prefix);

ad::Value co_attention(ad::Tape& t, ParamStore& ps, ad::Value F_w_tilde, ad::Value F_c0,
                       const std::string& prefix);
ad::Value da_attention(ad::Tape& t, ParamStore& ps, ad::Value F_w_tilde, ad::Value kD_i,
                       const std::string& prefix);

// gated feed-forward: one 1x1 conv to 2C split into (a,b), gelu(a)*b, 1x1 back to C
ad::Value ffn(ad::Tape& t, ParamStore& ps, ad::Value x, const std::string& prefix);

// per-step stack of two 3x3 convs mapping the flattened T*k_d^2 kernel
// channels to C feature channels
ad::Value derive_kD(ad::Tape& t, ParamStore& ps, ad::Value KD, int step, const std::string& prefix,
                    int C);

// one FRMA refinement: RDB on F, residual flow-mask update, warped-feature
// aggregation, then CO (and optionally DA) attention with gated FFNs,
// all with residual connections
FrmaState frma_step(ad::Tape& t, ParamStore& ps, const FrmaState& state, ad::Value F_c0,
                    std::optional<ad::Value> kD_i, const BlockConfig& cfg,
                    const std::string& prefix);

}  // namespace blocks

}  // namespace fmanet
