#pragma once

#include <map>
#include <string>

#include "fmanet/tensor.hpp"

namespace fmanet {

struct AdamState {
    std::map<std::string, Tensor> m, v;
    int64_t step = 0;
};

// Standard bias-corrected Adam over named parameters. Parameters without a
// gradient entry this step are left untouched. Iteration order is the sorted
// parameter name order, so updates are deterministic.
void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

}  // namespace fmanet
