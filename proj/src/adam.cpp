#include "fmanet/adam.hpp"

#include <cmath>

#include "fmanet/common.hpp"

namespace fmanet {

void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        fm_check(g.same_shape(p), "adam_step: gradient shape ", g.shape_str(),
                 " != parameter shape ", p.shape_str(), " for '", name, "'");
        Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.dims())).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.dims())).first->second;
        const int64_t n = p.numel();
        for (int64_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace fmanet
