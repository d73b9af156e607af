#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dcan/tensor.hpp"
#include "json.hpp"

namespace dcan {

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t t = 0;

    nlohmann::json to_json() const;
    static AdamState from_json(const nlohmann::json& j);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Decoupled decay theta <- theta - lr*wd*theta, then the bias-corrected Adam
// update. An empty state is sized on first use.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
                double weight_decay);

// lr0 * 0.5 * (1 + cos(pi * step / total)); steps past the end return the final value.
double cosine_lr(std::size_t step, std::size_t total, double lr0);

}  // namespace dcan
