#include "dcan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dcan/errors.hpp"

namespace dcan {

nlohmann::json AdamState::to_json() const {
    nlohmann::json j;
    j["t"] = t;
    j["m"] = nlohmann::json::array();
    j["v"] = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        j["m"].push_back(m[i].values());
        j["v"].push_back(v[i].values());
    }
    return j;
}

AdamState AdamState::from_json(const nlohmann::json& j) {
    AdamState s;
    try {
        s.t = j.at("t").get<std::size_t>();
        const auto& jm = j.at("m");
        const auto& jv = j.at("v");
        if (jm.size() != jv.size()) throw FormatError("optimizer state: moment lists differ in length");
        for (std::size_t i = 0; i < jm.size(); ++i) {
            auto mi = jm[i].get<std::vector<double>>();
            auto vi = jv[i].get<std::vector<double>>();
            const std::size_t n = mi.size();
            s.m.emplace_back(Shape{n}, std::move(mi));
            s.v.emplace_back(Shape{n}, std::move(vi));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("optimizer state: ") + e.what());
    }
    return s;
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
                double weight_decay) {
    if (params.size() != grads.size()) throw DimensionError("adamw: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(Shape{p->size()}, 0.0);
            state.v.emplace_back(Shape{p->size()}, 0.0);
        }
    }
    if (state.m.size() != params.size()) throw DimensionError("adamw: state does not match parameters");
    ++state.t;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::span<double> p = params[i]->data();
        std::span<const double> g = grads[i].data();
        std::span<double> m = state.m[i].data();
        std::span<double> v = state.v[i].data();
        if (g.size() != p.size() || m.size() != p.size()) throw DimensionError("adamw: tensor size mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] -= lr * weight_decay * p[j];
            m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
            v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
            p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEps);
        }
    }
}

double cosine_lr(std::size_t step, std::size_t total, double lr0) {
    if (total == 0) return lr0;
    const double frac = static_cast<double>(std::min(step, total)) / static_cast<double>(total);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace dcan
