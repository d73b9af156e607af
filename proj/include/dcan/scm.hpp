#pragma once

#include <cstddef>
#include <cstdint>

#include "dcan/data.hpp"

namespace dcan {

// Synthetic structural causal model with known confounding:
//
//   demographics c_o ~ uniform over categories
//   latent c_u ~ N(0, 1), true signal s ~ N(0, I_r)
//   I_m = A_m s + rho_obs * E_m(c_o) + rho_lat * c_u * u_m + noise     (m in v, a, t)
//   y_k = sigmoid(w_k . s + rho_obs * b_k(c_o) + rho_lat * l_k * c_u + noise)
//
// The mechanism (A, E, u, w, b, word markers) is fixed by `seed`; the drawn
// population is fixed by (seed, population). With anti_correlate_test the
// confounder->label coefficients b and l are sign-flipped, so a model that
// reads confounders off the features as a shortcut is penalized on that data.
struct ScmConfig {
    std::size_t n_samples = 1000;
    FeatureDims dims;
    std::size_t k_traits = 5;
    Cardinalities cards;
    double rho_obs = 0.5;
    double rho_lat = 0.0;
    std::uint64_t seed = 0;
    bool anti_correlate_test = false;
    // Selects an independent population drawn from the same mechanism.
    std::uint64_t population = 0;

    // Mechanism scales.
    std::size_t signal_dim = 4;
    double signal_feature_scale = 1.0;
    double signal_label_scale = 1.5;
    double demo_feature_scale = 1.0;
    double demo_label_scale = 1.0;
    double latent_feature_scale = 2.0;
    double latent_label_scale = 1.0;
    double feature_noise = 0.3;
    double label_noise = 0.2;

    // Transcript tokens: neutral vocabulary plus demographic marker words,
    // which appear with probability 0.5 * rho_obs per token.
    std::size_t tokens_per_sample = 8;
    std::size_t neutral_vocab = 48;
    std::size_t markers_per_group = 3;

    void validate() const;
};

Dataset generate_scm(const ScmConfig& cfg);

}  // namespace dcan
