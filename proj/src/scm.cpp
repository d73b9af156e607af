#include "dcan/scm.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

namespace {

constexpr std::uint64_t kMechanismStream = 1;
constexpr std::uint64_t kPopulationStream = 2;

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Maps category index to [-1, 1], evenly spaced.
double centered(int value, int card) {
    return card > 1 ? 2.0 * value / (card - 1) - 1.0 : 0.0;
}

struct ModalityMechanism {
    std::vector<double> signal;              // [d x r]
    std::vector<std::vector<double>> gender;  // per category, [d]
    std::vector<std::vector<double>> age;
    std::vector<std::vector<double>> race;
    std::vector<double> latent;  // [d]
};

struct Mechanism {
    ModalityMechanism modality[3];
    std::vector<double> w;  // [k x r]
    std::vector<std::vector<double>> b_gender;  // [k][card]
    std::vector<std::vector<double>> b_age;
    std::vector<std::vector<double>> b_race;
    std::vector<double> b_latent;  // [k]
};

Mechanism build_mechanism(const ScmConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, kMechanismStream));
    Mechanism mech;
    const std::size_t r = cfg.signal_dim;
    const int n_attr = cfg.cards.race ? 3 : 2;
    for (Modality m : kModalities) {
        const std::size_t d = cfg.dims.of(m);
        ModalityMechanism& mm = mech.modality[static_cast<int>(m)];
        mm.signal = gaussian(rng, d * r, cfg.signal_feature_scale / std::sqrt(static_cast<double>(r)));
        const double demo_scale = cfg.demo_feature_scale / std::sqrt(static_cast<double>(n_attr));
        for (int g = 0; g < cfg.cards.gender; ++g) mm.gender.push_back(gaussian(rng, d, demo_scale));
        for (int a = 0; a < cfg.cards.age; ++a) mm.age.push_back(gaussian(rng, d, demo_scale));
        if (cfg.cards.race) {
            for (int c = 0; c < *cfg.cards.race; ++c) mm.race.push_back(gaussian(rng, d, demo_scale));
        }
        mm.latent = gaussian(rng, d, cfg.latent_feature_scale / std::sqrt(static_cast<double>(d)));
    }
    mech.w = gaussian(rng, cfg.k_traits * r, cfg.signal_label_scale / std::sqrt(static_cast<double>(r)));
    for (std::size_t k = 0; k < cfg.k_traits; ++k) {
        // Gender shifts every trait the same way; age shifts each trait with its own sign.
        const double g_mag = cfg.demo_label_scale * (0.5 + rng.uniform());
        const double a_mag = cfg.demo_label_scale * (0.5 + rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        std::vector<double> bg, ba, br;
        for (int g = 0; g < cfg.cards.gender; ++g) bg.push_back(g_mag * centered(g, cfg.cards.gender));
        for (int a = 0; a < cfg.cards.age; ++a) ba.push_back(a_mag * centered(a, cfg.cards.age));
        if (cfg.cards.race) {
            double mean = 0.0;
            for (int c = 0; c < *cfg.cards.race; ++c) {
                br.push_back(0.5 * cfg.demo_label_scale * rng.normal());
                mean += br.back();
            }
            for (double& x : br) x -= mean / *cfg.cards.race;
        }
        mech.b_gender.push_back(std::move(bg));
        mech.b_age.push_back(std::move(ba));
        mech.b_race.push_back(std::move(br));
    }
    mech.b_latent = gaussian(rng, cfg.k_traits, cfg.latent_label_scale);
    return mech;
}

std::string word(const char* prefix, int group, std::size_t j) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%d_m%zu", prefix, group, j);
    return buf;
}

}  // namespace

void ScmConfig::validate() const {
    if (n_samples == 0) throw ConfigError("scm: n_samples must be positive");
    if (!(rho_obs >= 0.0 && rho_obs <= 1.0)) throw ConfigError("scm: rho_obs must lie in [0,1]");
    if (!(rho_lat >= 0.0 && rho_lat <= 1.0)) throw ConfigError("scm: rho_lat must lie in [0,1]");
    if (signal_dim == 0) throw ConfigError("scm: signal_dim must be positive");
    if (dims.v == 0 || dims.a == 0 || dims.t == 0) throw ConfigError("scm: feature dims must be positive");
    if (k_traits != 4 && k_traits != 5) throw ConfigError("scm: k_traits must be 4 or 5");
    if (cards.gender < 1 || cards.age < 1 || (cards.race && *cards.race < 1)) {
        throw ConfigError("scm: category cardinalities must be positive");
    }
    if (neutral_vocab == 0 || markers_per_group == 0) throw ConfigError("scm: vocabulary sizes must be positive");
}

Dataset generate_scm(const ScmConfig& cfg) {
    cfg.validate();
    const Mechanism mech = build_mechanism(cfg);
    Rng rng(derive_seed(derive_seed(cfg.seed, kPopulationStream), cfg.population));

    Dataset ds;
    ds.header = {cfg.dims, cfg.k_traits, cfg.cards};
    ds.samples.reserve(cfg.n_samples);
    const std::size_t r = cfg.signal_dim;
    const double label_sign = cfg.anti_correlate_test ? -1.0 : 1.0;
    const double marker_prob = 0.5 * cfg.rho_obs;

    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        Sample s;
        char id[48];
        std::snprintf(id, sizeof id, "p%llu-%06zu", static_cast<unsigned long long>(cfg.population), i);
        s.id = id;
        s.demo.gender = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.cards.gender)));
        s.demo.age = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.cards.age)));
        if (cfg.cards.race) s.demo.race = static_cast<int>(rng.index(static_cast<std::size_t>(*cfg.cards.race)));
        const std::vector<double> signal = gaussian(rng, r, 1.0);
        const double latent = rng.normal();

        for (Modality m : kModalities) {
            const ModalityMechanism& mm = mech.modality[static_cast<int>(m)];
            const std::size_t d = cfg.dims.of(m);
            std::vector<double> f(d);
            for (std::size_t j = 0; j < d; ++j) {
                double x = 0.0;
                for (std::size_t q = 0; q < r; ++q) x += mm.signal[j * r + q] * signal[q];
                double demo = mm.gender[s.demo.gender][j] + mm.age[s.demo.age][j];
                if (s.demo.race) demo += mm.race[*s.demo.race][j];
                x += cfg.rho_obs * demo;
                x += cfg.rho_lat * latent * mm.latent[j];
                x += cfg.feature_noise * rng.normal();
                f[j] = x;
            }
            Tensor t = Tensor::vector(std::move(f));
            if (m == Modality::visual) s.v = std::move(t);
            else if (m == Modality::audio) s.a = std::move(t);
            else s.t = std::move(t);
        }

        std::vector<double> y(cfg.k_traits);
        for (std::size_t k = 0; k < cfg.k_traits; ++k) {
            double logit = 0.0;
            for (std::size_t q = 0; q < r; ++q) logit += mech.w[k * r + q] * signal[q];
            double bias = mech.b_gender[k][s.demo.gender] + mech.b_age[k][s.demo.age];
            if (s.demo.race) bias += mech.b_race[k][*s.demo.race];
            logit += label_sign * cfg.rho_obs * bias;
            logit += label_sign * cfg.rho_lat * mech.b_latent[k] * latent;
            logit += cfg.label_noise * rng.normal();
            const double p = 1.0 / (1.0 + std::exp(-logit));
            y[k] = std::min(1.0, std::max(0.0, p));
        }
        s.label = Tensor::vector(std::move(y));

        std::vector<std::string> tokens;
        tokens.reserve(cfg.tokens_per_sample);
        for (std::size_t j = 0; j < cfg.tokens_per_sample; ++j) {
            if (rng.uniform() < marker_prob) {
                const std::size_t attr = rng.index(s.demo.race ? 3 : 2);
                const std::size_t which = rng.index(cfg.markers_per_group);
                if (attr == 0) tokens.push_back(word("gender", s.demo.gender, which));
                else if (attr == 1) tokens.push_back(word("age", s.demo.age, which));
                else tokens.push_back(word("race", *s.demo.race, which));
            } else {
                char buf[16];
                std::snprintf(buf, sizeof buf, "w%02zu", rng.index(cfg.neutral_vocab));
                tokens.emplace_back(buf);
            }
        }
        s.tokens = std::move(tokens);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace dcan
