#include "dcan/split.hpp"

#include <cmath>
#include <numeric>

#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

std::string_view split_kind_name(SplitKind k) {
    switch (k) {
        case SplitKind::random: return "random";
        case SplitKind::ood_age: return "ood_age";
        case SplitKind::ood_gender: return "ood_gender";
        case SplitKind::ood_race: return "ood_race";
    }
    return "?";
}

SplitKind parse_split_kind(std::string_view name) {
    for (SplitKind k : {SplitKind::random, SplitKind::ood_age, SplitKind::ood_gender, SplitKind::ood_race}) {
        if (split_kind_name(k) == name) return k;
    }
    throw ConfigError("unknown split strategy '" + std::string(name) + "'");
}

namespace {

int attribute_of(const Sample& s, SplitKind k) {
    switch (k) {
        case SplitKind::ood_age: return s.demo.age;
        case SplitKind::ood_gender: return s.demo.gender;
        case SplitKind::ood_race: return *s.demo.race;
        case SplitKind::random: break;
    }
    return 0;
}

int cardinality_of(const Cardinalities& c, SplitKind k) {
    switch (k) {
        case SplitKind::ood_age: return c.age;
        case SplitKind::ood_gender: return c.gender;
        case SplitKind::ood_race: return *c.race;
        case SplitKind::random: break;
    }
    return 1;
}

}  // namespace

Split make_split(const Dataset& ds, const SplitStrategy& strategy, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5b1));
    Split out;
    if (strategy.kind == SplitKind::random) {
        const double total = strategy.train + strategy.val + strategy.test;
        if (strategy.train <= 0.0 || strategy.val < 0.0 || strategy.test < 0.0 || std::abs(total - 1.0) > 1e-9) {
            throw ConfigError("random split fractions must be non-negative and sum to 1");
        }
        std::vector<std::size_t> order(ds.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        const auto n = static_cast<double>(ds.size());
        const auto n_train = static_cast<std::size_t>(std::llround(strategy.train * n));
        const auto n_val = std::min(ds.size() - n_train, static_cast<std::size_t>(std::llround(strategy.val * n)));
        out.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
        out.val.assign(order.begin() + static_cast<long>(n_train), order.begin() + static_cast<long>(n_train + n_val));
        out.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
        return out;
    }

    if (strategy.kind == SplitKind::ood_race && !ds.has_race()) {
        throw CapabilityError("ood_race split requested but the dataset has no race annotations");
    }
    const int card = cardinality_of(ds.header.cards, strategy.kind);
    std::vector<std::size_t> counts(static_cast<std::size_t>(card), 0);
    for (const Sample& s : ds.samples) ++counts[static_cast<std::size_t>(attribute_of(s, strategy.kind))];

    int held_out = 0;
    if (strategy.held_out) {
        held_out = *strategy.held_out;
        if (held_out < 0 || held_out >= card) throw ConfigError("held-out group index out of range");
    } else {
        for (int g = 0; g < card; ++g) {
            if (counts[static_cast<std::size_t>(g)] <= counts[static_cast<std::size_t>(held_out)]) held_out = g;
        }
    }
    out.held_out_group = held_out;

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (attribute_of(ds.samples[i], strategy.kind) == held_out) out.test.push_back(i);
        else pool.push_back(i);
    }
    if (out.test.empty() || pool.empty()) {
        throw ConfigError("ood split needs samples both inside and outside the held-out group");
    }
    rng.shuffle(std::span<std::size_t>(pool));
    const auto n_val = static_cast<std::size_t>(std::llround(strategy.ood_val * static_cast<double>(pool.size())));
    out.val.assign(pool.begin(), pool.begin() + static_cast<long>(std::min(n_val, pool.size() - 1)));
    out.train.assign(pool.begin() + static_cast<long>(out.val.size()), pool.end());
    return out;
}

}  // namespace dcan
