#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcan/data.hpp"

namespace dcan {

enum class SplitKind { random, ood_age, ood_gender, ood_race };

struct SplitStrategy {
    SplitKind kind = SplitKind::random;
    // random: fractions of the whole dataset (test takes the remainder).
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    // ood_*: share of the non-held-out samples moved to validation.
    double ood_val = 0.1;
    // ood_*: group sent to test; defaults to the smallest group (ties -> highest index).
    std::optional<int> held_out;
};

// Index sets into the dataset; disjoint and together exhaustive.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::optional<int> held_out_group;
};

std::string_view split_kind_name(SplitKind k);
SplitKind parse_split_kind(std::string_view name);

// Throws CapabilityError for ood_race on a dataset without race annotations.
Split make_split(const Dataset& ds, const SplitStrategy& strategy, std::uint64_t seed);

}  // namespace dcan
