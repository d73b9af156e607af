#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcan/tensor.hpp"

namespace dcan {

enum class Modality { visual, audio, text };
inline constexpr Modality kModalities[] = {Modality::visual, Modality::audio, Modality::text};
std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

// Observable confounder of one subject. Categorical indices; race is absent
// for datasets that do not annotate it.
struct Demographics {
    int gender = 0;
    int age = 0;
    std::optional<int> race;

    friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct FeatureDims {
    std::size_t v = 16;
    std::size_t a = 12;
    std::size_t t = 16;

    std::size_t of(Modality m) const;
    friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

struct Cardinalities {
    int gender = 2;
    int age = 3;
    std::optional<int> race = 3;

    friend bool operator==(const Cardinalities&, const Cardinalities&) = default;
};

struct Sample {
    std::string id;
    Tensor v;
    Tensor a;
    Tensor t;
    std::optional<std::vector<std::string>> tokens;
    Tensor label;  // [k_traits], entries in [0, 1]
    Demographics demo;

    const Tensor& features(Modality m) const;
    friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetHeader {
    FeatureDims dims;
    std::size_t k_traits = 5;
    Cardinalities cards;

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Sample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool has_race() const noexcept { return header.cards.race.has_value(); }
    // Throws FormatError on the first violation of the header contract.
    void validate() const;
    Dataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// JSON-lines: a header object line, then one sample object per line.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in, const std::string& source);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& ds);

}  // namespace dcan
