#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcan/harness.hpp"
#include "dcan/scm.hpp"
#include "json.hpp"

namespace dcan {

// Parses the TOML subset used by run configs: [section] headers, key = value
// pairs with strings, integers, floats, booleans and single-line arrays, and
// # comments. Returns {"section": {"key": value}}; top-level keys sit at the root.
nlohmann::json parse_toml(std::string_view text, const std::string& source);

// Configuration of one reproducible run.
struct RunConfig {
    std::optional<std::uint64_t> seed;          // mandatory; drives every stream
    std::optional<std::string> dataset_path;    // [data] path
    std::optional<ScmConfig> scm;               // [scm], required by generate
    SplitStrategy split;
    ModelConfig model;
    TrainConfig train;
    DictConfig dicts;
    double tau = kDefaultTau;
    std::vector<SplitKind> ood_strategies = {SplitKind::ood_gender, SplitKind::ood_age};
    std::filesystem::path out_dir = "dcan_run";

    // Throws ConfigError when the seed is missing or a section is invalid.
    void validate() const;
    std::uint64_t run_seed() const;
    ExperimentConfig experiment() const;
    // Canonical form (all fields, defaults filled in) recorded in manifests.
    nlohmann::json to_json() const;
};

RunConfig run_config_from_toml(const nlohmann::json& toml);
RunConfig parse_run_config(std::string_view text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

// Reference listing of every section, key and default.
std::string run_config_reference();

}  // namespace dcan
