#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcan/run_config.hpp"

namespace dcan {

// Command-line overrides applied on top of the config file.
struct CommandOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::filesystem::path> checkpoint;
};

// Loads the config (or defaults when none is given), applies overrides, validates.
RunConfig resolve_run_config(const CommandOptions& opts);

struct CommandResult {
    std::vector<std::filesystem::path> artifacts;  // manifest last
    std::string summary;
};

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* dataset = "dataset.jsonl";
inline constexpr const char* dicts = "dicts.json";
inline constexpr const char* checkpoint = "checkpoint.json";
inline constexpr const char* report_json = "report.json";
inline constexpr const char* report_text = "report.txt";
inline constexpr const char* report_csv = "report_groups.csv";
inline constexpr const char* ablation_json = "ablation.json";
inline constexpr const char* ablation_text = "ablation.txt";
inline constexpr const char* ood_json = "ood.json";
inline constexpr const char* ood_text = "ood.txt";
}  // namespace artifact

// generate: synthetic dataset from [scm].
CommandResult cmd_generate(const RunConfig& cfg);
// build-dicts: split the dataset and build all dictionaries from its train part.
CommandResult cmd_build_dicts(const RunConfig& cfg);
// train: needs the dictionary artifact; writes the best-validation checkpoint.
CommandResult cmd_train(const RunConfig& cfg);
// eval: needs a checkpoint; report on the test split as JSON, text and CSV.
CommandResult cmd_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint);
// ablate: the four variants on the configured split.
CommandResult cmd_ablate(const RunConfig& cfg);
// ood: one full-model run per configured strategy.
CommandResult cmd_ood(const RunConfig& cfg);

}  // namespace dcan
