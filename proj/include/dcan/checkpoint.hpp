#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcan/train.hpp"

namespace dcan {

// Everything needed to rerun inference or resume: configs, named parameters,
// embedded dictionaries (with the file they came from), optimizer and rng state.
struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    ModelParams params;
    DictionarySet dicts;
    std::optional<std::string> dict_source;       // dictionary artifact, relative to the checkpoint
    std::optional<std::string> dict_source_hash;  // its content hash
    AdamState optimizer;
    std::string rng_state;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

inline constexpr const char* kCheckpointFormat = "dcan-checkpoint/1";

Checkpoint make_checkpoint(const ModelConfig& model, const TrainConfig& train, TrainResult result);

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dcan
