#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcan/model.hpp"
#include "dcan/optim.hpp"
#include "dcan/split.hpp"

namespace dcan {

struct TrainConfig {
    std::size_t batch_size = 32;
    double lr = 1e-4;            // initial rate, cosine-annealed over all steps
    double weight_decay = 1e-4;  // decoupled AdamW decay
    double l2 = 1e-4;            // lambda of the loss' L2 term
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    bool keep_best = true;       // return the lowest-validation-loss epoch
    // Re-run k-means for the FACL dictionaries every this many epochs with the
    // current projections; 0 keeps them frozen after construction.
    std::size_t facl_rebuild_interval = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;          // mean per-batch objective
    std::optional<double> val_loss;   // MSE on the validation split
    double lr = 0.0;                  // rate at the epoch's last step
};

struct TrainResult {
    ModelParams params;
    DictionarySet dicts;  // state matching `params`
    AdamState optimizer;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::string rng_state;
};

nlohmann::json history_to_json(const std::vector<EpochRecord>& history);

// Minibatch AdamW over split.train, starting from init_params(model, cfg.seed).
// Each step refreshes the EMA dictionaries from the batch, then runs the tape.
// Throws LeakageError when `dicts` were built from anything other than split.train.
TrainResult train(const Dataset& ds, const Split& split, const ModelConfig& model, const TrainConfig& cfg,
                  DictionarySet dicts);

// Predictions [n x K] for the given samples, in chunks of `chunk` rows.
Tensor predict_samples(const Dataset& ds, std::span<const std::size_t> indices, const ModelParams& params,
                       const ModelConfig& model, const DictionarySet& dicts, std::size_t chunk = 256);

// Mean over samples of sum_k (y - y_hat)^2.
double mse_on(const Dataset& ds, std::span<const std::size_t> indices, const ModelParams& params,
              const ModelConfig& model, const DictionarySet& dicts);

}  // namespace dcan
