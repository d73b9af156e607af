#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcan/data.hpp"
#include "dcan/dict.hpp"
#include "dcan/kmeans.hpp"
#include "dcan/tape.hpp"
#include "dcan/weights.hpp"
#include "json.hpp"

namespace dcan {

// Sizes and settings for every dictionary the network reads.
struct DictConfig {
    std::size_t text_size = 128;                // K_t: bias-lexicon rows
    std::optional<double> text_threshold;       // unset: keep the top K_t words
    std::size_t demographic_cap = 128;          // max rows of a v/a dictionary
    std::size_t mediator_size = 64;             // M
    std::size_t global_size = 128;              // N
    double beta = 0.99;                         // EMA momentum
    std::size_t kmeans_iter = 100;
    std::uint64_t embedding_seed = 0x7e47;      // word hash embeddings

    void validate() const;
    nlohmann::json to_json() const;
    static DictConfig from_json(const nlohmann::json& j);
    friend bool operator==(const DictConfig&, const DictConfig&) = default;
};

// Frozen and EMA state the forward pass reads, plus a fingerprint of the
// samples it was built from.
struct DictionarySet {
    std::array<ConfounderDictionary, 3> bacl;
    std::array<FrontDoorDictionaries, 3> facl;
    std::string train_fingerprint;
    DictConfig config;

    const ConfounderDictionary& back(Modality m) const { return bacl[static_cast<std::size_t>(m)]; }
    ConfounderDictionary& back(Modality m) { return bacl[static_cast<std::size_t>(m)]; }
    const FrontDoorDictionaries& front(Modality m) const { return facl[static_cast<std::size_t>(m)]; }

    nlohmann::json to_json() const;
    static DictionarySet from_json(const nlohmann::json& j);
    friend bool operator==(const DictionarySet&, const DictionarySet&) = default;
};

// Order-independent hash of the ids behind `indices`.
std::string sample_fingerprint(const Dataset& ds, std::span<const std::size_t> indices);

// Builds all dictionaries from the training samples only:
//  - v/a: demographic EMA dictionaries (rows start empty and fill during training);
//  - t: bias lexicon over transcript tokens, or a demographic EMA dictionary
//    when the dataset carries no tokens;
//  - FACL: k-means over features projected with `init` (sizes clamp to the
//    number of training samples).
DictionarySet build_dictionaries(const Dataset& ds, std::span<const std::size_t> train, const ModelParams& init,
                                 const DictConfig& cfg, std::uint64_t seed);

// FACL dictionaries alone, from training features projected with `params`.
std::array<FrontDoorDictionaries, 3> build_frontdoor_set(const Dataset& ds, std::span<const std::size_t> train,
                                                         const ModelParams& params, const DictConfig& cfg,
                                                         std::uint64_t seed);

// Stacked inputs of a minibatch.
struct Batch {
    std::array<Tensor, 3> inputs;  // [B x d_m] per modality
    Tensor labels;                 // [B x K]
    std::vector<Demographics> demo;

    std::size_t size() const { return demo.size(); }
    const Tensor& input(Modality m) const { return inputs[static_cast<std::size_t>(m)]; }
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

// X_m = I_m W_p.
Var project(Var input, Var proj);

// Tokens [U_v; cos(U_v,U_t) U_t; cos(U_v,U_a) U_a] with one residual multi-head
// self-attention layer over them. Inputs [B x d]; output [B*3 x d], three
// consecutive rows per sample.
Var fuse(Var u_v, Var u_a, Var u_t, const FusionWeights<Var>& w, std::size_t heads);

// Mean over each sample's three tokens, then Linear-ReLU-Linear-sigmoid. [B x K].
Var predict(Var tokens, const HeadWeights<Var>& w);

// Full forward pass: project -> BACL -> FACL -> fuse -> predict.
Var forward(Tape& tape, const ModelWeights<Var>& w, const ModelConfig& cfg, const DictionarySet& dicts,
            const Batch& batch);

// (1/B) sum_ik (y - y_hat)^2.
Var mse_loss(Var pred, const Tensor& labels);
// Sum of squared norms of every visited weight.
Var l2_penalty(const ModelWeights<Var>& w);
// mse + lambda * l2.
Var loss(Var pred, const Tensor& labels, const ModelWeights<Var>& w, double lambda);

// Value-only forward of a trained model.
Tensor infer(const ModelParams& params, const ModelConfig& cfg, const DictionarySet& dicts, const Batch& batch);

// EMA updates of the v/a (and demographic text) dictionaries from one training batch.
void update_dictionaries(DictionarySet& dicts, const ModelParams& params, const Batch& batch);

}  // namespace dcan
