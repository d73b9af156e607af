#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcan/report.hpp"
#include "dcan/scm.hpp"
#include "dcan/split.hpp"
#include "dcan/train.hpp"

namespace dcan {

// Settings shared by every variant of an experiment. The model flags are
// overridden per variant.
struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    DictConfig dicts;
    SplitStrategy split;
    std::uint64_t split_seed = 0;
    double tau = kDefaultTau;
};

struct Variant {
    std::string name;
    bool use_bacl;
    bool use_facl;
};

// full, w/o BACL, w/o FACL, w/o BACL & FACL.
const std::vector<Variant>& ablation_variants();

struct VariantResult {
    Variant variant;
    FairnessReport report;  // on split.test
    double test_mse = 0.0;
    std::size_t best_epoch = 0;
    Tensor predictions;
};

// Builds dictionaries from split.train, trains, and evaluates on split.test.
VariantResult run_variant(const Dataset& ds, const Split& split, const ExperimentConfig& cfg, const Variant& v);

struct AblationTable {
    std::vector<VariantResult> rows;
};

AblationTable run_ablation(const Dataset& ds, const Split& split, const ExperimentConfig& cfg);
AblationTable run_ablation(const Dataset& ds, const ExperimentConfig& cfg);

nlohmann::json ablation_to_json(const AblationTable& t);
std::string ablation_table_text(const AblationTable& t);

struct OodResult {
    SplitKind kind = SplitKind::ood_gender;
    int held_out_group = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    std::vector<MetricValue> trait_acc;  // on the held-out group
    VariantResult result;
};

// Trains on the non-held-out groups and reports per-trait ACC on the held-out group.
OodResult run_ood(const Dataset& ds, const ExperimentConfig& cfg, const SplitStrategy& strategy);

nlohmann::json ood_to_json(const std::vector<OodResult>& results);
std::string ood_table_text(const std::vector<OodResult>& results);

// Training/validation population drawn from `scm` plus a test population from
// the same mechanism with confounder effects on the labels reversed.
struct ShiftedData {
    Dataset data;
    Split split;  // train/val from the regular population, test = the reversed one
};
ShiftedData make_anti_correlated(const ScmConfig& scm, std::size_t n_test, double val_fraction,
                                 std::uint64_t split_seed);

}  // namespace dcan
