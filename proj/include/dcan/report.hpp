#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dcan/data.hpp"
#include "dcan/metrics.hpp"
#include "json.hpp"

namespace dcan {

struct AccuracyBlock {
    MetricValue acc;
    MetricValue pcc;
    MetricValue ccc;
    MetricValue r2;
};

struct GroupSummary {
    int group = 0;
    std::size_t size = 0;
    std::optional<double> mean_pred;   // over all traits
    std::optional<double> mean_label;
    std::optional<double> acc;
};

struct AttributeFairness {
    std::string attribute;  // "gender", "age" or "race"
    MetricValue dp;
    MetricValue eo;
    std::vector<GroupSummary> groups;
};

// Accuracy and fairness of one prediction set.
//  - ACC pools all entries; PCC/CCC/R2 overall are means of the per-trait values.
//  - DP/EO per attribute: largest pairwise group gap per trait, averaged over
//    traits; overall DP/EO: mean over the attributes where they are defined.
struct FairnessReport {
    std::size_t n_samples = 0;
    std::size_t k_traits = 0;
    double tau = kDefaultTau;
    AccuracyBlock overall;
    std::vector<AccuracyBlock> per_trait;
    std::vector<AttributeFairness> attributes;
    MetricValue overall_dp;
    MetricValue overall_eo;
};

FairnessReport evaluate_predictions(const Tensor& pred, const Tensor& labels, std::span<const Demographics> demo,
                                    const Cardinalities& cards, double tau = kDefaultTau);

nlohmann::json metric_to_json(const MetricValue& m);
nlohmann::json report_to_json(const FairnessReport& r);
// Aligned plain-text table.
std::string report_table(const FairnessReport& r);
// One row per (attribute, group): size, mean prediction, mean label, ACC.
std::string report_group_csv(const FairnessReport& r);

// "0.1234" or "n/a".
std::string format_metric(const MetricValue& m, int precision = 4);

}  // namespace dcan
