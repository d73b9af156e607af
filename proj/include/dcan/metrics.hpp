#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcan/tensor.hpp"

// Accuracy and fairness metrics. Predictions and labels are [n x K] (or [n]).
// A metric that is undefined for the given data throws UndefinedMetricError
// naming the reason; nothing is ever silently reported as 0.
namespace dcan {

inline constexpr double kDefaultTau = 0.5;

// 1 - mean |y_hat - y| over all entries.
double acc(const Tensor& pred, const Tensor& y);
// Pearson correlation (n >= 2, nonzero variance on both sides).
double pcc(std::span<const double> a, std::span<const double> b);
// Concordance correlation with population variances.
double ccc(std::span<const double> a, std::span<const double> b);
// 1 - SSE/SST with SST taken around mean(y).
double r2(std::span<const double> pred, std::span<const double> y);

// Column k of an [n x K] tensor ([n] tensors have a single column).
std::vector<double> column(const Tensor& t, std::size_t k);

// |mean(y_hat | A=a) - mean(y_hat | A=b)|, averaged over traits.
double dp(const Tensor& pred, std::span<const int> groups, int a, int b);
// As dp but restricted, per trait, to samples with y >= tau.
double eo(const Tensor& pred, const Tensor& y, std::span<const int> groups, int a, int b, double tau = kDefaultTau);

// Per-attribute disparity: for every trait the largest pairwise gap among the
// groups that have samples (for EO: samples with y >= tau), then the mean over
// traits. Throws when a trait has fewer than two eligible groups.
double dp_attribute(const Tensor& pred, std::span<const int> groups, int cardinality);
double eo_attribute(const Tensor& pred, const Tensor& y, std::span<const int> groups, int cardinality,
                    double tau = kDefaultTau);

// Outcome of a metric that may be undefined.
struct MetricValue {
    std::optional<double> value;
    std::string reason;  // set when value is absent

    bool defined() const { return value.has_value(); }
    friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

// Runs f, converting UndefinedMetricError into an absent value with its message.
template <class F>
MetricValue try_metric(F&& f);

}  // namespace dcan

#include "dcan/errors.hpp"

template <class F>
dcan::MetricValue dcan::try_metric(F&& f) {
    try {
        return {f(), {}};
    } catch (const UndefinedMetricError& e) {
        return {std::nullopt, e.what()};
    }
}
