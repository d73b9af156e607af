#include "dcan/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dcan/errors.hpp"

namespace dcan {

namespace {

std::size_t traits_of(const Tensor& t) { return t.rank() == 1 ? 1 : t.cols(); }
std::size_t samples_of(const Tensor& t) { return t.rank() == 1 ? t.size() : t.rows(); }

void check_pair(std::span<const double> a, std::span<const double> b, const char* name) {
    if (a.size() != b.size()) throw DimensionError(std::string(name) + ": length mismatch");
    if (a.size() < 2) throw UndefinedMetricError(std::string(name) + " needs at least two samples");
}

double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

void check_groups(const Tensor& pred, std::span<const int> groups) {
    if (pred.empty()) throw UndefinedMetricError("no predictions");
    if (samples_of(pred) != groups.size()) throw DimensionError("group labels do not match the predictions");
}

// Mean prediction of trait k over samples in group g that pass `keep`; nullopt if none.
template <class Keep>
std::optional<double> group_mean(const Tensor& pred, std::span<const int> groups, int g, std::size_t k, Keep keep) {
    const std::size_t kt = traits_of(pred);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i] != g || !keep(i, k)) continue;
        s += pred[i * kt + k];
        ++n;
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
}

template <class Keep>
double pair_gap(const Tensor& pred, std::span<const int> groups, int a, int b, Keep keep, const char* what) {
    check_groups(pred, groups);
    const std::size_t kt = traits_of(pred);
    double total = 0.0;
    for (std::size_t k = 0; k < kt; ++k) {
        const auto ma = group_mean(pred, groups, a, k, keep);
        const auto mb = group_mean(pred, groups, b, k, keep);
        if (!ma || !mb) {
            throw UndefinedMetricError(std::string(what) + ": group " + std::to_string(ma ? b : a) +
                                       " has no eligible samples for trait " + std::to_string(k));
        }
        total += std::abs(*ma - *mb);
    }
    return total / static_cast<double>(kt);
}

template <class Keep>
double attribute_gap(const Tensor& pred, std::span<const int> groups, int card, Keep keep, const char* what) {
    check_groups(pred, groups);
    const std::size_t kt = traits_of(pred);
    double total = 0.0;
    for (std::size_t k = 0; k < kt; ++k) {
        std::vector<double> means;
        for (int g = 0; g < card; ++g) {
            if (const auto m = group_mean(pred, groups, g, k, keep)) means.push_back(*m);
        }
        if (means.size() < 2) {
            throw UndefinedMetricError(std::string(what) + ": fewer than two groups with eligible samples for trait " +
                                       std::to_string(k));
        }
        const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
        total += *hi - *lo;
    }
    return total / static_cast<double>(kt);
}

}  // namespace

std::vector<double> column(const Tensor& t, std::size_t k) {
    const std::size_t kt = traits_of(t);
    if (k >= kt) throw IndexError("column " + std::to_string(k) + " out of range");
    std::vector<double> out(samples_of(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i * kt + k];
    return out;
}

double acc(const Tensor& pred, const Tensor& y) {
    if (pred.shape() != y.shape()) throw DimensionError("acc: shape mismatch");
    if (pred.empty()) throw UndefinedMetricError("acc of an empty set");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - y[i]);
    return 1.0 - s / static_cast<double>(pred.size());
}

double pcc(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "pcc");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw UndefinedMetricError("pcc: zero variance");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double ccc(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "ccc");
    const double n = static_cast<double>(a.size());
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw UndefinedMetricError("ccc: zero variance");
    const double cov = sab / n, va = saa / n, vb = sbb / n;
    return std::clamp(2.0 * cov / (va + vb + (ma - mb) * (ma - mb)), -1.0, 1.0);
}

double r2(std::span<const double> pred, std::span<const double> y) {
    if (pred.size() != y.size()) throw DimensionError("r2: length mismatch");
    if (y.empty()) throw UndefinedMetricError("r2 of an empty set");
    const double my = mean(y);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - pred[i]) * (y[i] - pred[i]);
        sst += (y[i] - my) * (y[i] - my);
    }
    if (sst == 0.0) throw UndefinedMetricError("r2: labels have zero variance");
    return 1.0 - sse / sst;
}

double dp(const Tensor& pred, std::span<const int> groups, int a, int b) {
    return pair_gap(pred, groups, a, b, [](std::size_t, std::size_t) { return true; }, "dp");
}

double eo(const Tensor& pred, const Tensor& y, std::span<const int> groups, int a, int b, double tau) {
    if (pred.shape() != y.shape()) throw DimensionError("eo: shape mismatch");
    const std::size_t kt = traits_of(y);
    return pair_gap(pred, groups, a, b, [&](std::size_t i, std::size_t k) { return y[i * kt + k] >= tau; }, "eo");
}

double dp_attribute(const Tensor& pred, std::span<const int> groups, int cardinality) {
    return attribute_gap(pred, groups, cardinality, [](std::size_t, std::size_t) { return true; }, "dp");
}

double eo_attribute(const Tensor& pred, const Tensor& y, std::span<const int> groups, int cardinality, double tau) {
    if (pred.shape() != y.shape()) throw DimensionError("eo: shape mismatch");
    const std::size_t kt = traits_of(y);
    return attribute_gap(pred, groups, cardinality, [&](std::size_t i, std::size_t k) { return y[i * kt + k] >= tau; },
                         "eo");
}

}  // namespace dcan
