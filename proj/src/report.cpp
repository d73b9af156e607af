#include "dcan/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcan/errors.hpp"

namespace dcan {

namespace {

MetricValue mean_of(const std::vector<MetricValue>& parts, const char* what) {
    double s = 0.0;
    std::size_t n = 0;
    std::string missing;
    for (const MetricValue& m : parts) {
        if (m.defined()) {
            s += *m.value;
            ++n;
        } else if (missing.empty()) {
            missing = m.reason;
        }
    }
    if (n == 0) return {std::nullopt, std::string(what) + " undefined: " + missing};
    return {s / static_cast<double>(n), {}};
}

AccuracyBlock accuracy_block(std::span<const double> pred, std::span<const double> y) {
    AccuracyBlock b;
    b.acc = try_metric([&] {
        if (pred.empty()) throw UndefinedMetricError("acc of an empty set");
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - y[i]);
        return 1.0 - s / static_cast<double>(pred.size());
    });
    b.pcc = try_metric([&] { return pcc(pred, y); });
    b.ccc = try_metric([&] { return ccc(pred, y); });
    b.r2 = try_metric([&] { return r2(pred, y); });
    return b;
}

void add_attribute(FairnessReport& r, const std::string& name, const Tensor& pred, const Tensor& y,
                   const std::vector<int>& groups, int card) {
    AttributeFairness a;
    a.attribute = name;
    a.dp = try_metric([&] { return dp_attribute(pred, groups, card); });
    a.eo = try_metric([&] { return eo_attribute(pred, y, groups, card, r.tau); });
    for (int g = 0; g < card; ++g) {
        GroupSummary s;
        s.group = g;
        double sp = 0.0, sy = 0.0, se = 0.0;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            if (groups[i] != g) continue;
            ++s.size;
            for (std::size_t k = 0; k < r.k_traits; ++k) {
                sp += pred(i, k);
                sy += y(i, k);
                se += std::abs(pred(i, k) - y(i, k));
            }
        }
        if (s.size > 0) {
            const double cells = static_cast<double>(s.size * r.k_traits);
            s.mean_pred = sp / cells;
            s.mean_label = sy / cells;
            s.acc = 1.0 - se / cells;
        }
        a.groups.push_back(s);
    }
    r.attributes.push_back(std::move(a));
}

}  // namespace

FairnessReport evaluate_predictions(const Tensor& pred, const Tensor& labels, std::span<const Demographics> demo,
                                    const Cardinalities& cards, double tau) {
    if (pred.shape() != labels.shape() || pred.rank() != 2) throw DimensionError("report: predictions vs labels");
    if (pred.rows() != demo.size()) throw DimensionError("report: demographics do not match the predictions");
    FairnessReport r;
    r.n_samples = pred.rows();
    r.k_traits = pred.cols();
    r.tau = tau;

    r.overall.acc = try_metric([&] { return acc(pred, labels); });
    std::vector<MetricValue> pccs, cccs, r2s;
    for (std::size_t k = 0; k < r.k_traits; ++k) {
        const std::vector<double> p = column(pred, k);
        const std::vector<double> y = column(labels, k);
        r.per_trait.push_back(accuracy_block(p, y));
        pccs.push_back(r.per_trait.back().pcc);
        cccs.push_back(r.per_trait.back().ccc);
        r2s.push_back(r.per_trait.back().r2);
    }
    r.overall.pcc = mean_of(pccs, "pcc");
    r.overall.ccc = mean_of(cccs, "ccc");
    r.overall.r2 = mean_of(r2s, "r2");

    std::vector<int> gender, age, race;
    for (const Demographics& d : demo) {
        gender.push_back(d.gender);
        age.push_back(d.age);
        if (d.race) race.push_back(*d.race);
    }
    add_attribute(r, "gender", pred, labels, gender, cards.gender);
    add_attribute(r, "age", pred, labels, age, cards.age);
    if (cards.race && race.size() == demo.size()) add_attribute(r, "race", pred, labels, race, *cards.race);

    std::vector<MetricValue> dps, eos;
    for (const AttributeFairness& a : r.attributes) {
        dps.push_back(a.dp);
        eos.push_back(a.eo);
    }
    r.overall_dp = mean_of(dps, "dp");
    r.overall_eo = mean_of(eos, "eo");
    return r;
}

nlohmann::json metric_to_json(const MetricValue& m) {
    if (m.defined()) return *m.value;
    return {{"value", nullptr}, {"reason", m.reason}};
}

namespace {

nlohmann::json block_json(const AccuracyBlock& b) {
    return {{"acc", metric_to_json(b.acc)},
            {"pcc", metric_to_json(b.pcc)},
            {"ccc", metric_to_json(b.ccc)},
            {"r2", metric_to_json(b.r2)}};
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json report_to_json(const FairnessReport& r) {
    nlohmann::json j;
    j["n_samples"] = r.n_samples;
    j["k_traits"] = r.k_traits;
    j["overall"] = block_json(r.overall);
    j["overall"]["dp"] = metric_to_json(r.overall_dp);
    j["overall"]["eo"] = metric_to_json(r.overall_eo);
    j["per_trait"] = nlohmann::json::array();
    for (const AccuracyBlock& b : r.per_trait) j["per_trait"].push_back(block_json(b));
    j["attributes"] = nlohmann::json::object();
    for (const AttributeFairness& a : r.attributes) {
        nlohmann::json ja = {{"dp", metric_to_json(a.dp)}, {"eo", metric_to_json(a.eo)}};
        ja["groups"] = nlohmann::json::array();
        for (const GroupSummary& g : a.groups) {
            ja["groups"].push_back({{"group", g.group},
                                    {"size", g.size},
                                    {"mean_pred", opt_json(g.mean_pred)},
                                    {"mean_label", opt_json(g.mean_label)},
                                    {"acc", opt_json(g.acc)}});
        }
        j["attributes"][a.attribute] = ja;
    }
    j["metadata"] = {{"tau", r.tau},
                     {"acc", "1 - mean absolute error over all samples and traits"},
                     {"correlations", "pcc/ccc/r2 computed per trait; overall is their mean"},
                     {"fairness_traits", "per trait, then mean over traits"},
                     {"fairness_groups", "max pairwise gap among groups with eligible samples"},
                     {"fairness_overall", "mean over attributes where defined"},
                     {"eo_condition", "samples with label >= tau"}};
    return j;
}

std::string format_metric(const MetricValue& m, int precision) {
    if (!m.defined()) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *m.value);
    return buf;
}

std::string report_table(const FairnessReport& r) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "samples %zu, traits %zu, tau %.2f\n\n", r.n_samples, r.k_traits, r.tau);
    out << line;
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s\n", "", "ACC", "PCC", "CCC", "R2");
    out << line;
    auto row = [&](const std::string& name, const AccuracyBlock& b) {
        std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s\n", name.c_str(), format_metric(b.acc).c_str(),
                      format_metric(b.pcc).c_str(), format_metric(b.ccc).c_str(), format_metric(b.r2).c_str());
        out << line;
    };
    row("overall", r.overall);
    for (std::size_t k = 0; k < r.per_trait.size(); ++k) row("trait " + std::to_string(k), r.per_trait[k]);

    out << '\n';
    std::snprintf(line, sizeof line, "%-10s %8s %8s  %s\n", "", "DP", "EO", "group sizes");
    out << line;
    std::snprintf(line, sizeof line, "%-10s %8s %8s\n", "overall", format_metric(r.overall_dp).c_str(),
                  format_metric(r.overall_eo).c_str());
    out << line;
    for (const AttributeFairness& a : r.attributes) {
        std::string sizes;
        for (const GroupSummary& g : a.groups) sizes += (sizes.empty() ? "" : " ") + std::to_string(g.size);
        std::snprintf(line, sizeof line, "%-10s %8s %8s  %s\n", a.attribute.c_str(), format_metric(a.dp).c_str(),
                      format_metric(a.eo).c_str(), sizes.c_str());
        out << line;
    }
    std::vector<std::string> notes;
    if (!r.overall_dp.defined()) notes.push_back("overall dp: " + r.overall_dp.reason);
    if (!r.overall_eo.defined()) notes.push_back("overall eo: " + r.overall_eo.reason);
    for (const AttributeFairness& a : r.attributes) {
        if (!a.dp.defined()) notes.push_back(a.attribute + " dp: " + a.dp.reason);
        if (!a.eo.defined()) notes.push_back(a.attribute + " eo: " + a.eo.reason);
    }
    if (!notes.empty()) {
        out << '\n';
        for (const std::string& n : notes) out << "n/a " << n << '\n';
    }
    return out.str();
}

std::string report_group_csv(const FairnessReport& r) {
    std::ostringstream out;
    out << "attribute,group,size,mean_pred,mean_label,acc\n";
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        return std::string(buf);
    };
    for (const AttributeFairness& a : r.attributes) {
        for (const GroupSummary& g : a.groups) {
            out << a.attribute << ',' << g.group << ',' << g.size << ',' << cell(g.mean_pred) << ','
                << cell(g.mean_label) << ',' << cell(g.acc) << '\n';
        }
    }
    return out.str();
}

}  // namespace dcan
