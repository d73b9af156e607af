#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "dcan/errors.hpp"
#include "dcan/harness.hpp"
#include "dcan/metrics.hpp"
#include "dcan/report.hpp"
#include "test_util.hpp"

using namespace dcan;

namespace {

// Reference formulas written from the definitions with raw sums.
double ref_pcc(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

double ref_ccc(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double va = 0, vb = 0, cov = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma) / n;
        vb += (b[i] - mb) * (b[i] - mb) / n;
        cov += (a[i] - ma) * (b[i] - mb) / n;
    }
    return 2 * cov / (va + vb + (ma - mb) * (ma - mb));
}

double ref_r2(const std::vector<double>& p, const std::vector<double>& y) {
    double my = 0;
    for (double v : y) my += v / static_cast<double>(y.size());
    double sse = 0, sst = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - p[i]) * (y[i] - p[i]);
        sst += (y[i] - my) * (y[i] - my);
    }
    return 1 - sse / sst;
}

// Max over group pairs of the conditioned mean gap, averaged over traits.
double ref_gap(const Tensor& pred, const Tensor& y, const std::vector<int>& g, double tau, bool condition) {
    const std::size_t n = pred.rows(), k = pred.cols();
    double total = 0;
    for (std::size_t t = 0; t < k; ++t) {
        std::map<int, std::pair<double, int>> acc;
        for (std::size_t i = 0; i < n; ++i) {
            if (condition && y(i, t) < tau) continue;
            acc[g[i]].first += pred(i, t);
            acc[g[i]].second += 1;
        }
        double worst = 0;
        for (const auto& [ga, xa] : acc)
            for (const auto& [gb, xb] : acc)
                worst = std::max(worst, std::abs(xa.first / xa.second - xb.first / xb.second));
        total += worst;
    }
    return total / static_cast<double>(k);
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("accuracy examples") {
    const Tensor y({2, 2}, {0.2, 0.4, 0.6, 0.8});
    CHECK(acc(y, y) == 1.0);
    CHECK(acc(Tensor({2, 2}, {0.3, 0.3, 0.7, 0.9}), y) == doctest::Approx(0.9).epsilon(1e-12));
    const Tensor bin({2, 2}, {0, 1, 1, 0});
    CHECK(acc(Tensor({2, 2}, {1, 0, 0, 1}), bin) == 0.0);
    CHECK_THROWS_AS(acc(Tensor(), Tensor()), UndefinedMetricError);
}

TEST_CASE("correlation examples") {
    const std::vector<double> a = {1, 2, 3}, neg = {-1, -2, -3}, b = {1, 2, 4};
    CHECK(pcc(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pcc(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(pcc(a, b) - ref_pcc(a, b)) < 1e-12);
    CHECK(std::abs(pcc(a, b) - 0.9819805060619657) < 1e-12);
    CHECK(ccc(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> shifted = {3, 4, 5};
    CHECK(ccc(a, shifted) < pcc(a, shifted));
    // var_a = 2/3, var_b = 14/9, cov = 1, mean gap 1/3: 2 / (2/3 + 14/9 + 1/9).
    CHECK(std::abs(ccc(a, b) - 2.0 / (2.0 / 3.0 + 14.0 / 9.0 + 1.0 / 9.0)) < 1e-12);
    const std::vector<double> flat = {2, 2, 2};
    CHECK_THROWS_AS(pcc(a, flat), UndefinedMetricError);
    CHECK_THROWS_AS(ccc(flat, a), UndefinedMetricError);
    const std::vector<double> one = {1};
    CHECK_THROWS_AS(pcc(one, one), UndefinedMetricError);
}

TEST_CASE("r2 examples") {
    const std::vector<double> y = {1, 2, 3, 6};
    CHECK(r2(y, y) == 1.0);
    const std::vector<double> mean(4, 3.0);
    CHECK(std::abs(r2(mean, y)) < 1e-15);
    const std::vector<double> p = {1, 3, 3, 5};
    // SSE 2, SST 14.
    CHECK(std::abs(r2(p, y) - (1.0 - 2.0 / 14.0)) < 1e-15);
    CHECK_THROWS_AS(r2(y, mean), UndefinedMetricError);
}

TEST_CASE("demographic parity examples") {
    const std::vector<int> g = {0, 0, 1, 1};
    CHECK(dp(Tensor::vector({0.5, 0.7, 0.7, 0.5}), g, 0, 1) == 0.0);
    const Tensor p = Tensor::vector({0.7, 0.9, 0.5, 0.7});
    CHECK(std::abs(dp(p, g, 0, 1) - 0.2) < 1e-15);
    CHECK(dp(p, g, 1, 0) == dp(p, g, 0, 1));
    CHECK_THROWS_AS(dp(p, g, 0, 2), UndefinedMetricError);
    try {
        dp(p, g, 0, 2);
    } catch (const UndefinedMetricError& e) {
        CHECK(std::string(e.what()).find("group 2") != std::string::npos);
    }
}

TEST_CASE("equal opportunity examples") {
    const std::vector<int> g = {0, 0, 1, 1};
    const Tensor y = Tensor::vector({0.8, 0.2, 0.9, 0.1});
    const Tensor p = Tensor::vector({0.9, 0.1, 0.7, 0.0});
    CHECK(std::abs(eo(p, y, g, 0, 1) - 0.2) < 1e-15);
    CHECK_THROWS_AS(eo(p, Tensor::vector({0.1, 0.2, 0.3, 0.4}), g, 0, 1), UndefinedMetricError);
    CHECK(eo(p, y, g, 0, 1, 0.0) == dp(p, g, 0, 1));
}

TEST_CASE("metrics match brute-force references on random instances") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 4 + rng.index(20);
        const std::vector<double> a = random_vec(rng, n), b = random_vec(rng, n);
        CHECK(std::abs(pcc(a, b) - ref_pcc(a, b)) < 1e-9);
        CHECK(std::abs(ccc(a, b) - ref_ccc(a, b)) < 1e-9);
        CHECK(std::abs(r2(a, b) - ref_r2(a, b)) < 1e-9);

        const std::size_t k = 1 + rng.index(5);
        const int card = 2 + static_cast<int>(rng.index(3));
        Tensor pred({n, k}), y({n, k});
        for (double& x : pred.data()) x = rng.uniform();
        for (double& x : y.data()) x = rng.uniform();
        std::vector<int> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<int>(i % static_cast<std::size_t>(card));
        CHECK(std::abs(dp_attribute(pred, g, card) - ref_gap(pred, y, g, 0, false)) < 1e-9);
        const double tau = 0.0;
        CHECK(std::abs(eo_attribute(pred, y, g, card, tau) - ref_gap(pred, y, g, tau, true)) < 1e-9);
        const MetricValue e = try_metric([&] { return eo_attribute(pred, y, g, card, 0.5); });
        if (e.defined()) CHECK(std::abs(*e.value - ref_gap(pred, y, g, 0.5, true)) < 1e-9);
    }
}

TEST_CASE("dp and eo are invariant to a shared prediction shift") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 12;
        Tensor pred({n, 3}), y({n, 3});
        for (double& x : pred.data()) x = rng.uniform();
        for (double& x : y.data()) x = rng.uniform();
        std::vector<int> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<int>(i % 3);
        Tensor shifted = pred;
        const double c = rng.normal();
        for (double& x : shifted.data()) x += c;
        CHECK(std::abs(dp(pred, g, 0, 2) - dp(shifted, g, 0, 2)) < 1e-12);
        CHECK(std::abs(dp_attribute(pred, g, 3) - dp_attribute(shifted, g, 3)) < 1e-12);
        const double tau = 0.2;
        const MetricValue a = try_metric([&] { return eo(pred, y, g, 0, 1, tau); });
        const MetricValue b = try_metric([&] { return eo(shifted, y, g, 0, 1, tau); });
        CHECK(a.defined() == b.defined());
        if (a.defined()) CHECK(std::abs(*a.value - *b.value) < 1e-12);

        // tau = min(y) conditions on every sample.
        double lo = 1;
        for (double v : y.data()) lo = std::min(lo, v);
        CHECK(std::abs(eo(pred, y, g, 0, 1, lo) - dp(pred, g, 0, 1)) < 1e-12);
    }
}

TEST_CASE("fairness report") {
    Rng rng(9);
    const std::size_t n = 30;
    Tensor pred({n, 5}), y({n, 5});
    for (double& x : pred.data()) x = 0.05 + 0.9 * rng.uniform();
    for (double& x : y.data()) x = rng.uniform();
    std::vector<Demographics> demo(n);
    for (std::size_t i = 0; i < n; ++i) {
        demo[i].gender = static_cast<int>(i % 2);
        demo[i].age = static_cast<int>(i % 3);
        demo[i].race = static_cast<int>((i / 2) % 3);
    }
    const Cardinalities cards;
    const FairnessReport r = evaluate_predictions(pred, y, demo, cards);
    CHECK(r.n_samples == n);
    CHECK(r.per_trait.size() == 5);
    REQUIRE(r.attributes.size() == 3);
    double mean_dp = 0;
    for (const AttributeFairness& a : r.attributes) {
        REQUIRE(a.dp.defined());
        CHECK(*a.dp.value >= 0.0);
        mean_dp += *a.dp.value / 3.0;
        std::size_t total = 0;
        for (const GroupSummary& gs : a.groups) total += gs.size;
        CHECK(total == n);
    }
    CHECK(std::abs(*r.overall_dp.value - mean_dp) < 1e-15);
    std::vector<int> genders(n);
    for (std::size_t i = 0; i < n; ++i) genders[i] = demo[i].gender;
    CHECK(*r.attributes[0].dp.value == dp_attribute(pred, genders, 2));
    CHECK(*r.overall.acc.value == acc(pred, y));
    CHECK(*r.overall.pcc.value <= 1.0);
    CHECK(*r.overall.pcc.value >= -1.0);

    const nlohmann::json j = report_to_json(r);
    CHECK(j.contains("metadata"));
    CHECK(report_to_json(evaluate_predictions(pred, y, demo, cards)).dump() == j.dump());
    CHECK(report_table(r).find("gender") != std::string::npos);
    CHECK(report_group_csv(r).find("attribute") == 0);

    // A degenerate group structure is reported as undefined, never zero.
    std::vector<Demographics> one(n);
    const FairnessReport d = evaluate_predictions(pred, y, one, cards);
    CHECK_FALSE(d.attributes[0].dp.defined());
    CHECK_FALSE(d.attributes[0].dp.reason.empty());
    CHECK(format_metric(d.attributes[0].dp) == "n/a");
    CHECK(metric_to_json(d.attributes[0].dp).at("value").is_null());
}

TEST_CASE("ablation harness") {
    const Dataset ds = generate_scm(test::small_scm(60, 11));
    ExperimentConfig cfg;
    cfg.model = test::small_model(ds.header.dims);
    cfg.dicts = test::small_dicts();
    cfg.train.epochs = 2;
    cfg.train.batch_size = 8;
    cfg.train.lr = 1e-3;
    cfg.split_seed = 3;
    const AblationTable t = run_ablation(ds, cfg);
    REQUIRE(t.rows.size() == 4);
    std::set<std::string> names;
    for (const VariantResult& r : t.rows) names.insert(r.variant.name);
    CHECK(names == std::set<std::string>{"full", "w/o BACL", "w/o FACL", "w/o BACL & FACL"});
    const nlohmann::json j = ablation_to_json(t);
    REQUIRE(j.at("rows").size() == 4);
    for (const auto& row : j.at("rows")) {
        for (const char* key : {"acc", "pcc", "ccc", "r2", "dp", "eo"}) CHECK(row.at("overall").contains(key));
        CHECK(row.contains("test_mse"));
    }
    CHECK(ablation_table_text(t).find("w/o BACL & FACL") != std::string::npos);

    const Split split = make_split(ds, cfg.split, cfg.split_seed);
    const VariantResult solo = run_variant(ds, split, cfg, ablation_variants().front());
    CHECK(solo.predictions == t.rows.front().predictions);
    CHECK(report_to_json(solo.report).dump() == report_to_json(t.rows.front().report).dump());
}

TEST_CASE("ood harness") {
    const Dataset ds = generate_scm(test::small_scm(60, 12));
    ExperimentConfig cfg;
    cfg.model = test::small_model(ds.header.dims);
    cfg.dicts = test::small_dicts();
    cfg.train.epochs = 1;
    cfg.train.batch_size = 8;
    SplitStrategy s;
    s.kind = SplitKind::ood_gender;
    const OodResult r = run_ood(ds, cfg, s);
    CHECK(r.trait_acc.size() == ds.header.k_traits);
    for (const MetricValue& m : r.trait_acc) CHECK(m.defined());
    const Split split = make_split(ds, s, cfg.split_seed);
    CHECK(r.n_train == split.train.size());
    CHECK(r.n_val == split.val.size());
    CHECK(r.n_test == split.test.size());
    CHECK(r.held_out_group == *split.held_out_group);
    CHECK(r.result.report.n_samples == split.test.size());
    for (std::size_t i : split.test) CHECK(ds.samples[i].demo.gender == r.held_out_group);
    const nlohmann::json j = ood_to_json({r});
    CHECK(j.at("rows").at(0).at("trait_acc").size() == ds.header.k_traits);

    s.kind = SplitKind::ood_race;
    Dataset no_race = ds;
    no_race.header.cards.race.reset();
    for (Sample& smp : no_race.samples) smp.demo.race.reset();
    CHECK_THROWS_AS(run_ood(no_race, cfg, s), CapabilityError);
}

TEST_CASE("anti-correlated test population") {
    ScmConfig scm = test::small_scm(50, 13);
    const ShiftedData sd = make_anti_correlated(scm, 20, 0.1, 4);
    CHECK(sd.data.size() == 70);
    CHECK(sd.split.test.size() == 20);
    CHECK(sd.split.val.size() == 5);
    CHECK(sd.split.train.size() == 45);
    std::set<std::string> ids;
    for (const Sample& s : sd.data.samples) ids.insert(s.id);
    CHECK(ids.size() == 70);
    for (std::size_t i : sd.split.test) CHECK(sd.data.samples[i].id.rfind("p1-", 0) == 0);
}
