#include "dcan/harness.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

const std::vector<Variant>& ablation_variants() {
    static const std::vector<Variant> v = {
        {"full", true, true},
        {"w/o BACL", false, true},
        {"w/o FACL", true, false},
        {"w/o BACL & FACL", false, false},
    };
    return v;
}

VariantResult run_variant(const Dataset& ds, const Split& split, const ExperimentConfig& cfg, const Variant& v) {
    if (split.test.empty()) throw ConfigError("experiment split has no test samples");
    ModelConfig model = cfg.model;
    model.use_bacl = v.use_bacl;
    model.use_facl = v.use_facl;
    model.dims = ds.header.dims;
    model.k_traits = ds.header.k_traits;

    const ModelParams init = init_params(model, cfg.train.seed);
    DictionarySet dicts = build_dictionaries(ds, split.train, init, cfg.dicts, cfg.train.seed);
    const TrainResult trained = train(ds, split, model, cfg.train, std::move(dicts));

    VariantResult out;
    out.variant = v;
    out.best_epoch = trained.best_epoch;
    out.predictions = predict_samples(ds, split.test, trained.params, model, trained.dicts);
    Tensor labels({split.test.size(), model.k_traits});
    std::vector<Demographics> demo;
    double sse = 0.0;
    for (std::size_t r = 0; r < split.test.size(); ++r) {
        const Sample& s = ds.samples[split.test[r]];
        for (std::size_t k = 0; k < model.k_traits; ++k) {
            labels(r, k) = s.label[k];
            const double e = out.predictions(r, k) - s.label[k];
            sse += e * e;
        }
        demo.push_back(s.demo);
    }
    out.test_mse = sse / static_cast<double>(split.test.size());
    out.report = evaluate_predictions(out.predictions, labels, demo, ds.header.cards, cfg.tau);
    spdlog::info("{}: test mse {:.5f} acc {} dp {}", v.name, out.test_mse, format_metric(out.report.overall.acc),
                 format_metric(out.report.overall_dp));
    return out;
}

AblationTable run_ablation(const Dataset& ds, const Split& split, const ExperimentConfig& cfg) {
    AblationTable t;
    for (const Variant& v : ablation_variants()) t.rows.push_back(run_variant(ds, split, cfg, v));
    return t;
}

AblationTable run_ablation(const Dataset& ds, const ExperimentConfig& cfg) {
    return run_ablation(ds, make_split(ds, cfg.split, cfg.split_seed), cfg);
}

namespace {

nlohmann::json row_json(const VariantResult& r) {
    nlohmann::json j = report_to_json(r.report);
    j["variant"] = r.variant.name;
    j["use_bacl"] = r.variant.use_bacl;
    j["use_facl"] = r.variant.use_facl;
    j["test_mse"] = r.test_mse;
    j["best_epoch"] = r.best_epoch;
    return j;
}

}  // namespace

nlohmann::json ablation_to_json(const AblationTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const VariantResult& r : t.rows) rows.push_back(row_json(r));
    return {{"rows", rows}};
}

std::string ablation_table_text(const AblationTable& t) {
    std::ostringstream out;
    char line[200];
    std::snprintf(line, sizeof line, "%-18s %8s %8s %8s %8s %8s %8s %9s\n", "variant", "ACC", "PCC", "CCC", "R2", "DP",
                  "EO", "MSE");
    out << line;
    for (const VariantResult& r : t.rows) {
        const FairnessReport& f = r.report;
        std::snprintf(line, sizeof line, "%-18s %8s %8s %8s %8s %8s %8s %9.5f\n", r.variant.name.c_str(),
                      format_metric(f.overall.acc).c_str(), format_metric(f.overall.pcc).c_str(),
                      format_metric(f.overall.ccc).c_str(), format_metric(f.overall.r2).c_str(),
                      format_metric(f.overall_dp).c_str(), format_metric(f.overall_eo).c_str(), r.test_mse);
        out << line;
    }
    return out.str();
}

OodResult run_ood(const Dataset& ds, const ExperimentConfig& cfg, const SplitStrategy& strategy) {
    if (strategy.kind == SplitKind::random) throw ConfigError("run_ood needs an ood_* split strategy");
    const Split split = make_split(ds, strategy, cfg.split_seed);
    OodResult out;
    out.kind = strategy.kind;
    out.held_out_group = split.held_out_group.value_or(0);
    out.n_train = split.train.size();
    out.n_val = split.val.size();
    out.n_test = split.test.size();
    out.result = run_variant(ds, split, cfg, ablation_variants().front());
    for (const AccuracyBlock& b : out.result.report.per_trait) out.trait_acc.push_back(b.acc);
    return out;
}

nlohmann::json ood_to_json(const std::vector<OodResult>& results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const OodResult& r : results) {
        nlohmann::json accs = nlohmann::json::array();
        for (const MetricValue& m : r.trait_acc) accs.push_back(metric_to_json(m));
        rows.push_back({{"strategy", split_kind_name(r.kind)},
                        {"held_out_group", r.held_out_group},
                        {"sizes", {{"train", r.n_train}, {"val", r.n_val}, {"test", r.n_test}}},
                        {"trait_acc", accs},
                        {"report", row_json(r.result)}});
    }
    return {{"rows", rows}};
}

std::string ood_table_text(const std::vector<OodResult>& results) {
    std::ostringstream out;
    char line[96];
    for (const OodResult& r : results) {
        std::snprintf(line, sizeof line, "%s (held-out group %d; train %zu, val %zu, test %zu)\n",
                      std::string(split_kind_name(r.kind)).c_str(), r.held_out_group, r.n_train, r.n_val, r.n_test);
        out << line;
        for (std::size_t k = 0; k < r.trait_acc.size(); ++k) {
            std::snprintf(line, sizeof line, "  trait %zu  ACC %s\n", k, format_metric(r.trait_acc[k]).c_str());
            out << line;
        }
    }
    return out.str();
}

ShiftedData make_anti_correlated(const ScmConfig& scm, std::size_t n_test, double val_fraction,
                                 std::uint64_t split_seed) {
    if (n_test == 0) throw ConfigError("anti-correlated test population must be non-empty");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0,1)");
    ShiftedData out;
    out.data = generate_scm(scm);
    ScmConfig shifted = scm;
    shifted.n_samples = n_test;
    shifted.population = scm.population + 1;
    shifted.anti_correlate_test = !scm.anti_correlate_test;
    Dataset test = generate_scm(shifted);

    std::vector<std::size_t> pool(out.data.size());
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(derive_seed(split_seed, 0xa471));
    rng.shuffle(std::span<std::size_t>(pool));
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(pool.size())));
    out.split.val.assign(pool.begin(), pool.begin() + static_cast<long>(std::min(n_val, pool.size() - 1)));
    out.split.train.assign(pool.begin() + static_cast<long>(out.split.val.size()), pool.end());

    const std::size_t base = out.data.size();
    for (Sample& s : test.samples) out.data.samples.push_back(std::move(s));
    for (std::size_t i = 0; i < n_test; ++i) out.split.test.push_back(base + i);
    out.data.validate();
    return out;
}

}  // namespace dcan
