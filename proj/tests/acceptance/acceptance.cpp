// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dcan/commands.hpp"
#include "dcan/gradcheck.hpp"
#include "dcan/harness.hpp"
#include "dcan/kmeans.hpp"
#include "dcan/metrics.hpp"
#include "dcan/ops.hpp"
#include "dcan/rng.hpp"
#include "dcan/run_config.hpp"

using namespace dcan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& x : t.data()) x = scale * rng.normal();
    return t;
}

// ---------------------------------------------------------------------------
// Gradient fidelity

void gradient_fidelity() {
    const auto t0 = Clock::now();
    ScmConfig scm;
    scm.n_samples = 40;
    scm.seed = 1;
    const Dataset ds = generate_scm(scm);
    const Split split = make_split(ds, {}, 1);
    ModelConfig model;
    model.dims = ds.header.dims;
    model.d = 8;
    model.heads = 2;
    DictConfig dc;
    dc.text_size = dc.mediator_size = dc.global_size = 4;
    ModelParams params = init_params(model, 2);
    DictionarySet dicts = build_dictionaries(ds, split.train, params, dc, 2);
    update_dictionaries(dicts, params, make_batch(ds, split.train));
    for (auto& b : params.bacl) b.gamma = Tensor::vector({0.5});
    const Batch batch = make_batch(ds, std::span(split.train).first(4));

    std::vector<Tensor> inputs;
    params.visit([&](const std::string&, const Tensor& t) { inputs.push_back(t); });
    const GradCheckResult e2e = gradient_check(
        [&](Tape& tape, std::span<const Var> in) {
            ModelWeights<Var> w;
            std::size_t i = 0;
            w.visit([&](const std::string&, Var& v) { v = in[i++]; });
            return loss(forward(tape, w, model, dicts, batch), batch.labels, w, 1e-3);
        },
        inputs);

    Rng rng(3);
    const std::size_t d = 8;
    const Tensor target = random_tensor(rng, {4, d});
    std::map<std::string, double> module;
    module["bacl"] = gradient_check(
                         [&](Tape& tape, std::span<const Var> in) {
                             const Var f = backdoor_adjust(in[0], dicts.back(Modality::visual), {in[1], in[2], in[3]});
                             return squared_norm(sub(f, tape.constant(target)));
                         },
                         std::vector<Tensor>{random_tensor(rng, {4, d}), params.bacl[0].query, params.bacl[0].key,
                                             Tensor::vector({0.7})})
                         .max_rel_error;
    {
        std::vector<Tensor> in = {random_tensor(rng, {4, d})};
        params.facl[1].visit([&](const char*, const Tensor& t) { in.push_back(t); });
        module["facl"] = gradient_check(
                             [&](Tape& tape, std::span<const Var> v) {
                                 const FaclWeights<Var> w{v[1], v[2], v[3], v[4], v[5], v[6]};
                                 const Var u = frontdoor_adjust(v[0], dicts.front(Modality::audio), w);
                                 return squared_norm(sub(u, tape.constant(target)));
                             },
                             in)
                             .max_rel_error;
    }
    {
        std::vector<Tensor> in = {random_tensor(rng, {4, d}), random_tensor(rng, {4, d}), random_tensor(rng, {4, d})};
        params.fusion.visit([&](const char*, const Tensor& t) { in.push_back(t); });
        params.head.visit([&](const char*, const Tensor& t) { in.push_back(t); });
        const Tensor y = random_tensor(rng, {4, ds.header.k_traits});
        module["fuse+predict"] = gradient_check(
                                     [&](Tape&, std::span<const Var> v) {
                                         const Var tokens = fuse(v[0], v[1], v[2], {v[3], v[4], v[5], v[6]}, 2);
                                         return mse_loss(predict(tokens, {v[7], v[8], v[9], v[10]}), y);
                                     },
                                     in)
                                     .max_rel_error;
    }
    module["audio_pool"] = gradient_check(
                               [&](Tape& tape, std::span<const Var> v) {
                                   return squared_norm(sub(audio_pool(v[0], v[1]), tape.constant(Tensor::vector(std::vector<double>(d, 0.25)))));
                               },
                               std::vector<Tensor>{random_tensor(rng, {4, d}), random_tensor(rng, {d})})
                               .max_rel_error;
    double worst_module = 0;
    std::string detail;
    for (const auto& [name, err] : module) {
        worst_module = std::max(worst_module, err);
        detail += fmt(" %s %.2e", name.c_str(), err);
    }
    const double secs = seconds_since(t0);
    report(e2e.max_rel_error < 1e-4 && worst_module < 1e-5 && secs < 10.0, "gradient fidelity",
           fmt("end-to-end %.2e (< 1e-4) over %zu params;", e2e.max_rel_error, param_count(params)) + detail +
               fmt(" (< 1e-5); %.2f s (< 10 s)", secs));
}

// ---------------------------------------------------------------------------
// Metric oracles

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
    double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma) / n;
        vb += (b[i] - mb) * (b[i] - mb) / n;
        cov += (a[i] - ma) * (b[i] - mb) / n;
    }
    return 2 * cov / (va + vb + (ma - mb) * (ma - mb));
}

double ref_r2(const std::vector<double>& p, const std::vector<double>& y) {
    double my = 0, sse = 0, sst = 0;
    for (double v : y) my += v / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - p[i]) * (y[i] - p[i]);
        sst += (y[i] - my) * (y[i] - my);
    }
    return 1 - sse / sst;
}

// Per trait: gap between the two group means over samples passing the filter; mean over traits.
double ref_pair_gap(const Tensor& pred, const Tensor& y, const std::vector<int>& g, int a, int b, double tau) {
    double total = 0;
    for (std::size_t k = 0; k < pred.cols(); ++k) {
        double s[2] = {0, 0}, n[2] = {0, 0};
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            if (y(i, k) < tau) continue;
            if (g[i] == a) s[0] += pred(i, k), n[0] += 1;
            if (g[i] == b) s[1] += pred(i, k), n[1] += 1;
        }
        total += std::abs(s[0] / n[0] - s[1] / n[1]);
    }
    return total / static_cast<double>(pred.cols());
}

void metric_oracles() {
    const auto t0 = Clock::now();
    Rng rng(11);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.index(30), k = 1 + rng.index(5);
        std::vector<double> a(n), b(n);
        for (double& x : a) x = rng.uniform();
        for (double& x : b) x = rng.uniform();
        worst = std::max({worst, std::abs(pcc(a, b) - ref_pcc(a, b)), std::abs(ccc(a, b) - ref_ccc(a, b)),
                          std::abs(r2(a, b) - ref_r2(a, b))});
        Tensor pred({n, k}), y({n, k});
        for (double& x : pred.data()) x = rng.uniform();
        for (double& x : y.data()) x = rng.uniform();
        std::vector<int> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<int>(i % 2);
        worst = std::max(worst, std::abs(dp(pred, g, 0, 1) - ref_pair_gap(pred, y, g, 0, 1, -1.0)));
        // tau = 0 conditions on every sample; tau = 0.3 conditions on a subset, when defined.
        worst = std::max(worst, std::abs(eo(pred, y, g, 0, 1, 0.0) - ref_pair_gap(pred, y, g, 0, 1, 0.0)));
        const MetricValue e = try_metric([&] { return eo(pred, y, g, 0, 1, 0.3); });
        if (e.defined()) worst = std::max(worst, std::abs(*e.value - ref_pair_gap(pred, y, g, 0, 1, 0.3)));
    }
    const double secs = seconds_since(t0);
    report(worst < 1e-9 && secs < 1.0, "metric oracles",
           fmt("max |metric - reference| %.2e (< 1e-9) over 100 instances; %.3f s (< 1 s)", worst, secs));
}

// ---------------------------------------------------------------------------
// Ablation identities

void ablation_identities() {
    ScmConfig scm;
    scm.n_samples = 48;
    scm.seed = 4;
    const Dataset ds = generate_scm(scm);
    const Split split = make_split(ds, {}, 4);
    ModelConfig model;
    model.dims = ds.header.dims;
    model.d = 8;
    model.heads = 2;
    DictConfig dc;
    dc.text_size = dc.mediator_size = dc.global_size = 4;
    const ModelParams params = init_params(model, 5);
    DictionarySet dicts = build_dictionaries(ds, split.train, params, dc, 5);
    const Batch batch = make_batch(ds, split.train);
    update_dictionaries(dicts, params, batch);

    // gamma = 0 (its initial value) makes BACL the identity map.
    bool identity = true;
    {
        Tape tape;
        const ModelWeights<Var> w = bind(tape, params);
        for (Modality m : kModalities) {
            const std::size_t i = ModelParams::idx(m);
            const Var x = project(tape.constant(batch.input(m)), w.proj[i]);
            identity = identity && backdoor_adjust(x, dicts.back(m), w.bacl[i]).value() == x.value();
        }
    }
    ModelConfig no_bacl = model;
    no_bacl.use_bacl = false;
    ModelParams p_no_bacl = params;
    p_no_bacl.use_bacl = false;
    identity = identity && infer(params, model, dicts, batch) == infer(p_no_bacl, no_bacl, dicts, batch);

    int equal = 0;
    for (const auto& [bacl, facl] : {std::pair{false, true}, {true, false}, {false, false}}) {
        ModelConfig cfg = model;
        cfg.use_bacl = bacl;
        cfg.use_facl = facl;
        ModelParams p = params;
        p.use_bacl = bacl;
        p.use_facl = facl;
        Tape a;
        forward(a, bind(a, p), cfg, dicts, batch);
        Tape b;
        const ModelWeights<Var> w = bind(b, p);
        Var u[3];
        for (Modality m : kModalities) {
            const std::size_t i = ModelParams::idx(m);
            u[i] = project(b.constant(batch.input(m)), w.proj[i]);
            if (bacl) u[i] = backdoor_adjust(u[i], dicts.back(m), w.bacl[i]);
            if (facl) u[i] = frontdoor_adjust(u[i], dicts.front(m), w.facl[i]);
        }
        predict(fuse(u[0], u[1], u[2], w.fusion, cfg.heads), w.head);
        if (a.trace() == b.trace()) ++equal;
    }
    report(identity && equal == 3, "ablation identities",
           fmt("gamma=0 identity %s; forward traces equal for %d/3 reduced variants", identity ? "exact" : "broken",
               equal));
}

// ---------------------------------------------------------------------------
// EMA law

void ema_law() {
    double worst = 0;
    Rng rng(6);
    for (double beta : {0.5, 0.9, 0.99}) {
        const Cardinalities cards{1, 1, std::nullopt};
        ConfounderDictionary d = ConfounderDictionary::demographic(Modality::visual, cards, 4, beta, 128);
        const Tensor c0 = random_tensor(rng, {4}), p = random_tensor(rng, {4});
        d.ema_update(0, c0.data());
        for (int t = 1; t <= 50; ++t) {
            d.ema_update(0, p.data());
            for (std::size_t j = 0; j < 4; ++j) {
                const double lhs = std::abs(d.prototypes()(0, j) - p[j]);
                const double rhs = std::pow(beta, t) * std::abs(c0[j] - p[j]);
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        }
    }
    report(worst < 1e-12, "EMA law", fmt("max ||c_t - p| - beta^t |c_0 - p|| = %.2e (< 1e-12) over 50 steps", worst));
}

// ---------------------------------------------------------------------------
// k-means

void kmeans_criteria() {
    Rng rng(7);
    bool monotone = true;
    std::size_t checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor pts = random_tensor(rng, {60 + rng.index(60), 1 + rng.index(4)});
        const KMeansResult r = kmeans(pts, 2 + rng.index(8), static_cast<std::uint64_t>(trial));
        for (std::size_t i = 1; i < r.objective.size(); ++i) {
            monotone = monotone && r.objective[i] <= r.objective[i - 1];
            ++checked;
        }
    }
    Tensor blobs({40, 1});
    for (std::size_t i = 0; i < 40; ++i) blobs[i] = (i < 20 ? 0.0 : 100.0) + (static_cast<double>(i % 5) - 2.0) * 0.1;
    bool recovered = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const KMeansResult r = kmeans(blobs, 2, seed);
        for (std::size_t i = 0; i < 40; ++i) recovered = recovered && (r.assignment[i] == r.assignment[0]) == (i < 20);
        std::vector<double> c = {r.centroids[0], r.centroids[1]};
        std::sort(c.begin(), c.end());
        recovered = recovered && std::abs(c[0]) < 1e-12 && std::abs(c[1] - 100.0) < 1e-12;
    }
    const Tensor exact({4, 1}, {0.0, 0.0, 10.0, 10.0});
    const KMeansResult e = kmeans(exact, 2, 0);
    recovered = recovered && std::min(e.centroids[0], e.centroids[1]) == 0.0 &&
                std::max(e.centroids[0], e.centroids[1]) == 10.0;
    report(monotone && recovered, "k-means",
           fmt("objective non-increasing on %zu iterations: %s; two 1-D blobs recovered exactly: %s", checked,
               monotone ? "yes" : "no", recovered ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// Deconfounding and FACL tally

std::size_t range_total = 0, range_inside = 0;

void count_range(const Tensor& t) {
    range_total += t.size();
    for (double p : t.data()) range_inside += p > 0.0 && p < 1.0;
}

void deconfounding() {
    const auto t0 = Clock::now();
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ScmConfig scm;
        scm.n_samples = 1600;
        scm.rho_obs = 0.9;
        scm.seed = 100 + seed;
        const ShiftedData sd = make_anti_correlated(scm, 400, 0.1, seed);
        ExperimentConfig cfg;
        cfg.model.d = 32;
        cfg.train.epochs = 30;
        cfg.train.seed = seed;
        const VariantResult full = run_variant(sd.data, sd.split, cfg, ablation_variants()[0]);
        const VariantResult base = run_variant(sd.data, sd.split, cfg, ablation_variants()[3]);
        count_range(full.predictions);
        count_range(base.predictions);
        const double dp_f = full.report.overall_dp.value.value_or(NAN), dp_b = base.report.overall_dp.value.value_or(NAN);
        const double acc_f = full.report.overall.acc.value.value_or(NAN), acc_b = base.report.overall.acc.value.value_or(NAN);
        const bool win = dp_f < dp_b && acc_f >= acc_b;
        wins += win;
        std::printf("  seed %llu: full DP %.4f ACC %.4f | w/o BACL & FACL DP %.4f ACC %.4f | %s\n",
                    static_cast<unsigned long long>(seed), dp_f, acc_f, dp_b, acc_b, win ? "win" : "no win");
        std::fflush(stdout);
    }
    const double secs = seconds_since(t0);
    report(wins >= 8 && secs < 600.0, "deconfounding",
           fmt("full model lower DP and no worse ACC in %d/10 seeds (>= 8); %.0f s (< 600 s)", wins, secs));
}

void facl_tally() {
    const auto t0 = Clock::now();
    int tally = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ScmConfig scm;
        scm.n_samples = 1000;
        scm.rho_obs = 0.1;
        scm.rho_lat = 0.9;
        scm.seed = 500 + seed;
        const Dataset ds = generate_scm(scm);
        ExperimentConfig cfg;
        cfg.model.d = 32;
        cfg.train.epochs = 20;
        cfg.train.seed = seed;
        cfg.split_seed = seed;
        const Split split = make_split(ds, cfg.split, cfg.split_seed);
        const VariantResult no_bacl = run_variant(ds, split, cfg, ablation_variants()[1]);
        const VariantResult no_facl = run_variant(ds, split, cfg, ablation_variants()[2]);
        count_range(no_bacl.predictions);
        count_range(no_facl.predictions);
        const bool hit = no_facl.test_mse >= no_bacl.test_mse;
        tally += hit;
        std::printf("  seed %llu: test MSE w/o FACL %.5f, w/o BACL %.5f | %s\n", static_cast<unsigned long long>(seed),
                    no_facl.test_mse, no_bacl.test_mse, hit ? "FACL removal worse" : "BACL removal worse");
        std::fflush(stdout);
    }
    report(tally >= 6, "directional consistency",
           fmt("removing FACL degraded test MSE at least as much as removing BACL in %d/10 seeds (>= 6); %.0f s",
               tally, seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// Determinism

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism() {
    const char* toml = R"(seed = 9
[scm]
n_samples = 200
[model]
d = 16
[train]
epochs = 4
lr = 1e-3
[dicts]
mediator_size = 16
global_size = 16
)";
    const fs::path root = fs::temp_directory_path() / "dcan_acceptance_determinism";
    fs::remove_all(root);
    for (const char* run : {"a", "b"}) {
        RunConfig cfg = parse_run_config(toml, "determinism.toml");
        cfg.out_dir = root / run;
        cmd_generate(cfg);
        cmd_build_dicts(cfg);
        cmd_train(cfg);
        cmd_eval(cfg, std::nullopt);
    }
    int same = 0, total = 0;
    for (const char* f : {artifact::dataset, artifact::dicts, artifact::checkpoint, artifact::report_json,
                          artifact::report_text, artifact::report_csv}) {
        ++total;
        const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
        same += !a.empty() && a == b;
    }
    fs::remove_all(root);
    report(same == total, "determinism",
           fmt("%d/%d artifacts byte-identical across reruns (dataset, dictionaries, checkpoint, reports)", same, total));
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    const std::pair<const char*, std::function<void()>> criteria[] = {
        {"gradient fidelity", gradient_fidelity},
        {"metric oracles", metric_oracles},
        {"ablation identities", ablation_identities},
        {"EMA law", ema_law},
        {"k-means", kmeans_criteria},
        {"determinism", determinism},
        {"deconfounding", deconfounding},
        {"directional consistency", facl_tally},
    };
    for (const auto& [name, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report(false, name, std::string("threw: ") + e.what());
        }
    }
    report(range_total > 0 && range_inside == range_total, "prediction range",
           fmt("%zu/%zu test predictions strictly inside (0,1)", range_inside, range_total));
    std::printf("%d criteria failed; total %.0f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
