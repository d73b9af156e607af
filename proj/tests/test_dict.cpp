#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "dcan/dict.hpp"
#include "dcan/errors.hpp"
#include "dcan/kmeans.hpp"
#include "dcan/rng.hpp"

using namespace dcan;

namespace {

LabeledText text(std::vector<std::string> tokens, int label) { return {std::move(tokens), {label}}; }

EmbeddingFn embed(std::size_t d) {
    return [d](const std::string& w) { return hash_embedding(w, d, 1); };
}

Tensor random_points(Rng& rng, std::size_t n, std::size_t d) {
    Tensor t({n, d});
    for (double& x : t.data()) x = rng.normal();
    return t;
}

// Objective of `centroids` under the exhaustive nearest assignment.
double objective(const Tensor& points, const Tensor& centroids) {
    double total = 0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            double s = 0;
            for (std::size_t j = 0; j < points.cols(); ++j) {
                const double e = points(i, j) - centroids(c, j);
                s += e * e;
            }
            best = std::min(best, s);
        }
        total += best;
    }
    return total;
}

}  // namespace

TEST_CASE("word conditional probability") {
    Corpus corpus;
    for (int i = 0; i < 10; ++i) corpus.push_back(text(i < 3 ? std::vector<std::string>{"w", "x"} : std::vector<std::string>{"x"}, 0));
    corpus.push_back(text({"w"}, 1));
    CHECK(word_cond_prob(corpus, "w", 0) == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(word_cond_prob(corpus, "absent", 0) == 0.0);
    CHECK(word_cond_prob(corpus, "w", 7) == doctest::Approx(0.0));
    // Repeated tokens in one text count once.
    Corpus rep = {text({"w", "w", "w"}, 0), text({"y"}, 0)};
    CHECK(word_cond_prob(rep, "w", 0) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("bias score") {
    Corpus corpus = {text({"pink"}, 0), text({"blue"}, 0), text({"blue", "pink"}, 1), text({"blue", "pink"}, 1)};
    const int one[] = {0};
    const int both[] = {0, 1};
    CHECK(bias_score(corpus, "pink", one) == 0.0);
    CHECK(bias_score(corpus, "blue", both) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(bias_score(corpus, "pink", both) == doctest::Approx(0.5).epsilon(1e-8));
    Corpus uniform = {text({"u"}, 0), text({"u"}, 1)};
    CHECK(bias_score(uniform, "u", both) == doctest::Approx(0.0).epsilon(1e-12));
    Corpus only_a = {text({"q"}, 0), text({"z"}, 0), text({"z"}, 1)};
    CHECK(bias_score(only_a, "q", both) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("bias scores stay in [0,1] and vanish exactly for label-independent words") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Corpus corpus;
        for (int i = 0; i < 30; ++i) {
            std::vector<std::string> toks;
            for (int j = 0; j < 4; ++j) toks.push_back("w" + std::to_string(rng.index(8)));
            toks.push_back("everywhere");
            corpus.push_back({toks, {static_cast<int>(rng.index(3))}});
        }
        const int labels[] = {0, 1, 2};
        for (int w = 0; w < 8; ++w) {
            const double s = bias_score(corpus, "w" + std::to_string(w), labels);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK(bias_score(corpus, "everywhere", labels) < 1e-7);
    }
}

TEST_CASE("text dictionary from a constructed corpus") {
    Corpus corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back(text({"pink", "the", "cat"}, 0));
    for (int i = 0; i < 6; ++i) corpus.push_back(text({"the", "cat"}, 1));
    const int labels[] = {0, 1};
    const ConfounderDictionary d = build_text_dictionary(corpus, labels, embed(4), 0.5, 16);
    REQUIRE(d.rows() == 1);
    CHECK(d.words().front() == "pink");
    CHECK(d.width() == 4);
    CHECK(d.initialized(0));
    const Tensor e = hash_embedding("pink", 4, 1);
    for (std::size_t j = 0; j < 4; ++j) CHECK(d.prototypes()(0, j) == e[j]);

    CHECK_THROWS_AS(build_text_dictionary(corpus, labels, embed(4), 1.01, 16), EmptyDictionaryError);

    const ConfounderDictionary all = build_text_dictionary(corpus, labels, embed(4), 0.0, 16);
    CHECK(all.rows() == 3);
    CHECK(all.words().front() == "pink");
    const ConfounderDictionary capped = build_text_dictionary(corpus, labels, embed(4), 0.0, 2);
    CHECK(capped.rows() == 2);

    const BiasLexicon lex = build_bias_lexicon(corpus, labels, embed(4), std::nullopt, 8);
    for (std::size_t i = 1; i < lex.entries.size(); ++i) CHECK(lex.entries[i - 1].score >= lex.entries[i].score);
}

TEST_CASE("hash embeddings are deterministic per word") {
    CHECK(hash_embedding("alpha", 8, 3) == hash_embedding("alpha", 8, 3));
    CHECK(hash_embedding("alpha", 8, 3) != hash_embedding("beta", 8, 3));
    CHECK(hash_embedding("alpha", 8, 3) != hash_embedding("alpha", 8, 4));
}

TEST_CASE("demographic labels are disjoint across attributes") {
    const Cardinalities cards;  // 2 genders, 3 ages, 3 races
    Demographics d;
    d.gender = 1;
    d.age = 2;
    d.race = 0;
    CHECK(demographic_labels(d, cards) == std::vector<int>{1, 4, 5});
    CHECK(all_demographic_labels(cards).size() == 8);
}

TEST_CASE("EMA update examples") {
    const Cardinalities cards{1, 1, std::nullopt};
    const double one[] = {1.0};
    const double two[] = {2.0};
    auto dict_with = [&](double beta) {
        ConfounderDictionary d = ConfounderDictionary::demographic(Modality::visual, cards, 1, beta, 128);
        d.ema_update(0, one);
        return d;
    };
    ConfounderDictionary keep = dict_with(1.0);
    keep.ema_update(0, two);
    CHECK(keep.prototypes()[0] == 1.0);
    ConfounderDictionary replace = dict_with(0.0);
    replace.ema_update(0, two);
    CHECK(replace.prototypes()[0] == 2.0);
    ConfounderDictionary blend = dict_with(0.9);
    blend.ema_update(0, two);
    CHECK(blend.prototypes()[0] == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(blend.count(0) == 2);
    CHECK_THROWS_AS(blend.ema_update(5, two), IndexError);
}

TEST_CASE("first write initializes the row and uninitialized rows are excluded") {
    const Cardinalities cards;
    ConfounderDictionary d = ConfounderDictionary::demographic(Modality::audio, cards, 3, 0.99, 128);
    CHECK(d.rows() == 18);
    CHECK_THROWS_AS(d.active_rows(), EmptyDictionaryError);
    Demographics demo;
    demo.gender = 1;
    demo.age = 0;
    demo.race = 2;
    const std::size_t row = d.row_of(demo);
    CHECK(d.key_of(row) == demo);
    const double p[] = {3.0, -1.0, 0.5};
    d.ema_update(row, p);
    CHECK(d.active_indices() == std::vector<std::size_t>{row});
    CHECK(d.active_rows() == Tensor({1, 3}, {3.0, -1.0, 0.5}));
    CHECK_THROWS_AS(ConfounderDictionary::demographic(Modality::visual, cards, 3, 0.99, 10), ConfigError);
    Demographics bad = demo;
    bad.age = 7;
    CHECK_THROWS_AS(d.row_of(bad), IndexError);
}

TEST_CASE("EMA contraction toward a constant prototype") {
    const Cardinalities cards{1, 1, std::nullopt};
    for (double beta : {0.5, 0.9, 0.99}) {
        ConfounderDictionary d = ConfounderDictionary::demographic(Modality::visual, cards, 2, beta, 128);
        const double c0[] = {4.0, -2.0};
        const double p[] = {1.0, 1.0};
        d.ema_update(0, c0);
        for (int t = 1; t <= 50; ++t) {
            d.ema_update(0, p);
            const double f = std::pow(beta, t);
            CHECK(std::abs(d.prototypes()(0, 0) - p[0] - f * (c0[0] - p[0])) < 1e-12);
            CHECK(std::abs(d.prototypes()(0, 1) - p[1] - f * (c0[1] - p[1])) < 1e-12);
        }
    }
}

TEST_CASE("EMA rows remain convex combinations of the observed prototypes") {
    Rng rng(17);
    const Cardinalities cards{1, 1, std::nullopt};
    const double beta = 0.8;
    ConfounderDictionary d = ConfounderDictionary::demographic(Modality::visual, cards, 3, beta, 128);
    std::vector<Tensor> seen;
    std::vector<double> weights;
    for (int t = 0; t < 30; ++t) {
        Tensor p({3});
        for (double& x : p.data()) x = rng.normal();
        d.ema_update(0, p.data());
        if (seen.empty()) {
            weights.push_back(1.0);
        } else {
            for (double& w : weights) w *= beta;
            weights.push_back(1.0 - beta);
        }
        seen.push_back(p);
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-12);
        for (std::size_t j = 0; j < 3; ++j) {
            double v = 0;
            for (std::size_t i = 0; i < seen.size(); ++i) v += weights[i] * seen[i][j];
            CHECK(std::abs(d.prototypes()(0, j) - v) < 1e-12);
        }
    }
}

TEST_CASE("dictionary JSON round trip") {
    const Cardinalities cards;
    ConfounderDictionary d = ConfounderDictionary::demographic(Modality::visual, cards, 2, 0.95, 128);
    const double p[] = {0.25, -1.0 / 3.0};
    d.ema_update(4, p);
    d.ema_update(4, p);
    const ConfounderDictionary back = ConfounderDictionary::from_json(nlohmann::json::parse(d.to_json().dump()));
    CHECK(back == d);
    const nlohmann::json j = d.to_json();
    CHECK(j.contains("index_map"));
    CHECK(j.contains("prototypes"));
    CHECK(j.at("beta").get<double>() == 0.95);
}

TEST_CASE("visual batch prototypes") {
    const std::size_t one_row[] = {3};
    const auto single = batch_prototype_visual(Tensor({1, 2}, {1.5, -2.0}), one_row);
    CHECK(single.at(3) == Tensor::vector({1.5, -2.0}));

    const std::size_t same[] = {0, 0};
    const auto cancel = batch_prototype_visual(Tensor({2, 2}, {1.0, 2.0, -1.0, -2.0}), same);
    CHECK(cancel.at(0) == Tensor::vector({0.0, 0.0}));

    const std::size_t rows[] = {1, 0, 1};
    const auto two = batch_prototype_visual(Tensor({3, 2}, {1, 2, 5, 5, 3, 4}), rows);
    CHECK(two.size() == 2);
    CHECK(two.at(1) == Tensor::vector({2.0, 3.0}));
    CHECK(two.at(0) == Tensor::vector({5.0, 5.0}));
}

TEST_CASE("audio pooling") {
    const Tensor one({1, 3}, {1.0, 2.0, 3.0});
    CHECK(audio_pool(one, Tensor::vector({5.0, -1.0, 2.0})) == Tensor::vector({1.0, 2.0, 3.0}));

    const Tensor seq({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const Tensor mean = audio_pool(seq, Tensor::vector({0.0, 0.0}));
    CHECK(mean[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mean[1] == doctest::Approx(0.5).epsilon(1e-15));

    // Scores ln2 and 0 give alpha = (2/3, 1/3).
    const Tensor w = Tensor::vector({std::log(2.0), 0.0});
    const Tensor h = audio_pool(seq, w);
    CHECK(std::abs(h[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(h[1] - 1.0 / 3.0) < 1e-15);

    const std::size_t rows[] = {0, 0, 1};
    const auto protos = batch_prototype_audio(Tensor({3, 2}, {1, 0, 0, 1, 7, 7}), rows, w);
    CHECK(std::abs(protos.at(0)[0] - 2.0 / 3.0) < 1e-15);
    CHECK(protos.at(1) == Tensor::vector({7.0, 7.0}));
}

TEST_CASE("kmeans examples") {
    Rng rng(5);
    const Tensor pts = random_points(rng, 12, 3);
    SUBCASE("k = 1 gives the mean") {
        const KMeansResult r = kmeans(pts, 1, 1);
        for (std::size_t j = 0; j < 3; ++j) {
            double m = 0;
            for (std::size_t i = 0; i < 12; ++i) m += pts(i, j);
            CHECK(r.centroids(0, j) == doctest::Approx(m / 12).epsilon(1e-12));
        }
    }
    SUBCASE("k = P puts every point in its own cluster") {
        const KMeansResult r = kmeans(pts, 12, 1);
        std::vector<std::size_t> a = r.assignment;
        std::sort(a.begin(), a.end());
        for (std::size_t i = 0; i < 12; ++i) CHECK(a[i] == i);
        CHECK(r.objective.back() == doctest::Approx(0.0));
    }
    SUBCASE("two 1-D blobs") {
        const Tensor blobs({4, 1}, {0.0, 0.0, 10.0, 10.0});
        const KMeansResult r = kmeans(blobs, 2, 3);
        std::vector<double> c = {r.centroids[0], r.centroids[1]};
        std::sort(c.begin(), c.end());
        CHECK(c[0] == 0.0);
        CHECK(c[1] == 10.0);
        // Exhaustive oracle over all 2-partitions of the four points.
        double best = std::numeric_limits<double>::infinity();
        for (int mask = 1; mask < 15; ++mask) {
            double s[2] = {0, 0}, n[2] = {0, 0};
            for (int i = 0; i < 4; ++i) {
                s[(mask >> i) & 1] += blobs[i];
                n[(mask >> i) & 1] += 1;
            }
            double obj = 0;
            for (int i = 0; i < 4; ++i) {
                const int g = (mask >> i) & 1;
                obj += (blobs[i] - s[g] / n[g]) * (blobs[i] - s[g] / n[g]);
            }
            best = std::min(best, obj);
        }
        CHECK(r.objective.back() == best);
    }
    SUBCASE("too few points") { CHECK_THROWS_AS(kmeans(pts, 13, 1), ConfigError); }
}

TEST_CASE("kmeans objective never increases and matches the exhaustive assignment") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor pts = random_points(rng, 40, 2);
        const KMeansResult r = kmeans(pts, 5, static_cast<std::uint64_t>(trial), 50);
        for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1]);
        if (r.converged) CHECK(objective(pts, r.centroids) == doctest::Approx(r.objective.back()).epsilon(1e-12));
    }
}

TEST_CASE("front-door dictionaries") {
    Rng rng(21);
    const Tensor pts = random_points(rng, 20, 3);
    const FrontDoorDictionaries one = build_frontdoor_dicts(pts, 1, 1, 4);
    CHECK(max_abs_diff(one.mediator, one.global) < 1e-12);

    Tensor blobs({20, 2});
    for (std::size_t i = 0; i < 20; ++i) {
        blobs(i, 0) = (i < 10 ? -50.0 : 50.0) + 0.1 * rng.normal();
        blobs(i, 1) = 0.1 * rng.normal();
    }
    const FrontDoorDictionaries two = build_frontdoor_dicts(blobs, 2, 3, 4);
    CHECK(two.mediator.rows() == 2);
    CHECK(two.global.rows() == 3);
    CHECK(two.mediator(0, 0) * two.mediator(1, 0) < 0.0);

    CHECK(build_frontdoor_dicts(pts, 4, 6, 9) == build_frontdoor_dicts(pts, 4, 6, 9));
    CHECK_THROWS_AS(build_frontdoor_dicts(pts, 4, 21, 9), ConfigError);
    const FrontDoorDictionaries fd = build_frontdoor_dicts(pts, 4, 6, 9);
    CHECK(FrontDoorDictionaries::from_json(nlohmann::json::parse(fd.to_json().dump())) == fd);
}
