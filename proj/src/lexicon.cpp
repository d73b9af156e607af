#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "dcan/dict.hpp"
#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

namespace {

bool contains(const std::vector<std::string>& tokens, std::string_view w) {
    return std::find(tokens.begin(), tokens.end(), w) != tokens.end();
}

bool has_label(const LabeledText& t, int l) { return std::find(t.labels.begin(), t.labels.end(), l) != t.labels.end(); }

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

double word_cond_prob(const Corpus& corpus, std::string_view word, int label) {
    double n_label = 0.0, n_word = 0.0;
    for (const LabeledText& t : corpus) {
        if (!has_label(t, label)) continue;
        n_label += 1.0;
        if (contains(t.tokens, word)) n_word += 1.0;
    }
    return n_word / (n_label + kWordProbEpsilon);
}

double bias_score(const Corpus& corpus, std::string_view word, std::span<const int> labels) {
    if (labels.empty()) throw ContractError("bias_score needs at least one label");
    double lo = INFINITY, hi = -INFINITY;
    for (int l : labels) {
        const double p = word_cond_prob(corpus, word, l);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    return hi - lo;
}

std::vector<int> demographic_labels(const Demographics& demo, const Cardinalities& cards) {
    std::vector<int> labels = {demo.gender, cards.gender + demo.age};
    if (demo.race) labels.push_back(cards.gender + cards.age + *demo.race);
    return labels;
}

std::vector<int> all_demographic_labels(const Cardinalities& cards) {
    const int n = cards.gender + cards.age + cards.race.value_or(0);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i;
    return labels;
}

Tensor hash_embedding(std::string_view word, std::size_t dim, std::uint64_t seed) {
    Rng rng(derive_seed(seed, fnv1a(word)));
    Tensor t({dim});
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& x : t.data()) x = scale * rng.normal();
    return t;
}

BiasLexicon build_bias_lexicon(const Corpus& corpus, std::span<const int> labels, const EmbeddingFn& embed,
                               std::optional<double> threshold, std::size_t max_size) {
    if (corpus.empty()) throw ContractError("bias lexicon needs a non-empty corpus");
    if (labels.empty()) throw ContractError("bias lexicon needs at least one label");

    // One counting pass: N(l) and N(w, l) with each word counted once per text.
    std::unordered_map<int, std::size_t> label_pos;
    for (std::size_t i = 0; i < labels.size(); ++i) label_pos.emplace(labels[i], i);
    std::vector<double> n_label(labels.size(), 0.0);
    std::map<std::string, std::vector<double>> n_word;
    for (const LabeledText& t : corpus) {
        std::vector<std::size_t> present;
        for (int l : t.labels) {
            if (auto it = label_pos.find(l); it != label_pos.end()) present.push_back(it->second);
        }
        for (std::size_t p : present) n_label[p] += 1.0;
        const std::set<std::string> distinct(t.tokens.begin(), t.tokens.end());
        for (const std::string& w : distinct) {
            auto& counts = n_word.try_emplace(w, labels.size(), 0.0).first->second;
            for (std::size_t p : present) counts[p] += 1.0;
        }
    }

    BiasLexicon lex;
    lex.threshold = threshold.value_or(0.0);
    for (const auto& [w, counts] : n_word) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t p = 0; p < labels.size(); ++p) {
            const double prob = counts[p] / (n_label[p] + kWordProbEpsilon);
            lo = std::min(lo, prob);
            hi = std::max(hi, prob);
        }
        const double score = hi - lo;
        if (score >= lex.threshold) lex.entries.push_back({w, score, Tensor()});
    }
    std::stable_sort(lex.entries.begin(), lex.entries.end(),
                     [](const BiasEntry& a, const BiasEntry& b) { return a.score > b.score; });
    if (lex.entries.size() > max_size) lex.entries.resize(max_size);
    for (BiasEntry& e : lex.entries) e.embedding = embed(e.word);
    return lex;
}

}  // namespace dcan
