#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcan/data.hpp"
#include "dcan/tape.hpp"
#include "dcan/tensor.hpp"
#include "json.hpp"

namespace dcan {

// ---------------------------------------------------------------------------
// Text bias lexicon

// One transcript with the sensitive-attribute labels it carries. A text may
// carry several labels (one per attribute), see demographic_labels().
struct LabeledText {
    std::vector<std::string> tokens;
    std::vector<int> labels;
};
using Corpus = std::vector<LabeledText>;

inline constexpr double kWordProbEpsilon = 1e-8;

// N(w,l) / (N(l) + eps): share of texts with label l that contain w.
double word_cond_prob(const Corpus& corpus, std::string_view word, int label);

// max_l P(w|l) - min_l P(w|l) over `labels`.
double bias_score(const Corpus& corpus, std::string_view word, std::span<const int> labels);

// Label ids for a subject: gender g -> g, age a -> G + a, race r -> G + A + r.
std::vector<int> demographic_labels(const Demographics& demo, const Cardinalities& cards);
std::vector<int> all_demographic_labels(const Cardinalities& cards);

using EmbeddingFn = std::function<Tensor(const std::string&)>;

// Deterministic word vector: N(0, 1/d) entries seeded by a hash of the word.
Tensor hash_embedding(std::string_view word, std::size_t dim, std::uint64_t seed);

struct BiasEntry {
    std::string word;
    double score;
    Tensor embedding;
};

struct BiasLexicon {
    std::vector<BiasEntry> entries;  // descending score, ties by word
    double threshold = 0.0;
};

// Scores the whole vocabulary, keeps words with score >= threshold (all words
// when threshold is unset), sorted descending and truncated to max_size.
BiasLexicon build_bias_lexicon(const Corpus& corpus, std::span<const int> labels, const EmbeddingFn& embed,
                               std::optional<double> threshold, std::size_t max_size);

// ---------------------------------------------------------------------------
// Confounder dictionary
class ConfounderDictionary;

// Lexicon turned into a dictionary; throws EmptyDictionaryError when no word passes.
ConfounderDictionary build_text_dictionary(const Corpus& corpus, std::span<const int> labels, const EmbeddingFn& embed,
                                           std::optional<double> threshold, std::size_t max_size);

// Prototype matrix for back-door adjustment. Visual and audio dictionaries are
// indexed by demographic triplet and filled online by EMA; the text dictionary
// holds fixed word embeddings. Rows never written stay zero and are excluded
// from retrieval.
class ConfounderDictionary {
public:
    ConfounderDictionary() = default;

    // One row per (race, gender, age) combination; throws ConfigError if that exceeds `cap`.
    static ConfounderDictionary demographic(Modality modality, const Cardinalities& cards, std::size_t dim,
                                            double beta, std::size_t cap);
    static ConfounderDictionary from_lexicon(const BiasLexicon& lexicon, std::size_t dim);

    Modality modality() const noexcept { return modality_; }
    std::size_t rows() const noexcept { return counts_.size(); }
    std::size_t width() const noexcept { return dim_; }
    double beta() const noexcept { return beta_; }
    const Tensor& prototypes() const noexcept { return prototypes_; }
    bool initialized(std::size_t row) const { return counts_.at(row) > 0; }
    std::size_t count(std::size_t row) const { return counts_.at(row); }
    bool is_demographic() const noexcept { return cards_.has_value(); }
    const std::vector<std::string>& words() const noexcept { return words_; }

    // Row of a demographic triplet; throws IndexError when not mapped.
    std::size_t row_of(const Demographics& demo) const;
    // Inverse of row_of for demographic dictionaries.
    Demographics key_of(std::size_t row) const;

    // First write sets the row; later writes do c <- beta c + (1 - beta) proto.
    void ema_update(std::size_t row, std::span<const double> batch_proto);

    // Stacked initialized rows [n x d]; throws EmptyDictionaryError when none.
    Tensor active_rows() const;
    std::vector<std::size_t> active_indices() const;

    nlohmann::json to_json() const;
    static ConfounderDictionary from_json(const nlohmann::json& j);

    friend bool operator==(const ConfounderDictionary&, const ConfounderDictionary&) = default;

private:
    Modality modality_ = Modality::visual;
    std::size_t dim_ = 0;
    double beta_ = 0.99;
    Tensor prototypes_;
    std::vector<std::size_t> counts_;
    std::optional<Cardinalities> cards_;
    std::vector<std::string> words_;
};

// Arithmetic mean of the rows of `feats` [B x d] per dictionary row present in the batch.
std::map<std::size_t, Tensor> batch_prototype_visual(const Tensor& feats, std::span<const std::size_t> rows);

// Attention pooling over a sequence [L x d]: alpha = softmax_t(w . x_t), returns sum_t alpha_t x_t.
Tensor audio_pool(const Tensor& seq, const Tensor& w_attn);
Var audio_pool(Var seq, Var w_attn);

// Per-group audio prototype: audio_pool over the batch members of each group.
std::map<std::size_t, Tensor> batch_prototype_audio(const Tensor& feats, std::span<const std::size_t> rows,
                                                    const Tensor& w_attn);

}  // namespace dcan
