#include <cmath>

#include "dcan/dict.hpp"
#include "dcan/errors.hpp"
#include "dcan/ops.hpp"

namespace dcan {

using nlohmann::json;

ConfounderDictionary build_text_dictionary(const Corpus& corpus, std::span<const int> labels, const EmbeddingFn& embed,
                                           std::optional<double> threshold, std::size_t max_size) {
    const BiasLexicon lex = build_bias_lexicon(corpus, labels, embed, threshold, max_size);
    if (lex.entries.empty()) {
        throw EmptyDictionaryError("no word reaches bias score threshold " + std::to_string(lex.threshold));
    }
    return ConfounderDictionary::from_lexicon(lex, lex.entries.front().embedding.size());
}

ConfounderDictionary ConfounderDictionary::demographic(Modality modality, const Cardinalities& cards,
                                                       std::size_t dim, double beta, std::size_t cap) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("EMA beta must lie in [0,1]");
    const auto n = static_cast<std::size_t>(cards.race.value_or(1) * cards.gender * cards.age);
    if (n > cap) {
        throw ConfigError("demographic dictionary needs " + std::to_string(n) + " rows, cap is " + std::to_string(cap));
    }
    ConfounderDictionary d;
    d.modality_ = modality;
    d.dim_ = dim;
    d.beta_ = beta;
    d.prototypes_ = Tensor({n, dim});
    d.counts_.assign(n, 0);
    d.cards_ = cards;
    return d;
}

ConfounderDictionary ConfounderDictionary::from_lexicon(const BiasLexicon& lexicon, std::size_t dim) {
    if (lexicon.entries.empty()) throw EmptyDictionaryError("empty bias lexicon");
    ConfounderDictionary d;
    d.modality_ = Modality::text;
    d.dim_ = dim;
    d.beta_ = 1.0;
    std::vector<Tensor> rows;
    for (const BiasEntry& e : lexicon.entries) {
        if (e.embedding.size() != dim) throw DimensionError("lexicon embedding width mismatch");
        rows.push_back(e.embedding);
        d.words_.push_back(e.word);
    }
    d.prototypes_ = stack_rows(rows);
    d.counts_.assign(rows.size(), 1);
    return d;
}

std::size_t ConfounderDictionary::row_of(const Demographics& demo) const {
    if (!cards_) throw IndexError("dictionary is not indexed by demographics");
    const Cardinalities& c = *cards_;
    const int race = demo.race.value_or(0);
    if (demo.gender < 0 || demo.gender >= c.gender || demo.age < 0 || demo.age >= c.age ||
        race < 0 || race >= c.race.value_or(1) || demo.race.has_value() != c.race.has_value()) {
        throw IndexError("demographic triplet outside the dictionary index map");
    }
    return static_cast<std::size_t>((race * c.gender + demo.gender) * c.age + demo.age);
}

Demographics ConfounderDictionary::key_of(std::size_t row) const {
    if (!cards_ || row >= rows()) throw IndexError("row " + std::to_string(row) + " has no demographic key");
    const Cardinalities& c = *cards_;
    const int r = static_cast<int>(row);
    Demographics demo;
    demo.age = r % c.age;
    demo.gender = (r / c.age) % c.gender;
    if (c.race) demo.race = r / (c.age * c.gender);
    return demo;
}

void ConfounderDictionary::ema_update(std::size_t row, std::span<const double> batch_proto) {
    if (row >= rows() || !cards_) throw IndexError("EMA update of unknown dictionary row " + std::to_string(row));
    if (batch_proto.size() != dim_) throw DimensionError("EMA prototype width mismatch");
    std::span<double> c = prototypes_.row(row);
    if (counts_[row] == 0) {
        std::copy(batch_proto.begin(), batch_proto.end(), c.begin());
    } else {
        for (std::size_t j = 0; j < dim_; ++j) c[j] = beta_ * c[j] + (1.0 - beta_) * batch_proto[j];
    }
    ++counts_[row];
}

std::vector<std::size_t> ConfounderDictionary::active_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i] > 0) idx.push_back(i);
    }
    return idx;
}

Tensor ConfounderDictionary::active_rows() const {
    const std::vector<std::size_t> idx = active_indices();
    if (idx.empty()) {
        throw EmptyDictionaryError("confounder dictionary '" + std::string(modality_name(modality_)) +
                                   "' has no initialized rows");
    }
    Tensor out({idx.size(), dim_});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = prototypes_.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

json ConfounderDictionary::to_json() const {
    json j;
    j["modality"] = std::string(modality_name(modality_));
    j["beta"] = beta_;
    j["dim"] = dim_;
    if (cards_) {
        json cards = {{"gender", cards_->gender}, {"age", cards_->age}};
        if (cards_->race) cards["race"] = *cards_->race;
        j["cards"] = cards;
        json index = json::object();
        for (std::size_t r = 0; r < rows(); ++r) {
            const Demographics d = key_of(r);
            index[std::to_string(d.race.value_or(-1)) + "," + std::to_string(d.gender) + "," +
                  std::to_string(d.age)] = r;
        }
        j["index_map"] = index;
    } else {
        j["words"] = words_;
    }
    j["counts"] = counts_;
    json rows_json = json::array();
    for (std::size_t r = 0; r < rows(); ++r) {
        const auto row = prototypes_.row(r);
        rows_json.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["prototypes"] = rows_json;
    return j;
}

ConfounderDictionary ConfounderDictionary::from_json(const json& j) {
    try {
        ConfounderDictionary d;
        d.modality_ = parse_modality(j.at("modality").get<std::string>());
        d.beta_ = j.at("beta").get<double>();
        d.dim_ = j.at("dim").get<std::size_t>();
        d.counts_ = j.at("counts").get<std::vector<std::size_t>>();
        std::vector<double> data;
        for (const json& row : j.at("prototypes")) {
            const auto v = row.get<std::vector<double>>();
            if (v.size() != d.dim_) throw FormatError("dictionary row width mismatch");
            data.insert(data.end(), v.begin(), v.end());
        }
        if (d.counts_.empty() || data.size() != d.counts_.size() * d.dim_) {
            throw FormatError("dictionary rows and counts disagree");
        }
        d.prototypes_ = Tensor({d.counts_.size(), d.dim_}, std::move(data));
        if (j.contains("cards")) {
            const json& c = j["cards"];
            Cardinalities cards;
            cards.gender = c.at("gender").get<int>();
            cards.age = c.at("age").get<int>();
            cards.race = c.contains("race") ? std::optional<int>(c["race"].get<int>()) : std::nullopt;
            d.cards_ = cards;
            if (static_cast<std::size_t>(cards.race.value_or(1) * cards.gender * cards.age) != d.counts_.size()) {
                throw FormatError("index map does not cover the dictionary rows");
            }
        } else {
            d.words_ = j.at("words").get<std::vector<std::string>>();
        }
        return d;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed dictionary: ") + e.what());
    }
}

std::map<std::size_t, Tensor> batch_prototype_visual(const Tensor& feats, std::span<const std::size_t> rows) {
    if (feats.rank() != 2 || feats.rows() != rows.size() || rows.empty()) {
        throw DimensionError("batch_prototype_visual: features and row ids disagree");
    }
    std::map<std::size_t, Tensor> sums;
    std::map<std::size_t, double> counts;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [it, fresh] = sums.try_emplace(rows[i], Shape{feats.cols()}, 0.0);
        (void)fresh;
        const auto f = feats.row(i);
        for (std::size_t j = 0; j < f.size(); ++j) it->second[j] += f[j];
        counts[rows[i]] += 1.0;
    }
    for (auto& [row, t] : sums) {
        for (double& x : t.data()) x /= counts[row];
    }
    return sums;
}

Var audio_pool(Var seq, Var w_attn) {
    const std::size_t len = seq.value().rows();
    const std::size_t dim = seq.value().cols();
    const Var scores = matmul(seq, reshape(w_attn, {dim, 1}));  // [L x 1]
    const Var alpha = softmax(reshape(scores, {1, len}));
    return reshape(matmul(alpha, seq), {dim});
}

Tensor audio_pool(const Tensor& seq, const Tensor& w_attn) {
    if (seq.rank() != 2) throw DimensionError("audio_pool needs a [L x d] sequence");
    if (w_attn.size() != seq.cols()) throw DimensionError("audio_pool attention width mismatch");
    Tape tape;
    return audio_pool(tape.constant(seq), tape.constant(w_attn)).value();
}

std::map<std::size_t, Tensor> batch_prototype_audio(const Tensor& feats, std::span<const std::size_t> rows,
                                                    const Tensor& w_attn) {
    if (feats.rank() != 2 || feats.rows() != rows.size() || rows.empty()) {
        throw DimensionError("batch_prototype_audio: features and row ids disagree");
    }
    std::map<std::size_t, std::vector<Tensor>> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto f = feats.row(i);
        members[rows[i]].push_back(Tensor::vector({f.begin(), f.end()}));
    }
    std::map<std::size_t, Tensor> out;
    for (const auto& [row, list] : members) out.emplace(row, audio_pool(stack_rows(list), w_attn));
    return out;
}

}  // namespace dcan
