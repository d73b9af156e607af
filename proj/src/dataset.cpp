#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dcan/data.hpp"
#include "dcan/errors.hpp"
#include "json.hpp"

namespace dcan {

using nlohmann::json;

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::visual: return "v";
        case Modality::audio: return "a";
        case Modality::text: return "t";
    }
    return "?";
}

Modality parse_modality(std::string_view name) {
    if (name == "v") return Modality::visual;
    if (name == "a") return Modality::audio;
    if (name == "t") return Modality::text;
    throw FormatError("unknown modality '" + std::string(name) + "'");
}

std::size_t FeatureDims::of(Modality m) const {
    switch (m) {
        case Modality::visual: return v;
        case Modality::audio: return a;
        case Modality::text: return t;
    }
    return 0;
}

const Tensor& Sample::features(Modality m) const {
    switch (m) {
        case Modality::visual: return v;
        case Modality::audio: return a;
        case Modality::text: return t;
    }
    return v;
}

namespace {

void check_sample(const DatasetHeader& h, const Sample& s, const std::string& where) {
    auto fail = [&](const std::string& what) { throw FormatError(where + ": " + what); };
    if (s.id.empty()) fail("empty id");
    for (Modality m : kModalities) {
        const Tensor& f = s.features(m);
        if (f.rank() != 1 || f.size() != h.dims.of(m)) {
            fail("feature '" + std::string(modality_name(m)) + "' has " + std::to_string(f.size()) +
                 " values, header declares " + std::to_string(h.dims.of(m)));
        }
        if (!f.all_finite()) fail("non-finite feature value");
    }
    if (s.label.rank() != 1 || s.label.size() != h.k_traits) {
        fail("label has " + std::to_string(s.label.size()) + " values, header declares " + std::to_string(h.k_traits));
    }
    for (double y : s.label.data()) {
        if (!(y >= 0.0 && y <= 1.0)) fail("label value " + std::to_string(y) + " outside [0,1]");
    }
    if (s.demo.gender < 0 || s.demo.gender >= h.cards.gender) fail("gender index out of range");
    if (s.demo.age < 0 || s.demo.age >= h.cards.age) fail("age index out of range");
    if (h.cards.race.has_value() != s.demo.race.has_value()) fail("race presence disagrees with header");
    if (s.demo.race && (*s.demo.race < 0 || *s.demo.race >= *h.cards.race)) fail("race index out of range");
}

void check_header(const DatasetHeader& h, const std::string& where) {
    if (h.dims.v == 0 || h.dims.a == 0 || h.dims.t == 0) throw FormatError(where + ": feature dims must be positive");
    if (h.k_traits != 4 && h.k_traits != 5) throw FormatError(where + ": k_traits must be 4 or 5");
    if (h.cards.gender < 1 || h.cards.age < 1 || (h.cards.race && *h.cards.race < 1)) {
        throw FormatError(where + ": category cardinalities must be positive");
    }
}

Tensor vector_field(const json& j, const char* key) {
    const json& arr = j.at(key);
    if (!arr.is_array() || arr.empty()) throw FormatError(std::string("field '") + key + "' must be a non-empty array");
    std::vector<double> v;
    v.reserve(arr.size());
    for (const json& x : arr) {
        if (!x.is_number()) throw FormatError(std::string("field '") + key + "' must hold numbers");
        v.push_back(x.get<double>());
    }
    return Tensor::vector(std::move(v));
}

json header_json(const DatasetHeader& h) {
    json cards = {{"gender", h.cards.gender}, {"age", h.cards.age}};
    if (h.cards.race) cards["race"] = *h.cards.race;
    return {{"dims", {{"v", h.dims.v}, {"a", h.dims.a}, {"t", h.dims.t}}}, {"k_traits", h.k_traits}, {"cards", cards}};
}

json sample_json(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["v"] = s.v.values();
    j["a"] = s.a.values();
    j["t"] = s.t.values();
    if (s.tokens) j["tokens"] = *s.tokens;
    j["label"] = s.label.values();
    json demo = {{"gender", s.demo.gender}, {"age", s.demo.age}};
    if (s.demo.race) demo["race"] = *s.demo.race;
    j["demo"] = demo;
    return j;
}

}  // namespace

void Dataset::validate() const {
    check_header(header, "header");
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string where = "sample " + std::to_string(i);
        check_sample(header, samples[i], where);
        if (!ids.insert(samples[i].id).second) throw FormatError(where + ": duplicate id '" + samples[i].id + "'");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out{header, {}};
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) out.samples.push_back(samples.at(i));
    return out;
}

Dataset parse_dataset(std::istream& in, const std::string& source) {
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::unordered_set<std::string> ids;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(where + ": invalid JSON (" + e.what() + ")");
        }
        try {
            if (!have_header) {
                DatasetHeader& h = ds.header;
                const json& dims = j.at("dims");
                h.dims = {dims.at("v").get<std::size_t>(), dims.at("a").get<std::size_t>(),
                          dims.at("t").get<std::size_t>()};
                h.k_traits = j.at("k_traits").get<std::size_t>();
                const json& cards = j.at("cards");
                h.cards.gender = cards.at("gender").get<int>();
                h.cards.age = cards.at("age").get<int>();
                h.cards.race = cards.contains("race") ? std::optional<int>(cards["race"].get<int>()) : std::nullopt;
                check_header(h, where);
                have_header = true;
                continue;
            }
            Sample s;
            s.id = j.at("id").get<std::string>();
            s.v = vector_field(j, "v");
            s.a = vector_field(j, "a");
            s.t = vector_field(j, "t");
            if (j.contains("tokens")) s.tokens = j["tokens"].get<std::vector<std::string>>();
            s.label = vector_field(j, "label");
            const json& demo = j.at("demo");
            s.demo.gender = demo.at("gender").get<int>();
            s.demo.age = demo.at("age").get<int>();
            if (demo.contains("race")) s.demo.race = demo["race"].get<int>();
            check_sample(ds.header, s, where);
            if (!ids.insert(s.id).second) throw FormatError(where + ": duplicate id '" + s.id + "'");
            ds.samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw FormatError(where + ": " + e.what());
        } catch (const DimensionError& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    if (!have_header) throw FormatError(source + ": missing header line");
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open dataset '" + path.string() + "'");
    return parse_dataset(in, path.string());
}

std::string serialize_dataset(const Dataset& ds) {
    std::string out = header_json(ds.header).dump();
    out += '\n';
    for (const Sample& s : ds.samples) {
        out += sample_json(s).dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write dataset '" + path.string() + "'");
    out << serialize_dataset(ds);
    if (!out) throw ConfigError("failed writing dataset '" + path.string() + "'");
}

}  // namespace dcan
