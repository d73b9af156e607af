#include "dcan/run_config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dcan/errors.hpp"

namespace dcan {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

struct ValueParser {
    std::string_view text;
    std::size_t pos = 0;
    const std::string& where;

    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(where + ": " + msg); }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    json value() {
        skip_ws();
        if (pos >= text.size()) fail("missing value");
        const char c = text[pos];
        if (c == '"') return string();
        if (c == '[') return array();
        return scalar();
    }

    json string() {
        std::string out;
        ++pos;
        while (pos < text.size() && text[pos] != '"') {
            char ch = text[pos++];
            if (ch == '\\' && pos < text.size()) {
                const char e = text[pos++];
                switch (e) {
                    case 'n': ch = '\n'; break;
                    case 't': ch = '\t'; break;
                    case '"': ch = '"'; break;
                    case '\\': ch = '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(ch);
        }
        if (pos >= text.size()) fail("unterminated string");
        ++pos;
        return out;
    }

    json array() {
        json out = json::array();
        ++pos;
        skip_ws();
        if (pos < text.size() && text[pos] == ']') {
            ++pos;
            return out;
        }
        while (true) {
            out.push_back(value());
            skip_ws();
            if (pos >= text.size()) fail("unterminated array");
            if (text[pos] == ',') {
                ++pos;
                skip_ws();
                if (pos < text.size() && text[pos] == ']') {
                    ++pos;
                    return out;
                }
                continue;
            }
            if (text[pos] == ']') {
                ++pos;
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }

    json scalar() {
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] != ',' && text[pos] != ']' &&
               !std::isspace(static_cast<unsigned char>(text[pos]))) {
            ++pos;
        }
        std::string tok(text.substr(start, pos - start));
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string digits;
        for (char ch : tok) {
            if (ch != '_') digits.push_back(ch);
        }
        const char* b = digits.data();
        const char* e = b + digits.size();
        const bool floaty = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
        if (!floaty) {
            std::int64_t i = 0;
            const auto r = std::from_chars(b, e, i);
            if (r.ec == std::errc() && r.ptr == e) return i;
        } else {
            double d = 0.0;
            const auto r = std::from_chars(b, e, d);
            if (r.ec == std::errc() && r.ptr == e) return d;
        }
        fail("cannot parse value '" + tok + "'");
    }
};

}  // namespace

json parse_toml(std::string_view text, const std::string& source) {
    json root = json::object();
    json* section = &root;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw FormatError(where + ": malformed section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (root.contains(name)) throw FormatError(where + ": duplicate section [" + name + "]");
            root[name] = json::object();
            section = &root[name];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw FormatError(where + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw FormatError(where + ": empty key");
        if (section->contains(key)) throw FormatError(where + ": duplicate key '" + key + "'");
        ValueParser p{trim(line.substr(eq + 1)), 0, where};
        json v = p.value();
        p.skip_ws();
        if (p.pos != p.text.size()) throw FormatError(where + ": trailing characters after value");
        (*section)[key] = std::move(v);
    }
    return root;
}

namespace {

// Typed reads from one section that reject unknown keys and wrong types.
class Section {
public:
    Section(const json& root, const std::string& name) : name_(name) {
        if (root.contains(name)) {
            if (!root.at(name).is_object()) throw ConfigError("'" + name + "' must be a section");
            j_ = &root.at(name);
        }
    }
    bool present() const { return j_ != nullptr; }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_ || !j_->contains(key)) return;
        const json& v = j_->at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
                out = v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
                out = v.get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0)) {
                    throw ConfigError("");
                }
                out = v.get<T>();
            } else {
                out = v.get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError(label(key) + " has the wrong type");
        }
    }

    template <class T>
    void read_optional(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_ || !j_->contains(key)) return;
        T v{};
        read(key, v);
        out = v;
    }

    const json* raw(const std::string& key) {
        seen_.insert(key);
        return j_ && j_->contains(key) ? &j_->at(key) : nullptr;
    }

    void finish() const {
        if (!j_) return;
        for (const auto& [k, v] : j_->items()) {
            if (!seen_.count(k)) throw ConfigError("unknown key " + label(k));
        }
    }

    std::string label(const std::string& key) const { return "'" + name_ + "." + key + "'"; }

private:
    std::string name_;
    const json* j_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_toml(const json& toml) {
    static const std::set<std::string> known = {"seed", "out", "data", "scm", "split", "model", "train", "dicts", "eval"};
    for (const auto& [k, v] : toml.items()) {
        if (!known.count(k)) throw ConfigError("unknown key or section '" + k + "'");
    }
    RunConfig c;
    if (toml.contains("seed")) {
        const json& s = toml.at("seed");
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ConfigError("'seed' must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (toml.contains("out")) {
        if (!toml.at("out").is_string()) throw ConfigError("'out' must be a string");
        c.out_dir = toml.at("out").get<std::string>();
    }

    Section data(toml, "data");
    data.read_optional("path", c.dataset_path);
    data.finish();

    Section scm(toml, "scm");
    if (scm.present()) {
        ScmConfig s;
        std::optional<std::uint64_t> scm_seed;
        std::optional<int> race;
        bool has_race = true;
        scm.read("n_samples", s.n_samples);
        scm.read("k_traits", s.k_traits);
        scm.read("dim_v", s.dims.v);
        scm.read("dim_a", s.dims.a);
        scm.read("dim_t", s.dims.t);
        scm.read("genders", s.cards.gender);
        scm.read("ages", s.cards.age);
        scm.read("has_race", has_race);
        scm.read_optional("races", race);
        scm.read("rho_obs", s.rho_obs);
        scm.read("rho_lat", s.rho_lat);
        scm.read_optional("seed", scm_seed);
        scm.read("anti_correlate", s.anti_correlate_test);
        scm.read("population", s.population);
        scm.read("signal_dim", s.signal_dim);
        scm.read("feature_noise", s.feature_noise);
        scm.read("label_noise", s.label_noise);
        scm.read("tokens_per_sample", s.tokens_per_sample);
        scm.finish();
        if (race) s.cards.race = *race;
        if (!has_race) s.cards.race.reset();
        if (scm_seed) s.seed = *scm_seed;
        else s.seed = c.seed.value_or(0);
        c.scm = s;
    }

    Section split(toml, "split");
    std::string kind = std::string(split_kind_name(c.split.kind));
    std::optional<int> held_out;
    split.read("kind", kind);
    split.read("train", c.split.train);
    split.read("val", c.split.val);
    split.read("test", c.split.test);
    split.read("ood_val", c.split.ood_val);
    split.read_optional("held_out", held_out);
    split.finish();
    c.split.kind = parse_split_kind(kind);
    c.split.held_out = held_out;

    Section model(toml, "model");
    model.read("d", c.model.d);
    model.read("heads", c.model.heads);
    model.read("use_bacl", c.model.use_bacl);
    model.read("use_facl", c.model.use_facl);
    model.read("facl_residual", c.model.facl_residual);
    model.finish();

    Section train(toml, "train");
    train.read("batch_size", c.train.batch_size);
    train.read("lr", c.train.lr);
    train.read("weight_decay", c.train.weight_decay);
    train.read("l2", c.train.l2);
    train.read("epochs", c.train.epochs);
    train.read("keep_best", c.train.keep_best);
    train.read("facl_rebuild_interval", c.train.facl_rebuild_interval);
    train.finish();

    Section dicts(toml, "dicts");
    dicts.read("text_size", c.dicts.text_size);
    dicts.read_optional("text_threshold", c.dicts.text_threshold);
    dicts.read("demographic_cap", c.dicts.demographic_cap);
    dicts.read("mediator_size", c.dicts.mediator_size);
    dicts.read("global_size", c.dicts.global_size);
    dicts.read("beta", c.dicts.beta);
    dicts.read("kmeans_iter", c.dicts.kmeans_iter);
    dicts.read("embedding_seed", c.dicts.embedding_seed);
    dicts.finish();

    Section eval(toml, "eval");
    eval.read("tau", c.tau);
    if (const json* s = eval.raw("strategies")) {
        if (!s->is_array()) throw ConfigError("'eval.strategies' must be an array of strings");
        c.ood_strategies.clear();
        for (const json& v : *s) {
            if (!v.is_string()) throw ConfigError("'eval.strategies' must be an array of strings");
            c.ood_strategies.push_back(parse_split_kind(v.get<std::string>()));
        }
    }
    eval.finish();
    return c;
}

RunConfig parse_run_config(std::string_view text, const std::string& source) {
    return run_config_from_toml(parse_toml(text, source));
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

void RunConfig::validate() const {
    if (!seed) throw ConfigError("a seed is required (top-level 'seed = N' or --seed)");
    if (scm) scm->validate();
    train.validate();
    dicts.validate();
    ModelConfig m = model;
    if (scm) {
        m.dims = scm->dims;
        m.k_traits = scm->k_traits;
    }
    m.validate();
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("'eval.tau' must lie in [0,1]");
    for (SplitKind k : ood_strategies) {
        if (k == SplitKind::random) throw ConfigError("'eval.strategies' accepts only ood_* strategies");
    }
}

std::uint64_t RunConfig::run_seed() const {
    if (!seed) throw ConfigError("a seed is required (top-level 'seed = N' or --seed)");
    return *seed;
}

ExperimentConfig RunConfig::experiment() const {
    ExperimentConfig e;
    e.model = model;
    e.train = train;
    e.train.seed = run_seed();
    e.dicts = dicts;
    e.split = split;
    e.split_seed = run_seed();
    e.tau = tau;
    return e;
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["out"] = out_dir.generic_string();
    j["data"] = {{"path", dataset_path ? json(*dataset_path) : json(nullptr)}};
    if (scm) {
        const ScmConfig& s = *scm;
        j["scm"] = {{"n_samples", s.n_samples},
                    {"k_traits", s.k_traits},
                    {"dims", {{"v", s.dims.v}, {"a", s.dims.a}, {"t", s.dims.t}}},
                    {"cards", {{"gender", s.cards.gender}, {"age", s.cards.age},
                               {"race", s.cards.race ? json(*s.cards.race) : json(nullptr)}}},
                    {"rho_obs", s.rho_obs},
                    {"rho_lat", s.rho_lat},
                    {"seed", s.seed},
                    {"anti_correlate", s.anti_correlate_test},
                    {"population", s.population},
                    {"signal_dim", s.signal_dim},
                    {"feature_noise", s.feature_noise},
                    {"label_noise", s.label_noise},
                    {"tokens_per_sample", s.tokens_per_sample}};
    } else {
        j["scm"] = nullptr;
    }
    j["split"] = {{"kind", split_kind_name(split.kind)},
                  {"train", split.train},
                  {"val", split.val},
                  {"test", split.test},
                  {"ood_val", split.ood_val},
                  {"held_out", split.held_out ? json(*split.held_out) : json(nullptr)}};
    j["model"] = {{"d", model.d},
                  {"heads", model.heads},
                  {"use_bacl", model.use_bacl},
                  {"use_facl", model.use_facl},
                  {"facl_residual", model.facl_residual}};
    json t = train.to_json();
    t.erase("seed");
    j["train"] = t;
    j["dicts"] = dicts.to_json();
    json strategies = json::array();
    for (SplitKind k : ood_strategies) strategies.push_back(split_kind_name(k));
    j["eval"] = {{"tau", tau}, {"strategies", strategies}};
    return j;
}

std::string run_config_reference() {
    return R"(Run configuration (TOML subset; every key optional except seed):

  seed = 7                       required; also settable with --seed
  out = "dcan_run"               output directory (--out overrides)

  [data]
  path = "data.jsonl"            dataset file (--dataset overrides)

  [scm]                          synthetic generator, required by `generate`
  n_samples = 1000   k_traits = 5   dim_v = 16   dim_a = 12   dim_t = 16
  genders = 2   ages = 3   races = 3   has_race = true
  rho_obs = 0.5   rho_lat = 0.0   seed = <run seed>   population = 0
  anti_correlate = false   signal_dim = 4   feature_noise = 0.3
  label_noise = 0.2   tokens_per_sample = 8

  [split]
  kind = "random"                random | ood_age | ood_gender | ood_race
  train = 0.8   val = 0.1   test = 0.1   ood_val = 0.1   held_out = <smallest group>

  [model]
  d = 32   heads = 4   use_bacl = true   use_facl = true   facl_residual = false

  [train]
  batch_size = 32   lr = 1e-4   weight_decay = 1e-4   l2 = 1e-4   epochs = 30
  keep_best = true   facl_rebuild_interval = 0   (epochs; 0 keeps FACL dictionaries frozen)

  [dicts]
  text_size = 128   text_threshold = <unset: top text_size words>
  demographic_cap = 128   mediator_size = 64   global_size = 128   beta = 0.99
  kmeans_iter = 100   embedding_seed = 32327

  [eval]
  tau = 0.5   strategies = ["ood_gender", "ood_age"]
)";
}

}  // namespace dcan
