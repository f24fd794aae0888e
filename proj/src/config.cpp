#include "tadner/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tadner/errors.hpp"

#ifndef TADNER_DATA_DIR
#define TADNER_DATA_DIR "data"
#endif

namespace tadner {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw Error(Errc::InvalidConfig, std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == it.key();
    if (!ok) throw Error(Errc::InvalidConfig, "unknown key '" + it.key() + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidConfig, std::string("bad value for '") + key + "'");
  }
}

void read_count(const json& obj, const char* key, std::size_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    throw Error(Errc::InvalidConfig, std::string("'") + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

std::string protocol_name(Protocol p) {
  return p == Protocol::EpisodeLevel ? "episode_level" : "dataset_level";
}

}  // namespace

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("TADNER_DATA_DIR"); env && *env) return env;
  return TADNER_DATA_DIR;
}

TypeNameMap builtin_type_names(std::string_view name) {
  const auto path = data_dir() / "type_names" / (std::string(name) + ".json");
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::InvalidConfig, "no builtin type-name map '" + std::string(name) + "'");
  }
  return TypeNameMap::load(path);
}

TypeNameMap resolve_type_names(std::string_view spec) {
  const std::filesystem::path p(spec);
  if (std::filesystem::exists(p) || p.extension() == ".json") return TypeNameMap::load(p);
  return builtin_type_names(spec);
}

RunConfig RunConfig::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config",
             {"data", "scheme", "type_names", "encoder", "optimizer", "temperature", "dropout",
              "finetune", "seed", "ablations", "zero_shot", "literal_adaptation", "protocol",
              "n_way", "k_shot", "vocab_files", "workers"});
  RunConfig cfg;
  if (doc.contains("data")) {
    const auto& d = doc["data"];
    check_keys(d, "data", {"source", "episodes", "support", "input"});
    read(d, "source", cfg.data.source);
    read(d, "episodes", cfg.data.episodes);
    read(d, "support", cfg.data.support);
    read(d, "input", cfg.data.input);
  }
  if (doc.contains("scheme")) {
    std::string s;
    read(doc, "scheme", s);
    try {
      cfg.scheme = parse_scheme(s);
    } catch (const Error& e) {
      throw Error(Errc::InvalidConfig, e.what());
    }
  }
  if (doc.contains("type_names")) {
    const auto& t = doc["type_names"];
    if (t.is_object()) {
      cfg.type_names = TypeNameMap::from_json(t.dump());
      cfg.type_names_source = "inline";
    } else if (t.is_string()) {
      cfg.type_names_source = t.get<std::string>();
      cfg.type_names = resolve_type_names(cfg.type_names_source);
    } else {
      throw Error(Errc::InvalidConfig, "type_names must be a name, a path or an object");
    }
  }
  if (doc.contains("encoder")) {
    const auto& e = doc["encoder"];
    check_keys(e, "encoder", {"dim", "context_window", "layers", "precomputed"});
    read_count(e, "dim", cfg.dim);
    read_count(e, "context_window", cfg.context_window);
    read_count(e, "layers", cfg.layers);
    read(e, "precomputed", cfg.precomputed);
  }
  if (doc.contains("optimizer")) {
    const auto& o = doc["optimizer"];
    check_keys(o, "optimizer",
               {"learning_rate", "warmup_fraction", "batch_size", "epochs", "weight_decay"});
    read(o, "learning_rate", cfg.optimizer.learning_rate);
    read(o, "warmup_fraction", cfg.optimizer.warmup_fraction);
    read_count(o, "batch_size", cfg.optimizer.batch_size);
    read_count(o, "epochs", cfg.optimizer.epochs);
    read(o, "weight_decay", cfg.optimizer.weight_decay);
  }
  read(doc, "temperature", cfg.temperature);
  read(doc, "dropout", cfg.dropout);
  if (doc.contains("finetune")) {
    const auto& f = doc["finetune"];
    check_keys(f, "finetune",
               {"beta", "learning_rate", "max_steps", "ties_count_as_rise", "weight_decay"});
    if (f.contains("beta") && !(f["beta"].is_string() && f["beta"] == "auto")) {
      std::size_t beta = 0;
      read_count(f, "beta", beta);
      cfg.finetune.beta = beta;
    }
    read(f, "learning_rate", cfg.finetune.learning_rate);
    read_count(f, "max_steps", cfg.finetune.max_steps);
    read(f, "ties_count_as_rise", cfg.finetune.ties_count_as_rise);
    read(f, "weight_decay", cfg.finetune.weight_decay);
  }
  read(doc, "seed", cfg.seed);
  if (doc.contains("ablations")) {
    const auto& a = doc["ablations"];
    check_keys(a, "ablations", {"no_filter", "no_type_names", "no_span_finetune", "no_type_finetune"});
    read(a, "no_filter", cfg.ablations.no_filter);
    read(a, "no_type_names", cfg.ablations.no_type_names);
    read(a, "no_span_finetune", cfg.ablations.no_span_finetune);
    read(a, "no_type_finetune", cfg.ablations.no_type_finetune);
  }
  read(doc, "zero_shot", cfg.zero_shot);
  read(doc, "literal_adaptation", cfg.literal_adaptation);
  if (doc.contains("protocol")) {
    std::string p;
    read(doc, "protocol", p);
    if (p == "episode_level") cfg.protocol = Protocol::EpisodeLevel;
    else if (p == "dataset_level") cfg.protocol = Protocol::DatasetLevel;
    else throw Error(Errc::InvalidConfig, "protocol must be episode_level or dataset_level");
  }
  read_count(doc, "n_way", cfg.n_way);
  if (doc.contains("k_shot")) {
    std::size_t k = 0;
    read_count(doc, "k_shot", k);
    cfg.k_shot = k;
  }
  read(doc, "vocab_files", cfg.vocab_files);
  read_count(doc, "workers", cfg.workers);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

void RunConfig::validate() const {
  EncoderConfig enc;
  enc.dim = dim;
  enc.context_window = context_window;
  enc.layers = layers;
  enc.validate();
  optimizer.validate();
  if (!(temperature > 0.0)) throw Error(Errc::InvalidConfig, "temperature must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidConfig, "dropout must lie in [0, 1)");
  if (finetune.beta && *finetune.beta < 1) throw Error(Errc::InvalidConfig, "beta must be at least 1");
  if (n_way < 1) throw Error(Errc::InvalidConfig, "n_way must be at least 1");
  if (k_shot && *k_shot < 1 && !zero_shot) throw Error(Errc::InvalidConfig, "k_shot must be at least 1");
  if (workers < 1) throw Error(Errc::InvalidConfig, "workers must be at least 1");
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["data"] = {{"source", data.source}, {"episodes", data.episodes},
                 {"support", data.support}, {"input", data.input}};
  doc["scheme"] = std::string(scheme_name(scheme));
  doc["type_names"] = nlohmann::ordered_json::parse(type_names.to_json());
  doc["encoder"] = {{"dim", dim}, {"context_window", context_window}, {"layers", layers},
                    {"precomputed", precomputed}};
  doc["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                      {"warmup_fraction", optimizer.warmup_fraction},
                      {"batch_size", optimizer.batch_size},
                      {"epochs", optimizer.epochs},
                      {"weight_decay", optimizer.weight_decay}};
  doc["temperature"] = temperature;
  doc["dropout"] = dropout;
  doc["finetune"] = {{"beta", finetune.beta ? nlohmann::ordered_json(*finetune.beta) : "auto"},
                     {"learning_rate", finetune.learning_rate},
                     {"max_steps", finetune.max_steps},
                     {"ties_count_as_rise", finetune.ties_count_as_rise},
                     {"weight_decay", finetune.weight_decay}};
  doc["seed"] = seed;
  doc["ablations"] = {{"no_filter", ablations.no_filter},
                      {"no_type_names", ablations.no_type_names},
                      {"no_span_finetune", ablations.no_span_finetune},
                      {"no_type_finetune", ablations.no_type_finetune}};
  doc["zero_shot"] = zero_shot;
  doc["literal_adaptation"] = literal_adaptation;
  doc["protocol"] = protocol_name(protocol);
  doc["n_way"] = n_way;
  if (k_shot) doc["k_shot"] = *k_shot;
  doc["vocab_files"] = vocab_files;
  doc["workers"] = workers;
  return doc.dump(2) + "\n";
}

PipelineConfig make_pipeline_config(const RunConfig& cfg) {
  PipelineConfig p;
  FinetuneConfig f;
  if (cfg.finetune.beta) f.beta = *cfg.finetune.beta;
  else if (cfg.k_shot) f.beta = default_beta(*cfg.k_shot);
  else p.beta_from_support = true;
  f.learning_rate = cfg.finetune.learning_rate;
  f.max_steps = cfg.finetune.max_steps;
  f.ties_count_as_rise = cfg.finetune.ties_count_as_rise;
  f.weight_decay = cfg.finetune.weight_decay;
  p.span_finetune = f;
  p.type_finetune = f;
  p.ablations = cfg.ablations;
  p.zero_shot = cfg.zero_shot;
  p.literal_adaptation = cfg.literal_adaptation;
  p.seed = cfg.seed;
  return p;
}

}  // namespace tadner
