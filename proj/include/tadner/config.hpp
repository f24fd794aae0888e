#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/encoder.hpp"
#include "tadner/episodes.hpp"
#include "tadner/optim.hpp"
#include "tadner/pipeline.hpp"

namespace tadner {

struct DataPaths {
  std::string source;    // CoNLL training corpus
  std::string episodes;  // episode JSONL
  std::string support;   // CoNLL support set for predict
  std::string input;     // CoNLL or one-sentence-per-line input for predict
};

struct FinetuneSettings {
  std::optional<std::size_t> beta;  // unset = per-shot default
  double learning_rate = 1e-3;
  std::size_t max_steps = 50;
  bool ties_count_as_rise = false;
  double weight_decay = 0.0;
};

struct RunConfig {
  DataPaths data;
  TaggingScheme scheme = TaggingScheme::IO;
  // Builtin map name, a JSON file path, or an inline object (resolved on load).
  TypeNameMap type_names;
  std::string type_names_source;
  std::size_t dim = 16;
  std::size_t context_window = 1;
  std::size_t layers = 1;
  std::string precomputed;  // TADE file; replaces both reference encoders when set
  OptimizerConfig optimizer;
  double temperature = 0.05;
  double dropout = 0.2;
  FinetuneSettings finetune;
  std::uint64_t seed = 0;
  Ablations ablations;
  bool zero_shot = false;
  bool literal_adaptation = false;
  Protocol protocol = Protocol::EpisodeLevel;
  std::size_t n_way = 2;
  std::optional<std::size_t> k_shot;
  std::vector<std::string> vocab_files;
  std::size_t workers = 1;

  // Unknown keys and out-of-range values raise InvalidConfig.
  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

// Directory holding the shipped type-name maps (TADNER_DATA_DIR overrides).
std::filesystem::path data_dir();
TypeNameMap builtin_type_names(std::string_view name);
// A builtin name, or a path when the text names an existing file or ends in ".json".
TypeNameMap resolve_type_names(std::string_view spec);

// Fine-tune and ablation settings. With neither beta nor k_shot configured,
// beta is chosen per support set from its smallest per-type mention count.
PipelineConfig make_pipeline_config(const RunConfig& cfg);

}  // namespace tadner
