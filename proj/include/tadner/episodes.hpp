#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/rng.hpp"

namespace tadner {

struct Episode {
  std::vector<LabeledSentence> support;
  std::vector<LabeledSentence> query;
  LabelSet types;
  TaggingScheme scheme = TaggingScheme::IO;

  bool operator==(const Episode&) const = default;
};

enum class Protocol { EpisodeLevel, DatasetLevel };

struct SamplingConfig {
  std::size_t n_way = 1;
  std::size_t k_shot = 1;
  Protocol protocol = Protocol::EpisodeLevel;
  std::uint64_t seed = 0;
  // Per-type quota for the query set, [query_k, 2 * query_k]. 0 means k_shot.
  std::size_t query_k = 0;
  // Whole-set restarts before giving up with InsufficientData.
  std::size_t max_retries = 64;
};

// Entity mentions per type in one sentence.
std::map<std::string, std::size_t> count_entities(const LabeledSentence& sentence);

// Smallest per-type mention count over a set of sentences (0 without entities).
std::size_t min_shots(std::span<const LabeledSentence> sentences);

// Draws an n-way k-shot episode: support and query each hold between k and 2k
// mentions of every chosen type; other types are relabelled O.
Episode sample_episode(std::span<const LabeledSentence> dataset, const SamplingConfig& cfg,
                       Rng& rng);

// Dataset-level support: at least k mentions of every type in the dataset,
// built greedily and then pruned of sentences that are not needed.
std::vector<LabeledSentence> sample_support_set(std::span<const LabeledSentence> dataset,
                                                const SamplingConfig& cfg, Rng& rng);

std::string episode_to_json_line(const Episode& episode);
Episode episode_from_json_line(std::string_view line, std::size_t line_no = 0);

void save_episodes(std::span<const Episode> episodes, const std::filesystem::path& path);
std::vector<Episode> load_episodes(const std::filesystem::path& path);

}  // namespace tadner
