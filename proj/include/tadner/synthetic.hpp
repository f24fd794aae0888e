#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/rng.hpp"

namespace tadner {

// Generator for toy corpora with vocabulary-separable entity types. Every type
// owns a disjoint set of entity words and its type name is the phrase made of
// those words. Mentions are introduced by shared trigger words and padded with
// shared filler words tagged O.
struct SyntheticSpec {
  std::size_t types = 6;
  std::size_t words_per_type = 3;
  // Per-type word counts; overrides words_per_type when non-empty.
  std::vector<std::size_t> type_words;
  std::size_t filler_words = 24;
  std::size_t trigger_words = 4;
  // Words that close every mention; 0 lets a filler follow it.
  std::size_t closer_words = 0;
  std::size_t min_fillers = 2;
  std::size_t max_fillers = 6;
  std::size_t max_mentions = 2;
  std::size_t max_mention_length = 1;
};

class SyntheticCorpus {
 public:
  explicit SyntheticCorpus(SyntheticSpec spec);

  const SyntheticSpec& spec() const { return spec_; }
  const std::string& label(std::size_t type) const { return labels_.at(type); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& words(std::size_t type) const { return words_.at(type); }
  TypeNameMap names() const;

  // One sentence with 1..max_mentions mentions drawn from `types`. Mentions of
  // `distractors` are inserted the same way but tagged O.
  LabeledSentence sentence(Rng& rng, std::span<const std::size_t> types,
                           std::span<const std::size_t> distractors = {},
                           TaggingScheme scheme = TaggingScheme::IO) const;
  std::vector<LabeledSentence> sentences(std::size_t count, Rng& rng,
                                         std::span<const std::size_t> types,
                                         std::span<const std::size_t> distractors = {},
                                         TaggingScheme scheme = TaggingScheme::IO) const;

 private:
  SyntheticSpec spec_;
  std::vector<std::string> labels_;
  std::vector<std::vector<std::string>> words_;
  std::vector<std::string> fillers_;
  std::vector<std::string> triggers_;
  std::vector<std::string> closers_;
};

}  // namespace tadner
