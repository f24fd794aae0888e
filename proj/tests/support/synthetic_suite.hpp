#pragma once

// The toy few-shot setting used by the end-to-end checks: six types with
// disjoint vocabularies, four for source training and two held out as targets.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tadner/config.hpp"
#include "tadner/pipeline.hpp"
#include "tadner/synthetic.hpp"

namespace suite {

struct Suite {
  tadner::SyntheticCorpus generator;
  std::vector<tadner::LabeledSentence> source;
  std::vector<tadner::LabeledSentence> target_pool;  // support sets are drawn from here
  std::vector<tadner::LabeledSentence> query;
  // Target mentions plus mentions of source types tagged O.
  std::vector<tadner::LabeledSentence> distractor_query;
  tadner::RunConfig config;
  tadner::Vocabulary vocab;
  tadner::LabelSet target_types;
};

tadner::SyntheticSpec spec();
tadner::RunConfig run_config(std::uint64_t seed);
Suite make(std::uint64_t seed);
tadner::SourceModels train(const Suite& s);

// 2-way 1-shot support set for episode `e`.
std::vector<tadner::LabeledSentence> support(const Suite& s, std::size_t e);

struct Results {
  double f1 = 0.0;             // mean over episodes, clean query
  double zero_shot_f1 = 0.0;   // mean over episodes, no support
  double filtered_f1 = 0.0;    // distractor query, filtering on
  double unfiltered_f1 = 0.0;  // distractor query, filtering off
  std::size_t true_spans = 0, true_lost = 0;
  std::size_t distractors = 0, distractors_removed = 0;
};

Results evaluate(const Suite& s, const tadner::SourceModels& models, std::size_t episodes);

}  // namespace suite
