#pragma once

#include <span>

#include "tadner/config.hpp"
#include "tadner/pipeline.hpp"

namespace tadner {

// Tokens of the corpora plus every word of every type name, in first-seen order.
Vocabulary build_vocabulary(std::span<const LabeledSentence> corpus, const TypeNameMap& names);

struct SourceTrainingReport {
  TrainReport span;
  TypeTrainReport type;
};

// Trains the span detector and the type encoder on the source corpus. Both
// encoders are initialized independently from the config seed.
SourceModels train_source_models(const RunConfig& cfg, std::span<const LabeledSentence> corpus,
                                 const Vocabulary& vocab, SourceTrainingReport* report = nullptr);

}  // namespace tadner
