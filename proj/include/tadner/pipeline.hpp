#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/episodes.hpp"
#include "tadner/eval.hpp"
#include "tadner/span_detector.hpp"
#include "tadner/type_classifier.hpp"

namespace tadner {

struct Ablations {
  bool no_filter = false;
  bool no_type_names = false;
  bool no_span_finetune = false;
  bool no_type_finetune = false;

  bool operator==(const Ablations&) const = default;
};

struct PipelineConfig {
  FinetuneConfig span_finetune;
  FinetuneConfig type_finetune;
  Ablations ablations;
  // Type names become the prototypes and neither stage is fine-tuned.
  bool zero_shot = false;
  // Fine-tune the type encoder on the printed ratio instead of its negative log.
  bool literal_adaptation = false;
  // Replace both betas with the per-shot default for each support set.
  bool beta_from_support = false;
  std::uint64_t seed = 0;

  bool span_finetune_enabled() const { return !zero_shot && !ablations.no_span_finetune; }
  bool type_finetune_enabled() const { return !zero_shot && !ablations.no_type_finetune; }
  // Filtering needs a support threshold and real type names.
  bool filter_enabled() const {
    return !zero_shot && !ablations.no_filter && !ablations.no_type_names;
  }
};

struct SourceModels {
  SpanDetector detector;
  Encoder type_encoder;
  TypeNames names;
};

struct SentencePrediction {
  std::vector<std::string> tokens;
  SentenceSpans predicted;
  SentenceSpans gold;
};

struct EpisodeResult {
  std::vector<SentencePrediction> sentences;
  std::optional<FilterThreshold> threshold;
  std::vector<Prototype> prototypes;
  MetricsSummary metrics;
  ErrorBreakdown errors;
  std::size_t candidates = 0;  // spans proposed by the detector
  std::size_t filtered = 0;    // candidates dropped by the threshold
  EarlyStopResult span_stop;
  EarlyStopResult type_stop;
};

// Adapts copies of the source models to the episode's support set and labels
// its query set. The source models are not modified.
EpisodeResult run_episode(const SourceModels& models, const Episode& episode,
                          const PipelineConfig& cfg);

// Adapted models for one support set, reusable across many query sentences.
struct AdaptedModels {
  SpanDetector detector;
  Encoder type_encoder;
  TypeNames names;
  std::vector<Prototype> prototypes;
  std::optional<FilterThreshold> threshold;
  EarlyStopResult span_stop;
  EarlyStopResult type_stop;
};

AdaptedModels adapt(const SourceModels& models, std::span<const LabeledSentence> support,
                    const LabelSet& types, const PipelineConfig& cfg);

// Typed spans for one sentence; `candidates`/`filtered` are incremented when given.
SentenceSpans predict_sentence(const AdaptedModels& adapted, Tokens tokens,
                               std::size_t* candidates = nullptr, std::size_t* filtered = nullptr);

struct EpisodeFailure {
  std::size_t index = 0;
  std::string message;
};

struct BatchResult {
  // Canonical order: one slot per input episode, empty where the episode failed.
  std::vector<std::optional<EpisodeResult>> episodes;
  std::vector<EpisodeFailure> failures;
  AggregateReport report;
};

// Episode i runs with seed mix(cfg.seed, i), so results do not depend on `workers`.
BatchResult evaluate_episodes(const SourceModels& models, std::span<const Episode> episodes,
                              const PipelineConfig& cfg, std::size_t workers = 1);

std::string prediction_to_json_line(const SentencePrediction& prediction);

}  // namespace tadner
