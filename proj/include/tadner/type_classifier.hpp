#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/encoder.hpp"
#include "tadner/optim.hpp"

namespace tadner {

// Source of type-name vectors f(Map(t)). With `random` set, every label gets a
// fixed seeded vector instead of its encoded name (the no-type-names ablation).
struct TypeNames {
  TypeNameMap map;
  bool random = false;
  std::uint64_t seed = 0;

  Vector vector(const Encoder& encoder, std::string_view label) const;
  // Encoder-parameter gradients only flow for encoded names.
  bool differentiable() const { return !random; }
};

// One entity token with its sentence context and gold label.
struct EntityToken {
  std::size_t sentence = 0;
  std::size_t token = 0;
  std::string label;
};

std::vector<EntityToken> entity_tokens(std::span<const LabeledSentence> sentences);

struct TypeAwareRep {
  Vector entity_label;  // f(e) (+) f(Map(y))
  Vector label_entity;  // f(Map(y)) (+) f(e)
  std::string label;
};

std::vector<TypeAwareRep> build_type_aware_reps(const Encoder& encoder,
                                                std::span<const LabeledSentence> sentences,
                                                const TypeNames& names);

struct ContrastiveBatch {
  std::vector<TypeAwareRep> reps;
  double temperature = 0.05;
};

// (a . b) / sum_k (el_k . b), where el_k ranges over the batch's entity-label reps.
double normalized_sim(const Vector& a, const Vector& b, std::span<const Vector> entity_label_reps);

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<double> terms;   // per-anchor contributions, each >= 0
  Matrix grad_entity_label;    // M x 2r
  Matrix grad_label_entity;    // M x 2r
};

ContrastiveResult contrastive_loss(const ContrastiveBatch& batch);

// Contrastive loss of a batch of sentences, optionally accumulating the
// encoder-parameter gradient into `grad`.
double type_contrastive_loss(const Encoder& encoder, std::span<const LabeledSentence> batch,
                             const TypeNames& names, double temperature, Vector* grad);

struct TypeTrainReport {
  std::vector<double> step_losses;
};

TypeTrainReport train_source_type(Encoder& encoder, std::span<const LabeledSentence> corpus,
                                  const TypeNames& names, double temperature,
                                  const OptimizerConfig& config);

struct AdaptationResult {
  double loss = 0.0;
  Matrix grad_entities;  // M x r
  Matrix grad_names;     // T x r
};

// Softmax cross-entropy of entity-name similarities (or, with literal=true, the
// mean ratio s(e, name_y) / sum_j s(e, name_j) without the log).
AdaptationResult adaptation_loss(const Matrix& entity_vectors, std::span<const std::size_t> labels,
                                 const Matrix& name_vectors, bool literal = false);

double adaptation_loss(const Encoder& encoder, std::span<const LabeledSentence> support,
                       const LabelSet& target_types, const TypeNames& names, bool literal,
                       Vector* grad);

EarlyStopResult finetune_type(Encoder& encoder, std::span<const LabeledSentence> support,
                              const LabelSet& target_types, const TypeNames& names,
                              const FinetuneConfig& config, bool literal = false);

struct FilterThreshold {
  double gamma = -std::numeric_limits<double>::infinity();
};

FilterThreshold compute_threshold(const Encoder& encoder, std::span<const LabeledSentence> support,
                                  const TypeNames& names);

struct Prototype {
  std::string entity_type;
  Vector vector;  // width 2r
};

std::vector<Prototype> build_prototypes(const Encoder& encoder,
                                        std::span<const LabeledSentence> support,
                                        const LabelSet& target_types, const TypeNames& names);
std::vector<Prototype> zero_shot_prototypes(const Encoder& encoder, const LabelSet& target_types,
                                            const TypeNames& names);
// Support-mean prototypes with no name half: mean (+) mean.
std::vector<Prototype> support_only_prototypes(const Encoder& encoder,
                                               std::span<const LabeledSentence> support,
                                               const LabelSet& target_types);

struct SpanDecision {
  std::size_t best = 0;    // index into the prototypes
  double max_sim = 0.0;    // max_j (v (+) v) . p_j
  bool kept = false;
};

// Decision for one span vector v: score every prototype against v (+) v and keep
// iff max_sim / 2 > gamma. A null threshold disables filtering.
SpanDecision decide_span(const Vector& span_vector, std::span<const Prototype> prototypes,
                         const std::optional<FilterThreshold>& threshold);

// Mean of the span's in-context token rows.
Vector span_vector(const Matrix& sentence_rows, const SpanAnnotation& span);

std::vector<SpanAnnotation> classify_spans(const Encoder& encoder,
                                           std::span<const Prototype> prototypes,
                                           const std::optional<FilterThreshold>& threshold,
                                           Tokens tokens,
                                           std::span<const SpanAnnotation> candidates);

std::string prototypes_to_json(std::span<const Prototype> prototypes, const TypeNames& names);

}  // namespace tadner
