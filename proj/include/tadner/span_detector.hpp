#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"
#include "tadner/encoder.hpp"
#include "tadner/optim.hpp"
#include "tadner/rng.hpp"

namespace tadner {

// Boundary tag classes for a scheme: {O, I}, {O, B, I} or {O, B, I, E, S}.
std::vector<char> detection_classes(TaggingScheme scheme);

// Linear classification layer over encoder rows, with dropout on its input.
class SpanHead {
 public:
  SpanHead() = default;
  SpanHead(std::size_t classes, std::size_t dim, double dropout_rate);
  // Small random weights drawn from the seed, zero bias.
  static SpanHead initialized(std::size_t classes, std::size_t dim, double dropout_rate,
                              std::uint64_t seed);

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }
  double dropout_rate() const { return dropout_; }

  // Flat storage: row-major weight (classes x dim) followed by the bias.
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight() const;
  Eigen::Map<const Vector> bias() const;

  bool operator==(const SpanHead&) const = default;

 private:
  std::size_t classes_ = 0;
  std::size_t dim_ = 0;
  double dropout_ = 0.0;
  Vector params_;
};

struct SpanDetector {
  Encoder encoder;
  SpanHead head;
  TaggingScheme scheme = TaggingScheme::IO;
};

// Inverted-dropout mask (N x r) with entries 0 or 1/(1-p).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

// Row-wise softmax(W * (mask . h_i) + b). A null mask means inference (identity).
Matrix tag_probabilities(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                         const Matrix* mask = nullptr);
// Convenience overload: training=true draws a dropout mask from rng.
Matrix tag_probabilities(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                         bool training, Rng* rng);

// Mean over tokens of -log p(gold class).
double span_loss(const Matrix& distribution, std::span<const std::size_t> gold);

// Gold class index per token for the detector (types stripped).
std::vector<std::size_t> detection_targets(const LabeledSentence& sentence, TaggingScheme scheme);

struct SpanGradient {
  double loss = 0.0;
  Vector encoder;  // empty when the encoder is frozen
  Vector head;
};

// Loss of one sentence and its gradients; mask may be null.
SpanGradient span_loss_and_gradient(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                                    std::span<const std::size_t> gold, const Matrix* mask);

struct TrainReport {
  std::vector<double> step_losses;
};

TrainReport train_source_span(SpanDetector& detector, std::span<const LabeledSentence> corpus,
                              const OptimizerConfig& config);

// Fine-tunes on the support set with loss-based early stopping. The stopping
// loss is the dropout-free support loss; the update uses a dropout mask.
EarlyStopResult finetune_span(SpanDetector& detector, std::span<const LabeledSentence> support,
                              const FinetuneConfig& config, std::uint64_t seed);

// Argmax boundary tags for a sentence.
std::vector<std::string> predict_boundary_tags(const SpanDetector& detector, Tokens tokens);

// Untyped candidate spans: argmax decoding, then maximal-run merging.
std::vector<SpanAnnotation> extract_candidate_spans(const SpanDetector& detector, Tokens tokens);

}  // namespace tadner
