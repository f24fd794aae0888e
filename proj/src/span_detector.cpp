#include "tadner/span_detector.hpp"

#include <algorithm>
#include <cmath>

#include "tadner/errors.hpp"

namespace tadner {

std::vector<char> detection_classes(TaggingScheme scheme) {
  switch (scheme) {
    case TaggingScheme::IO: return {'O', 'I'};
    case TaggingScheme::BIO: return {'O', 'B', 'I'};
    case TaggingScheme::BIOES: return {'O', 'B', 'I', 'E', 'S'};
  }
  return {'O', 'I'};
}

SpanHead::SpanHead(std::size_t classes, std::size_t dim, double dropout_rate)
    : classes_(classes), dim_(dim), dropout_(dropout_rate) {
  if (classes < 2 || dim < 1) throw Error(Errc::InvalidConfig, "span head needs >= 2 classes");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(Errc::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(classes * dim + classes));
}

SpanHead SpanHead::initialized(std::size_t classes, std::size_t dim, double dropout_rate,
                               std::uint64_t seed) {
  SpanHead head(classes, dim, dropout_rate);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < classes * dim; ++i) {
    head.params_[static_cast<Eigen::Index>(i)] = rng.normal() * scale;
  }
  return head;
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
SpanHead::weight() const {
  return {params_.data(), static_cast<Eigen::Index>(classes_), static_cast<Eigen::Index>(dim_)};
}

Eigen::Map<const Vector> SpanHead::bias() const {
  return {params_.data() + classes_ * dim_, static_cast<Eigen::Index>(classes_)};
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix mask(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      mask(i, j) = rng.bernoulli(rate) ? 0.0 : keep_scale;
    }
  }
  return mask;
}

namespace {

Matrix head_input(const Encoder& encoder, const SpanHead& head, Tokens tokens, const Matrix* mask,
                  Matrix* raw = nullptr) {
  Matrix h = encoder.encode_sentence(tokens);
  if (static_cast<std::size_t>(h.cols()) != head.dim()) {
    throw Error(Errc::LengthMismatch, "encoder width differs from span head width");
  }
  if (raw) *raw = h;
  if (mask) {
    if (mask->rows() != h.rows() || mask->cols() != h.cols()) {
      throw Error(Errc::LengthMismatch, "dropout mask shape does not match the encoding");
    }
    h = h.cwiseProduct(*mask);
  }
  return h;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix logits_of(const SpanHead& head, const Matrix& input) {
  Matrix logits = input * head.weight().transpose();
  logits.rowwise() += head.bias().transpose();
  return logits;
}

}  // namespace

Matrix tag_probabilities(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                         const Matrix* mask) {
  return softmax_rows(logits_of(head, head_input(encoder, head, tokens, mask)));
}

Matrix tag_probabilities(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                         bool training, Rng* rng) {
  if (!training || head.dropout_rate() == 0.0) return tag_probabilities(encoder, head, tokens);
  if (!rng) throw Error(Errc::InvalidConfig, "training mode needs a random stream for dropout");
  const Matrix mask = dropout_mask(tokens.size(), head.dim(), head.dropout_rate(), *rng);
  return tag_probabilities(encoder, head, tokens, &mask);
}

double span_loss(const Matrix& distribution, std::span<const std::size_t> gold) {
  if (static_cast<std::size_t>(distribution.rows()) != gold.size()) {
    throw Error(Errc::LengthMismatch, "gold tag count " + std::to_string(gold.size()) +
                                          " differs from " + std::to_string(distribution.rows()) +
                                          " predicted rows");
  }
  if (gold.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= static_cast<std::size_t>(distribution.cols())) {
      throw Error(Errc::LengthMismatch, "gold class index out of range");
    }
    total -= std::log(distribution(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gold[i])));
  }
  return total / static_cast<double>(gold.size());
}

std::vector<std::size_t> detection_targets(const LabeledSentence& sentence, TaggingScheme scheme) {
  const auto classes = detection_classes(scheme);
  auto spans = spans_from_tags(sentence);
  for (auto& span : spans) span.entity_type.reset();
  const auto tags = tags_from_spans(spans, sentence.size(), scheme);
  std::vector<std::size_t> targets;
  targets.reserve(tags.size());
  for (const auto& tag : tags) {
    const char prefix = tag.front();
    targets.push_back(static_cast<std::size_t>(
        std::find(classes.begin(), classes.end(), prefix) - classes.begin()));
  }
  return targets;
}

SpanGradient span_loss_and_gradient(const Encoder& encoder, const SpanHead& head, Tokens tokens,
                                    std::span<const std::size_t> gold, const Matrix* mask) {
  const Matrix input = head_input(encoder, head, tokens, mask);
  const Matrix probs = softmax_rows(logits_of(head, input));
  SpanGradient out;
  out.loss = span_loss(probs, gold);

  const auto n = static_cast<double>(gold.size());
  Matrix dlogits = probs;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    dlogits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gold[i])) -= 1.0;
  }
  dlogits /= n;

  const auto c = static_cast<Eigen::Index>(head.classes());
  const auto r = static_cast<Eigen::Index>(head.dim());
  out.head = Vector::Zero(head.parameters().size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out.head.data(), c, r) = dlogits.transpose() * input;
  out.head.tail(c) = dlogits.colwise().sum().transpose();

  if (encoder.trainable()) {
    Matrix dinput = dlogits * head.weight();
    if (mask) dinput = dinput.cwiseProduct(*mask);
    out.encoder = encoder.zero_gradient();
    encoder.backward_accumulate(tokens, dinput, out.encoder);
  }
  return out;
}

TrainReport train_source_span(SpanDetector& detector, std::span<const LabeledSentence> corpus,
                              const OptimizerConfig& config) {
  config.validate();
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "span detector needs training sentences");
  std::vector<std::vector<std::size_t>> targets;
  targets.reserve(corpus.size());
  for (const auto& sentence : corpus) targets.push_back(detection_targets(sentence, detector.scheme));

  Rng rng(config.seed);
  const std::size_t batches = (corpus.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.epochs;
  const bool train_encoder = detector.encoder.trainable();
  AdamW encoder_opt(detector.encoder.parameter_count(), config);
  AdamW head_opt(static_cast<std::size_t>(detector.head.parameters().size()), config);

  TrainReport report;
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      const double scale = 1.0 / static_cast<double>(end - begin);
      Vector enc_grad = detector.encoder.zero_gradient();
      Vector head_grad = Vector::Zero(detector.head.parameters().size());
      double loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& sentence = corpus[order[i]];
        const Matrix mask = dropout_mask(sentence.size(), detector.head.dim(),
                                         detector.head.dropout_rate(), rng);
        auto g = span_loss_and_gradient(detector.encoder, detector.head, sentence.tokens,
                                        targets[order[i]], &mask);
        loss += g.loss * scale;
        head_grad += g.head * scale;
        if (train_encoder) enc_grad += g.encoder * scale;
      }
      require_finite_loss(loss, "span detection");
      report.step_losses.push_back(loss);
      const double lr = scheduled_learning_rate(config.learning_rate, step, total_steps,
                                                config.warmup_fraction);
      head_opt.step(detector.head.parameters(), head_grad, lr);
      if (train_encoder) encoder_opt.step(detector.encoder.reference().parameters(), enc_grad, lr);
    }
  }
  return report;
}

EarlyStopResult finetune_span(SpanDetector& detector, std::span<const LabeledSentence> support,
                              const FinetuneConfig& config, std::uint64_t seed) {
  config.validate();
  if (support.empty()) throw Error(Errc::EmptySupport, "span fine-tuning needs support sentences");
  std::vector<std::vector<std::size_t>> targets;
  for (const auto& sentence : support) targets.push_back(detection_targets(sentence, detector.scheme));

  OptimizerConfig opt_cfg;
  opt_cfg.weight_decay = config.weight_decay;
  const bool train_encoder = detector.encoder.trainable();
  AdamW encoder_opt(detector.encoder.parameter_count(), opt_cfg);
  AdamW head_opt(static_cast<std::size_t>(detector.head.parameters().size()), opt_cfg);
  Rng rng(seed);
  const double scale = 1.0 / static_cast<double>(support.size());

  std::function<double(SpanDetector&)> step = [&](SpanDetector& state) {
    double eval_loss = 0.0;
    Vector enc_grad = state.encoder.zero_gradient();
    Vector head_grad = Vector::Zero(state.head.parameters().size());
    for (std::size_t i = 0; i < support.size(); ++i) {
      const auto& tokens = support[i].tokens;
      eval_loss += span_loss(tag_probabilities(state.encoder, state.head, tokens), targets[i]) * scale;
      const Matrix mask = dropout_mask(tokens.size(), state.head.dim(), state.head.dropout_rate(), rng);
      auto g = span_loss_and_gradient(state.encoder, state.head, tokens, targets[i], &mask);
      head_grad += g.head * scale;
      if (train_encoder) enc_grad += g.encoder * scale;
    }
    require_finite_loss(eval_loss, "span fine-tuning");
    head_opt.step(state.head.parameters(), head_grad, config.learning_rate);
    if (train_encoder) encoder_opt.step(state.encoder.reference().parameters(), enc_grad, config.learning_rate);
    return eval_loss;
  };
  return run_early_stopping(config, detector, step);
}

std::vector<std::string> predict_boundary_tags(const SpanDetector& detector, Tokens tokens) {
  const auto classes = detection_classes(detector.scheme);
  const Matrix probs = tag_probabilities(detector.encoder, detector.head, tokens);
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    tags.push_back(format_tag(Tag{classes[static_cast<std::size_t>(best)], {}}));
  }
  return tags;
}

std::vector<SpanAnnotation> extract_candidate_spans(const SpanDetector& detector, Tokens tokens) {
  return spans_from_tags(predict_boundary_tags(detector, tokens), detector.scheme);
}

}  // namespace tadner
