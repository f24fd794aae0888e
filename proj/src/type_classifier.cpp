#include "tadner/type_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

#include "tadner/errors.hpp"
#include "tadner/rng.hpp"

namespace tadner {

namespace {

constexpr double kDenominatorFloor = 1e-12;

double log_sum_exp(const std::vector<double>& values) {
  const double mx = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

// Encodes every sentence that holds at least one entity token.
std::map<std::size_t, Matrix> encode_contexts(const Encoder& encoder,
                                              std::span<const LabeledSentence> sentences,
                                              const std::vector<EntityToken>& tokens) {
  std::map<std::size_t, Matrix> rows;
  for (const auto& t : tokens) {
    if (!rows.contains(t.sentence)) {
      rows.emplace(t.sentence, encoder.encode_sentence(sentences[t.sentence].tokens));
    }
  }
  return rows;
}

Vector token_vector(const std::map<std::size_t, Matrix>& rows, const EntityToken& t) {
  return rows.at(t.sentence).row(static_cast<Eigen::Index>(t.token)).transpose();
}

// Pushes per-entity and per-name vector gradients back into the encoder parameters.
void backprop_vectors(const Encoder& encoder, std::span<const LabeledSentence> sentences,
                      const std::vector<EntityToken>& tokens, const Matrix& entity_grads,
                      const std::map<std::string, Vector>& name_grads, const TypeNames& names,
                      Vector& grad) {
  const auto r = static_cast<Eigen::Index>(encoder.dim());
  std::map<std::size_t, Matrix> upstream;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const auto& t = tokens[k];
    auto it = upstream.find(t.sentence);
    if (it == upstream.end()) {
      it = upstream
               .emplace(t.sentence, Matrix::Zero(static_cast<Eigen::Index>(sentences[t.sentence].size()), r))
               .first;
    }
    it->second.row(static_cast<Eigen::Index>(t.token)) += entity_grads.row(static_cast<Eigen::Index>(k));
  }
  for (const auto& [s, up] : upstream) encoder.backward_accumulate(sentences[s].tokens, up, grad);
  if (!names.differentiable()) return;
  for (const auto& [label, g] : name_grads) {
    const auto words = split_words(names.map.name(label));
    encoder.backward_phrase_accumulate(words, g, grad);
  }
}

}  // namespace

Vector TypeNames::vector(const Encoder& encoder, std::string_view label) const {
  if (!random) return encoder.encode_phrase(std::string_view(map.name(label)));
  // Same geometry as encoder rows: a normalized elementwise square.
  const auto r = static_cast<Eigen::Index>(encoder.dim());
  Rng rng(mix_seed(seed, fnv1a(label)));
  Vector out(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double z = rng.normal();
    out[i] = z * z;
  }
  out /= out.norm();
  return out;
}

std::vector<EntityToken> entity_tokens(std::span<const LabeledSentence> sentences) {
  std::vector<EntityToken> out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& span : spans_from_tags(sentences[s])) {
      if (!span.entity_type) continue;
      for (std::size_t i = span.start; i <= span.end; ++i) out.push_back({s, i, *span.entity_type});
    }
  }
  return out;
}

std::vector<TypeAwareRep> build_type_aware_reps(const Encoder& encoder,
                                                std::span<const LabeledSentence> sentences,
                                                const TypeNames& names) {
  const auto tokens = entity_tokens(sentences);
  const auto rows = encode_contexts(encoder, sentences, tokens);
  std::map<std::string, Vector> name_cache;
  std::vector<TypeAwareRep> reps;
  reps.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = name_cache.find(t.label);
    if (it == name_cache.end()) it = name_cache.emplace(t.label, names.vector(encoder, t.label)).first;
    const Vector e = token_vector(rows, t);
    reps.push_back(TypeAwareRep{concat(e, it->second), concat(it->second, e), t.label});
  }
  return reps;
}

double normalized_sim(const Vector& a, const Vector& b, std::span<const Vector> entity_label_reps) {
  double denom = 0.0;
  for (const auto& el : entity_label_reps) denom += el.dot(b);
  if (!(denom >= kDenominatorFloor)) {
    throw Error(Errc::DegenerateDenominator,
                "similarity normalizer " + std::to_string(denom) + " is not positive");
  }
  return a.dot(b) / denom;
}

ContrastiveResult contrastive_loss(const ContrastiveBatch& batch) {
  const auto m = static_cast<Eigen::Index>(batch.reps.size());
  if (m < 1) throw Error(Errc::EmptySupport, "contrastive batch is empty");
  if (!(batch.temperature > 0.0)) throw Error(Errc::InvalidConfig, "temperature must be positive");
  const auto width = batch.reps.front().entity_label.size();
  Matrix el(m, width);
  Matrix le(m, width);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& rep = batch.reps[static_cast<std::size_t>(i)];
    if (rep.label.empty()) throw Error(Errc::UnknownLabel, "contrastive rep without a label");
    el.row(i) = rep.entity_label.transpose();
    le.row(i) = rep.label_entity.transpose();
  }

  const Matrix dots = el * le.transpose();  // dots(k, j) = el_k . le_j
  const Vector denom = dots.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(denom[j] >= kDenominatorFloor)) {
      throw Error(Errc::DegenerateDenominator,
                  "similarity normalizer " + std::to_string(denom[j]) + " is not positive");
    }
  }
  Matrix sim(m, m);
  for (Eigen::Index j = 0; j < m; ++j) sim.col(j) = dots.col(j) / denom[j];

  const double tau = batch.temperature;
  ContrastiveResult out;
  Matrix dsim = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<double> all(static_cast<std::size_t>(m));
    std::vector<double> pos;
    for (Eigen::Index j = 0; j < m; ++j) {
      all[static_cast<std::size_t>(j)] = sim(i, j) / tau;
      if (batch.reps[static_cast<std::size_t>(j)].label == batch.reps[static_cast<std::size_t>(i)].label) {
        pos.push_back(sim(i, j) / tau);
      }
    }
    const double lse_all = log_sum_exp(all);
    const double lse_pos = log_sum_exp(pos);
    const double term = std::log(static_cast<double>(pos.size())) + lse_all - lse_pos;
    out.terms.push_back(term);
    out.loss += term;
    for (Eigen::Index j = 0; j < m; ++j) {
      double g = std::exp(sim(i, j) / tau - lse_all);
      if (batch.reps[static_cast<std::size_t>(j)].label == batch.reps[static_cast<std::size_t>(i)].label) {
        g -= std::exp(sim(i, j) / tau - lse_pos);
      }
      dsim(i, j) = g / tau;
    }
  }

  // sim(i, j) = dots(i, j) / denom_j
  Matrix ddots(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double coupled = dsim.col(j).dot(sim.col(j));
    ddots.col(j) = (dsim.col(j).array() - coupled).matrix() / denom[j];
  }
  out.grad_entity_label = ddots * le;
  out.grad_label_entity = ddots.transpose() * el;
  return out;
}

double type_contrastive_loss(const Encoder& encoder, std::span<const LabeledSentence> batch,
                             const TypeNames& names, double temperature, Vector* grad) {
  const auto tokens = entity_tokens(batch);
  if (tokens.empty()) return 0.0;
  const auto rows = encode_contexts(encoder, batch, tokens);
  std::map<std::string, Vector> name_vecs;
  for (const auto& t : tokens) {
    if (!name_vecs.contains(t.label)) name_vecs.emplace(t.label, names.vector(encoder, t.label));
  }
  ContrastiveBatch cb;
  cb.temperature = temperature;
  for (const auto& t : tokens) {
    const Vector e = token_vector(rows, t);
    const Vector& n = name_vecs.at(t.label);
    cb.reps.push_back(TypeAwareRep{concat(e, n), concat(n, e), t.label});
  }
  const auto result = contrastive_loss(cb);
  if (grad) {
    const auto r = static_cast<Eigen::Index>(encoder.dim());
    Matrix entity_grads(static_cast<Eigen::Index>(tokens.size()), r);
    std::map<std::string, Vector> name_grads;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const auto del = result.grad_entity_label.row(row);
      const auto dle = result.grad_label_entity.row(row);
      entity_grads.row(row) = del.head(r) + dle.tail(r);
      Vector ng = (del.tail(r) + dle.head(r)).transpose();
      auto it = name_grads.find(tokens[k].label);
      if (it == name_grads.end()) name_grads.emplace(tokens[k].label, ng);
      else it->second += ng;
    }
    backprop_vectors(encoder, batch, tokens, entity_grads, name_grads, names, *grad);
  }
  return result.loss;
}

TypeTrainReport train_source_type(Encoder& encoder, std::span<const LabeledSentence> corpus,
                                  const TypeNames& names, double temperature,
                                  const OptimizerConfig& config) {
  config.validate();
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "type classifier needs training sentences");
  TypeTrainReport report;
  if (!encoder.trainable()) return report;

  Rng rng(config.seed);
  const std::size_t batches = (corpus.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.epochs;
  AdamW opt(encoder.parameter_count(), config);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      std::vector<LabeledSentence> batch;
      for (std::size_t i = b * config.batch_size;
           i < std::min((b + 1) * config.batch_size, order.size()); ++i) {
        batch.push_back(corpus[order[i]]);
      }
      Vector grad = encoder.zero_gradient();
      const double loss = type_contrastive_loss(encoder, batch, names, temperature, &grad);
      require_finite_loss(loss, "type contrastive");
      report.step_losses.push_back(loss);
      const double lr = scheduled_learning_rate(config.learning_rate, step, total_steps,
                                                config.warmup_fraction);
      opt.step(encoder.reference().parameters(), grad, lr);
    }
  }
  return report;
}

AdaptationResult adaptation_loss(const Matrix& entity_vectors, std::span<const std::size_t> labels,
                                 const Matrix& name_vectors, bool literal) {
  const auto m = entity_vectors.rows();
  if (m < 1) throw Error(Errc::EmptySupport, "adaptation loss needs support entities");
  if (static_cast<std::size_t>(m) != labels.size()) {
    throw Error(Errc::LengthMismatch, "one label per entity vector is required");
  }
  const Matrix scores = entity_vectors * name_vectors.transpose();  // M x T
  Matrix dscores(m, scores.cols());
  AdaptationResult out;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    if (literal) {
      const double total = scores.row(i).sum();
      if (!(std::abs(total) >= kDenominatorFloor)) {
        throw Error(Errc::DegenerateDenominator, "entity-name similarities sum to zero");
      }
      const double ratio = scores(i, y) / total;
      out.loss += ratio * inv_m;
      dscores.row(i).setConstant(-scores(i, y) / (total * total) * inv_m);
      dscores(i, y) += inv_m / total;
    } else {
      const double mx = scores.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (scores.row(i).array() - mx).exp().matrix();
      const double z = e.sum();
      out.loss += -(scores(i, y) - mx - std::log(z)) * inv_m;
      dscores.row(i) = e / z * inv_m;
      dscores(i, y) -= inv_m;
    }
  }
  out.grad_entities = dscores * name_vectors;
  out.grad_names = dscores.transpose() * entity_vectors;
  return out;
}

namespace {

std::vector<std::size_t> label_indices(const std::vector<EntityToken>& tokens,
                                       const LabelSet& target_types) {
  std::vector<std::size_t> labels;
  labels.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto idx = target_types.index_of(t.label);
    if (!idx) throw Error(Errc::UnknownLabel, "support label '" + t.label + "' is not a target type");
    labels.push_back(*idx);
  }
  return labels;
}

}  // namespace

double adaptation_loss(const Encoder& encoder, std::span<const LabeledSentence> support,
                       const LabelSet& target_types, const TypeNames& names, bool literal,
                       Vector* grad) {
  const auto tokens = entity_tokens(support);
  if (tokens.empty()) throw Error(Errc::EmptySupport, "support set has no entity tokens");
  const auto labels = label_indices(tokens, target_types);
  const auto rows = encode_contexts(encoder, support, tokens);
  const auto r = static_cast<Eigen::Index>(encoder.dim());
  Matrix entities(static_cast<Eigen::Index>(tokens.size()), r);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    entities.row(static_cast<Eigen::Index>(k)) = token_vector(rows, tokens[k]).transpose();
  }
  Matrix name_vecs(static_cast<Eigen::Index>(target_types.size()), r);
  for (std::size_t j = 0; j < target_types.size(); ++j) {
    name_vecs.row(static_cast<Eigen::Index>(j)) =
        names.vector(encoder, target_types.labels()[j]).transpose();
  }
  const auto result = adaptation_loss(entities, labels, name_vecs, literal);
  if (grad) {
    std::map<std::string, Vector> name_grads;
    for (std::size_t j = 0; j < target_types.size(); ++j) {
      name_grads.emplace(target_types.labels()[j],
                         result.grad_names.row(static_cast<Eigen::Index>(j)).transpose());
    }
    backprop_vectors(encoder, support, tokens, result.grad_entities, name_grads, names, *grad);
  }
  return result.loss;
}

EarlyStopResult finetune_type(Encoder& encoder, std::span<const LabeledSentence> support,
                              const LabelSet& target_types, const TypeNames& names,
                              const FinetuneConfig& config, bool literal) {
  config.validate();
  if (!encoder.trainable()) return {};
  OptimizerConfig opt_cfg;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW opt(encoder.parameter_count(), opt_cfg);
  std::function<double(Encoder&)> step = [&](Encoder& state) {
    Vector grad = state.zero_gradient();
    const double loss = adaptation_loss(state, support, target_types, names, literal, &grad);
    require_finite_loss(loss, "type adaptation");
    opt.step(state.reference().parameters(), grad, config.learning_rate);
    return loss;
  };
  return run_early_stopping(config, encoder, step);
}

FilterThreshold compute_threshold(const Encoder& encoder, std::span<const LabeledSentence> support,
                                  const TypeNames& names) {
  const auto tokens = entity_tokens(support);
  if (tokens.empty()) throw Error(Errc::EmptySupport, "threshold needs support entity tokens");
  const auto rows = encode_contexts(encoder, support, tokens);
  std::map<std::string, Vector> name_vecs;
  FilterThreshold threshold{std::numeric_limits<double>::infinity()};
  for (const auto& t : tokens) {
    auto it = name_vecs.find(t.label);
    if (it == name_vecs.end()) it = name_vecs.emplace(t.label, names.vector(encoder, t.label)).first;
    threshold.gamma = std::min(threshold.gamma, token_vector(rows, t).dot(it->second));
  }
  return threshold;
}

namespace {

bool lexicographic_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Mean of a multiset of vectors, summed in a canonical order: identical vectors
// are grouped and added as count * v, groups in lexicographic order. The result
// is then bit-identical under reordering and under duplicating every element.
Vector canonical_mean(std::vector<Vector> vectors) {
  std::sort(vectors.begin(), vectors.end(), lexicographic_less);
  Vector sum = Vector::Zero(vectors.front().size());
  for (std::size_t i = 0; i < vectors.size();) {
    std::size_t j = i;
    while (j < vectors.size() && vectors[j] == vectors[i]) ++j;
    sum += static_cast<double>(j - i) * vectors[i];
    i = j;
  }
  return sum / static_cast<double>(vectors.size());
}

std::vector<Vector> support_means(const Encoder& encoder, std::span<const LabeledSentence> support,
                                  const LabelSet& target_types) {
  const auto tokens = entity_tokens(support);
  const auto rows = encode_contexts(encoder, support, tokens);
  std::vector<std::vector<Vector>> members(target_types.size());
  for (const auto& t : tokens) {
    auto idx = target_types.index_of(t.label);
    if (!idx) throw Error(Errc::UnknownLabel, "support label '" + t.label + "' is not a target type");
    members[*idx].push_back(token_vector(rows, t));
  }
  std::vector<Vector> means;
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (members[j].empty()) {
      throw Error(Errc::MissingTypeInSupport,
                  "type '" + target_types.labels()[j] + "' has no support entity");
    }
    means.push_back(canonical_mean(std::move(members[j])));
  }
  return means;
}

}  // namespace

std::vector<Prototype> build_prototypes(const Encoder& encoder,
                                        std::span<const LabeledSentence> support,
                                        const LabelSet& target_types, const TypeNames& names) {
  const auto means = support_means(encoder, support, target_types);
  std::vector<Prototype> out;
  for (std::size_t j = 0; j < target_types.size(); ++j) {
    const auto& label = target_types.labels()[j];
    out.push_back(Prototype{label, concat(names.vector(encoder, label), means[j])});
  }
  return out;
}

std::vector<Prototype> zero_shot_prototypes(const Encoder& encoder, const LabelSet& target_types,
                                            const TypeNames& names) {
  std::vector<Prototype> out;
  for (const auto& label : target_types.labels()) {
    const Vector n = names.vector(encoder, label);
    out.push_back(Prototype{label, concat(n, n)});
  }
  return out;
}

std::vector<Prototype> support_only_prototypes(const Encoder& encoder,
                                               std::span<const LabeledSentence> support,
                                               const LabelSet& target_types) {
  const auto means = support_means(encoder, support, target_types);
  std::vector<Prototype> out;
  for (std::size_t j = 0; j < target_types.size(); ++j) {
    out.push_back(Prototype{target_types.labels()[j], concat(means[j], means[j])});
  }
  return out;
}

SpanDecision decide_span(const Vector& span_vector, std::span<const Prototype> prototypes,
                         const std::optional<FilterThreshold>& threshold) {
  if (prototypes.empty()) throw Error(Errc::EmptySupport, "no prototypes to classify against");
  const Vector h = concat(span_vector, span_vector);
  SpanDecision decision;
  decision.max_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < prototypes.size(); ++j) {
    if (prototypes[j].vector.size() != h.size()) {
      throw Error(Errc::LengthMismatch, "prototype width differs from span representation");
    }
    const double score = h.dot(prototypes[j].vector);
    if (score > decision.max_sim) {
      decision.max_sim = score;
      decision.best = j;
    }
  }
  decision.kept = !threshold || decision.max_sim / 2.0 > threshold->gamma;
  return decision;
}

Vector span_vector(const Matrix& sentence_rows, const SpanAnnotation& span) {
  if (span.end >= static_cast<std::size_t>(sentence_rows.rows()) || span.start > span.end) {
    throw Error(Errc::SpanOutOfRange, "span lies outside the sentence");
  }
  return sentence_rows
      .middleRows(static_cast<Eigen::Index>(span.start), static_cast<Eigen::Index>(span.length()))
      .colwise()
      .mean()
      .transpose();
}

std::vector<SpanAnnotation> classify_spans(const Encoder& encoder,
                                           std::span<const Prototype> prototypes,
                                           const std::optional<FilterThreshold>& threshold,
                                           Tokens tokens,
                                           std::span<const SpanAnnotation> candidates) {
  std::vector<SpanAnnotation> out;
  if (candidates.empty()) return out;
  const Matrix rows = encoder.encode_sentence(tokens);
  for (const auto& candidate : candidates) {
    const auto decision = decide_span(span_vector(rows, candidate), prototypes, threshold);
    if (!decision.kept) continue;
    out.push_back(SpanAnnotation{candidate.start, candidate.end,
                                 prototypes[decision.best].entity_type});
  }
  return out;
}

std::string prototypes_to_json(std::span<const Prototype> prototypes, const TypeNames& names) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& p : prototypes) {
    nlohmann::ordered_json entry;
    entry["type"] = p.entity_type;
    entry["name"] = names.random ? std::string("<random>") : names.map.name(p.entity_type);
    entry["vector"] = std::vector<double>(p.vector.data(), p.vector.data() + p.vector.size());
    doc.push_back(std::move(entry));
  }
  return doc.dump(2);
}

}  // namespace tadner
