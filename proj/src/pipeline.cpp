#include "tadner/pipeline.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "tadner/errors.hpp"
#include "tadner/rng.hpp"

namespace tadner {

namespace {

constexpr std::uint64_t kSpanStream = 1;
constexpr std::uint64_t kNameStream = 2;

nlohmann::ordered_json spans_json(const SentenceSpans& spans) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : spans) {
    nlohmann::ordered_json o;
    o["start"] = s.start;
    o["end"] = s.end;
    o["type"] = s.entity_type ? nlohmann::ordered_json(*s.entity_type) : nlohmann::ordered_json();
    arr.push_back(std::move(o));
  }
  return arr;
}

}  // namespace

AdaptedModels adapt(const SourceModels& models, std::span<const LabeledSentence> support,
                    const LabelSet& types, const PipelineConfig& cfg) {
  if (types.empty()) throw Error(Errc::InvalidConfig, "episode has no target types");
  AdaptedModels out{models.detector, models.type_encoder, models.names, {}, std::nullopt, {}, {}};
  if (cfg.ablations.no_type_names) {
    out.names.random = true;
    out.names.seed = mix_seed(cfg.seed, kNameStream);
  } else if (!out.names.random) {
    for (const auto& t : types.labels()) (void)out.names.map.name(t);
  }

  FinetuneConfig span_cfg = cfg.span_finetune;
  FinetuneConfig type_cfg = cfg.type_finetune;
  if (cfg.beta_from_support) {
    span_cfg.beta = type_cfg.beta = default_beta(min_shots(support));
  }
  if (cfg.span_finetune_enabled()) {
    out.span_stop = finetune_span(out.detector, support, span_cfg, mix_seed(cfg.seed, kSpanStream));
  }
  if (cfg.type_finetune_enabled()) {
    out.type_stop = finetune_type(out.type_encoder, support, types, out.names, type_cfg,
                                  cfg.literal_adaptation);
  }

  if (cfg.zero_shot) {
    out.prototypes = zero_shot_prototypes(out.type_encoder, types, out.names);
  } else if (cfg.ablations.no_type_names) {
    out.prototypes = support_only_prototypes(out.type_encoder, support, types);
  } else {
    out.prototypes = build_prototypes(out.type_encoder, support, types, out.names);
  }
  if (cfg.filter_enabled()) out.threshold = compute_threshold(out.type_encoder, support, out.names);
  return out;
}

SentenceSpans predict_sentence(const AdaptedModels& adapted, Tokens tokens, std::size_t* candidates,
                               std::size_t* filtered) {
  if (tokens.empty()) return {};
  const auto spans = extract_candidate_spans(adapted.detector, tokens);
  auto typed = classify_spans(adapted.type_encoder, adapted.prototypes, adapted.threshold, tokens, spans);
  if (candidates) *candidates += spans.size();
  if (filtered) *filtered += spans.size() - typed.size();
  return typed;
}

EpisodeResult run_episode(const SourceModels& models, const Episode& episode,
                          const PipelineConfig& cfg) {
  const auto adapted = adapt(models, episode.support, episode.types, cfg);
  EpisodeResult result;
  result.threshold = adapted.threshold;
  result.prototypes = adapted.prototypes;
  result.span_stop = adapted.span_stop;
  result.type_stop = adapted.type_stop;

  std::vector<SentenceSpans> preds, golds;
  for (const auto& sentence : episode.query) {
    SentencePrediction p;
    p.tokens = sentence.tokens;
    p.predicted = predict_sentence(adapted, sentence.tokens, &result.candidates, &result.filtered);
    for (auto& g : spans_from_tags(sentence)) {
      if (g.entity_type && episode.types.contains(*g.entity_type)) p.gold.push_back(std::move(g));
    }
    preds.push_back(p.predicted);
    golds.push_back(p.gold);
    result.sentences.push_back(std::move(p));
  }
  result.metrics = micro_f1(preds, golds);
  result.errors = error_breakdown(preds, golds);
  return result;
}

BatchResult evaluate_episodes(const SourceModels& models, std::span<const Episode> episodes,
                              const PipelineConfig& cfg, std::size_t workers) {
  BatchResult out;
  out.episodes.resize(episodes.size());
  std::vector<std::optional<EpisodeFailure>> failures(episodes.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < episodes.size(); i = next++) {
      PipelineConfig local = cfg;
      local.seed = mix_seed(cfg.seed, i);
      try {
        out.episodes[i] = run_episode(models, episodes[i], local);
      } catch (const std::exception& e) {
        failures[i] = EpisodeFailure{i, e.what()};
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, episodes.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<MetricsSummary> metrics;
  std::vector<ErrorBreakdown> errors;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (failures[i]) out.failures.push_back(*failures[i]);
    if (!out.episodes[i]) continue;
    metrics.push_back(out.episodes[i]->metrics);
    errors.push_back(out.episodes[i]->errors);
  }
  out.report = aggregate_runs(metrics, errors, out.failures.size());
  return out;
}

std::string prediction_to_json_line(const SentencePrediction& prediction) {
  nlohmann::ordered_json doc;
  doc["tokens"] = prediction.tokens;
  doc["pred_spans"] = spans_json(prediction.predicted);
  doc["gold_spans"] = spans_json(prediction.gold);
  return doc.dump();
}

}  // namespace tadner
