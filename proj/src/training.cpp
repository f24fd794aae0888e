#include "tadner/training.hpp"

#include "tadner/errors.hpp"
#include "tadner/rng.hpp"

namespace tadner {

namespace {

constexpr std::uint64_t kSpanEncoderStream = 11;
constexpr std::uint64_t kTypeEncoderStream = 12;
constexpr std::uint64_t kHeadStream = 13;
constexpr std::uint64_t kSpanBatchStream = 14;
constexpr std::uint64_t kTypeBatchStream = 15;

}  // namespace

Vocabulary build_vocabulary(std::span<const LabeledSentence> corpus, const TypeNameMap& names) {
  Vocabulary vocab;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) vocab.add(t);
  }
  for (const auto& [label, name] : names.entries()) {
    for (const auto& w : split_words(name)) vocab.add(w);
  }
  return vocab;
}

SourceModels train_source_models(const RunConfig& cfg, std::span<const LabeledSentence> corpus,
                                 const Vocabulary& vocab, SourceTrainingReport* report) {
  cfg.validate();
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "source corpus is empty");
  cfg.type_names.require_total(collect_labels(corpus));

  auto make_encoder = [&](std::uint64_t stream) -> Encoder {
    if (!cfg.precomputed.empty()) return load_precomputed(cfg.precomputed);
    EncoderConfig enc;
    enc.dim = cfg.dim;
    enc.vocab = vocab;
    enc.context_window = cfg.context_window;
    enc.layers = cfg.layers;
    enc.seed = mix_seed(cfg.seed, stream);
    return ReferenceEncoder(std::move(enc));
  };

  Encoder span_encoder = make_encoder(kSpanEncoderStream);
  const auto classes = detection_classes(cfg.scheme).size();
  SpanDetector detector{span_encoder,
                        SpanHead::initialized(classes, span_encoder.dim(), cfg.dropout,
                                              mix_seed(cfg.seed, kHeadStream)),
                        cfg.scheme};
  OptimizerConfig span_opt = cfg.optimizer;
  span_opt.seed = mix_seed(cfg.seed, kSpanBatchStream);
  auto span_report = train_source_span(detector, corpus, span_opt);

  Encoder type_encoder = make_encoder(kTypeEncoderStream);
  TypeNames names{cfg.type_names, false, 0};
  OptimizerConfig type_opt = cfg.optimizer;
  type_opt.seed = mix_seed(cfg.seed, kTypeBatchStream);
  auto type_report = train_source_type(type_encoder, corpus, names, cfg.temperature, type_opt);

  if (report) *report = SourceTrainingReport{std::move(span_report), std::move(type_report)};
  return SourceModels{std::move(detector), std::move(type_encoder), std::move(names)};
}

}  // namespace tadner
