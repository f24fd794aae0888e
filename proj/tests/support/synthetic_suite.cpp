#include "synthetic_suite.hpp"

#include <set>

#include "tadner/training.hpp"

namespace suite {

using namespace tadner;

namespace {

const std::vector<std::size_t> kSource{0, 1, 2, 3};
const std::vector<std::size_t> kTarget{4, 5};

Episode episode(const Suite& s, std::vector<LabeledSentence> support,
                const std::vector<LabeledSentence>& query) {
  return Episode{std::move(support), query, s.target_types, TaggingScheme::IO};
}

}  // namespace

SyntheticSpec spec() {
  SyntheticSpec sp;
  // Source types get several surface forms so the detector learns the mention
  // context; each target type has one, matching the single support example.
  sp.type_words = {6, 6, 6, 6, 1, 1};
  sp.trigger_words = 1;
  sp.closer_words = 1;
  return sp;
}

RunConfig run_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.type_names = SyntheticCorpus(spec()).names();
  cfg.dim = 32;
  cfg.seed = seed;
  cfg.optimizer.learning_rate = 1e-2;
  cfg.optimizer.batch_size = 16;
  cfg.optimizer.epochs = 30;
  cfg.finetune.learning_rate = 1e-2;
  cfg.finetune.max_steps = 20;
  cfg.k_shot = 1;
  return cfg;
}

Suite make(std::uint64_t seed) {
  SyntheticCorpus gen(spec());
  Rng rng(seed);
  auto source = gen.sentences(400, rng, kSource);
  auto pool = gen.sentences(60, rng, kTarget);
  auto query = gen.sentences(60, rng, kTarget);
  auto distractor = gen.sentences(60, rng, kTarget, kSource);
  RunConfig cfg = run_config(seed);
  std::vector<LabeledSentence> all = source;
  all.insert(all.end(), pool.begin(), pool.end());
  auto vocab = build_vocabulary(all, cfg.type_names);
  LabelSet types({gen.label(4), gen.label(5)});
  return Suite{std::move(gen), std::move(source), std::move(pool), std::move(query),
               std::move(distractor), std::move(cfg), std::move(vocab), std::move(types)};
}

SourceModels train(const Suite& s) { return train_source_models(s.config, s.source, s.vocab); }

std::vector<LabeledSentence> support(const Suite& s, std::size_t e) {
  SamplingConfig sc;
  sc.n_way = 2;
  sc.k_shot = 1;
  Rng rng(mix_seed(s.config.seed + 100, e));
  return sample_support_set(s.target_pool, sc, rng);
}

Results evaluate(const Suite& s, const SourceModels& models, std::size_t episodes) {
  Results out;
  std::set<std::string> distractor_words;
  for (auto t : kSource) {
    for (const auto& w : s.generator.words(t)) distractor_words.insert(w);
  }
  const double n = static_cast<double>(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    PipelineConfig pc = make_pipeline_config(s.config);
    pc.seed = e;
    const auto sup = support(s, e);
    out.f1 += run_episode(models, episode(s, sup, s.query), pc).metrics.f1 / n;
    out.filtered_f1 += run_episode(models, episode(s, sup, s.distractor_query), pc).metrics.f1 / n;

    PipelineConfig off = pc;
    off.ablations.no_filter = true;
    out.unfiltered_f1 += run_episode(models, episode(s, sup, s.distractor_query), off).metrics.f1 / n;

    PipelineConfig zero = pc;
    zero.zero_shot = true;
    out.zero_shot_f1 += run_episode(models, episode(s, {}, s.query), zero).metrics.f1 / n;

    // Filter decisions on every known mention, whether or not the detector proposed it.
    const auto adapted = adapt(models, sup, s.target_types, pc);
    for (const auto& sentence : s.distractor_query) {
      const Matrix rows = adapted.type_encoder.encode_sentence(sentence.tokens);
      std::vector<SpanAnnotation> mentions;
      for (const auto& g : spans_from_tags(sentence)) mentions.push_back(g);
      for (std::size_t i = 0; i < sentence.size(); ++i) {
        if (distractor_words.contains(sentence.tokens[i])) mentions.push_back({i, i, std::nullopt});
      }
      for (const auto& m : mentions) {
        const auto d = decide_span(span_vector(rows, m), adapted.prototypes, adapted.threshold);
        if (m.entity_type) {
          ++out.true_spans;
          out.true_lost += !d.kept;
        } else {
          ++out.distractors;
          out.distractors_removed += !d.kept;
        }
      }
    }
  }
  return out;
}

}  // namespace suite
