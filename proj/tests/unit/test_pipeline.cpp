#include "doctest.h"

#include "tadner/config.hpp"
#include "tadner/errors.hpp"
#include "tadner/pipeline.hpp"

#include "synthetic_suite.hpp"

using namespace tadner;

namespace {

// Trained once and shared by the cases below.
const suite::Suite& the_suite() {
  static const suite::Suite s = suite::make(2);
  return s;
}

const SourceModels& trained() {
  static const SourceModels m = suite::train(the_suite());
  return m;
}

Episode clean_episode(std::size_t e) {
  const auto& s = the_suite();
  return Episode{suite::support(s, e), s.query, s.target_types, TaggingScheme::IO};
}

PipelineConfig base_config() { return make_pipeline_config(the_suite().config); }

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("episodes on the separable corpus score at least 0.9") {
  const auto r = suite::evaluate(the_suite(), trained(), 3);
  CHECK(r.f1 >= 0.9);
  CHECK(r.filtered_f1 >= r.unfiltered_f1);
  CHECK(r.zero_shot_f1 >= 0.5);
}

TEST_CASE("source models are left untouched") {
  const auto before = trained().type_encoder.reference().parameters();
  run_episode(trained(), clean_episode(0), base_config());
  CHECK(trained().type_encoder.reference().parameters() == before);
}

TEST_CASE("zero-shot runs without a support set or fine-tuning") {
  auto cfg = base_config();
  cfg.zero_shot = true;
  Episode ep = clean_episode(0);
  ep.support.clear();
  const auto r = run_episode(trained(), ep, cfg);
  CHECK(r.span_stop.losses.empty());
  CHECK(r.type_stop.losses.empty());
  CHECK_FALSE(r.threshold.has_value());
  CHECK(r.metrics.tp > 0);
}

TEST_CASE("without filtering every candidate is classified") {
  auto cfg = base_config();
  cfg.ablations.no_filter = true;
  const auto r = run_episode(trained(), clean_episode(1), cfg);
  CHECK_FALSE(r.threshold.has_value());
  CHECK(r.filtered == 0);
  std::size_t predicted = 0;
  for (const auto& s : r.sentences) predicted += s.predicted.size();
  CHECK(predicted == r.candidates);
}

TEST_CASE("ablations switch off their stage") {
  auto cfg = base_config();
  cfg.ablations.no_span_finetune = true;
  cfg.ablations.no_type_finetune = true;
  const auto r = run_episode(trained(), clean_episode(2), cfg);
  CHECK(r.span_stop.losses.empty());
  CHECK(r.type_stop.losses.empty());

  auto random_names = base_config();
  random_names.ablations.no_type_names = true;
  CHECK_FALSE(random_names.filter_enabled());
  const auto rn = run_episode(trained(), clean_episode(2), random_names);
  CHECK_FALSE(rn.threshold.has_value());
}

TEST_CASE("results do not depend on the worker count") {
  std::vector<Episode> eps{clean_episode(0), clean_episode(1), clean_episode(2), clean_episode(3)};
  const auto one = evaluate_episodes(trained(), eps, base_config(), 1);
  const auto three = evaluate_episodes(trained(), eps, base_config(), 3);
  CHECK(report_to_json(one.report) == report_to_json(three.report));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    REQUIRE(one.episodes[i].has_value());
    CHECK(one.episodes[i]->metrics == three.episodes[i]->metrics);
  }
}

TEST_CASE("a failing episode is reported and the rest still run") {
  Episode bad = clean_episode(0);
  bad.types = LabelSet({"T4", "T5", "T0"});  // T0 has no support mention
  std::vector<Episode> eps{clean_episode(1), bad};
  const auto r = evaluate_episodes(trained(), eps, base_config(), 2);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].index == 1);
  CHECK(r.episodes[0].has_value());
  CHECK_FALSE(r.episodes[1].has_value());
  CHECK(r.report.runs == 1);
  CHECK(r.report.failed_runs == 1);
}

TEST_CASE("prediction lines carry tokens, predictions and gold") {
  SentencePrediction p{{"a", "b"}, {{1, 1, "X"}}, {}};
  CHECK(prediction_to_json_line(p) ==
        R"({"tokens":["a","b"],"pred_spans":[{"start":1,"end":1,"type":"X"}],"gold_spans":[]})");
}

}
