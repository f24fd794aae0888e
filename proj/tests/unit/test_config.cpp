#include "doctest.h"

#include "tadner/config.hpp"
#include "tadner/errors.hpp"

using namespace tadner;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults follow the reference settings") {
  const RunConfig cfg;
  CHECK(cfg.temperature == 0.05);
  CHECK(cfg.dropout == 0.2);
  CHECK(cfg.optimizer.batch_size == 64);
  CHECK(cfg.optimizer.learning_rate == 3e-5);
  CHECK(cfg.scheme == TaggingScheme::IO);
  CHECK(default_beta(1) == 2);
  CHECK(default_beta(5) == 6);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK(code_of([] { RunConfig::from_json(R"({"dim": 8})"); }) == Errc::InvalidConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"encoder": {"width": 8}})"); }) == Errc::InvalidConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"finetune": {"patience": 2}})"); }) == Errc::InvalidConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"temperature": -1})"); }) == Errc::InvalidConfig);
  CHECK(code_of([] { RunConfig::from_json("not json"); }) != Errc::IoError);
}

TEST_CASE("JSON round trip") {
  const auto cfg = RunConfig::from_json(R"({
    "scheme": "BIOES", "type_names": "conll", "encoder": {"dim": 12, "context_window": 2, "layers": 2},
    "optimizer": {"learning_rate": 0.001, "epochs": 3}, "finetune": {"beta": 4, "max_steps": 9},
    "seed": 17, "ablations": {"no_filter": true}, "k_shot": 5, "workers": 2})");
  CHECK(cfg.scheme == TaggingScheme::BIOES);
  CHECK(cfg.dim == 12);
  CHECK(cfg.layers == 2);
  CHECK(cfg.finetune.beta == 4u);
  CHECK(cfg.ablations.no_filter);
  CHECK(map_type_name(cfg.type_names, "PER") == "person");
  const auto again = RunConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());
}

TEST_CASE("beta comes from the config, the shot count, or each support set") {
  RunConfig cfg;
  cfg.finetune.beta = 3;
  CHECK(make_pipeline_config(cfg).span_finetune.beta == 3);
  cfg.finetune.beta.reset();
  cfg.k_shot = 1;
  CHECK(make_pipeline_config(cfg).type_finetune.beta == 2);
  cfg.k_shot.reset();
  CHECK(make_pipeline_config(cfg).beta_from_support);
  CHECK_FALSE(RunConfig::from_json(R"({"finetune": {"beta": "auto"}})").finetune.beta.has_value());
}

TEST_CASE("type names resolve to builtin maps or files") {
  CHECK(map_type_name(resolve_type_names("conll"), "LOC") == "location");
  CHECK(map_type_name(resolve_type_names("conll_misleading"), "PER") == "location");
  CHECK(map_type_name(resolve_type_names("ontonotes"), "GPE") == "geographical social political entity");
  CHECK_THROWS_AS(resolve_type_names("no_such_map"), Error);
}

}
