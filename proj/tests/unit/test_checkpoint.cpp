#include "doctest.h"

#include <filesystem>

#include "tadner/checkpoint.hpp"
#include "tadner/errors.hpp"
#include "tadner/training.hpp"

using namespace tadner;

namespace {

SourceModels small_models(bool random_names = false) {
  const std::vector<LabeledSentence> corpus{
      make_sentence({"red", "and", "blue"}, std::vector<SpanAnnotation>{{0, 0, "A"}, {2, 2, "B"}},
                    TaggingScheme::BIO)};
  RunConfig cfg;
  cfg.type_names = TypeNameMap({{"A", "warm colour"}, {"B", "cold colour"}});
  cfg.scheme = TaggingScheme::BIO;
  cfg.dim = 4;
  cfg.optimizer.epochs = 1;
  cfg.optimizer.batch_size = 1;
  auto m = train_source_models(cfg, corpus, build_vocabulary(corpus, cfg.type_names));
  m.names.random = random_names;
  m.names.seed = 77;
  return m;
}

void check_same(const SourceModels& a, const SourceModels& b) {
  CHECK(a.detector.scheme == b.detector.scheme);
  CHECK(a.detector.head == b.detector.head);
  CHECK(a.detector.encoder.reference().config() == b.detector.encoder.reference().config());
  CHECK(a.detector.encoder.reference().parameters() == b.detector.encoder.reference().parameters());
  CHECK(a.type_encoder.reference().parameters() == b.type_encoder.reference().parameters());
  CHECK(a.names.map.entries() == b.names.map.entries());
  CHECK(a.names.random == b.names.random);
  CHECK(a.names.seed == b.names.seed);
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save and load reproduce the float32-rounded models exactly") {
  for (bool random : {false, true}) {
    const auto m = small_models(random);
    const auto path = std::filesystem::temp_directory_path() / "tadner_test.tadc";
    save_checkpoint(m, path);
    const auto back = load_checkpoint(path);
    check_same(back, round_trip_precision(m));
    const Vector diff = back.type_encoder.reference().parameters() - m.type_encoder.reference().parameters();
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-6);
    std::filesystem::remove(path);
  }
}

TEST_CASE("serialization is stable") {
  const auto m = small_models();
  const auto bytes = serialize_checkpoint(m);
  CHECK(bytes.substr(0, 4) == "TADC");
  CHECK(serialize_checkpoint(parse_checkpoint(bytes)) == bytes);
}

TEST_CASE("damaged checkpoints are rejected") {
  const auto bytes = serialize_checkpoint(small_models());
  auto code = [](const std::string& b) {
    try {
      parse_checkpoint(b);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  CHECK(code(bytes.substr(0, bytes.size() - 3)) == Errc::FormatError);
  CHECK(code(bytes + "x") == Errc::FormatError);
  CHECK(code("NOPE" + bytes.substr(4)) == Errc::FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.tadc"), Error);
}

}
