#include "doctest.h"

#include <filesystem>

#include "oracles.hpp"
#include "tadner/errors.hpp"
#include "tadner/encoder.hpp"
#include "tadner/tade.hpp"

using namespace tadner;

namespace {

using Words = std::vector<std::string>;

ReferenceEncoder make_encoder(std::size_t window, std::uint64_t seed = 1, std::size_t layers = 1) {
  EncoderConfig cfg;
  cfg.dim = 6;
  cfg.context_window = window;
  cfg.layers = layers;
  cfg.seed = seed;
  for (const char* w : {"the", "cat", "sat", "on", "mat", "dog", "unused"}) cfg.vocab.add(w);
  return ReferenceEncoder(cfg);
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("rows are non-negative unit vectors") {
  const auto enc = make_encoder(1);
  const Matrix h = enc.encode_sentence(Words{"the", "cat", "sat"});
  CHECK(h.rows() == 3);
  CHECK(h.cols() == 6);
  CHECK(h.minCoeff() >= 0.0);
  for (Eigen::Index i = 0; i < h.rows(); ++i) CHECK(h.row(i).norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("encoding is deterministic") {
  const auto enc = make_encoder(1);
  CHECK(enc.encode_sentence(Words{"the", "cat"}) == enc.encode_sentence(Words{"the", "cat"}));
  CHECK(make_encoder(1, 5).parameters() == make_encoder(1, 5).parameters());
}

TEST_CASE("without context a row depends only on its own token") {
  const auto enc = make_encoder(0);
  const Matrix a = enc.encode_sentence(Words{"the", "cat", "sat"});
  const Matrix b = enc.encode_sentence(Words{"dog", "cat", "mat"});
  CHECK(a.row(1) == b.row(1));
}

TEST_CASE("unknown tokens map to the reserved id") {
  const auto enc = make_encoder(1);
  CHECK(enc.token_ids(Words{"zebra"})[0] == Vocabulary::kUnknownId);
}

TEST_CASE("phrase vectors are row means") {
  const auto enc = make_encoder(0);
  CHECK(enc.encode_phrase(Words{"cat"}) == Vector(enc.encode_sentence(Words{"cat"}).row(0).transpose()));
  const Vector twice = enc.encode_phrase(Words{"cat", "cat"});
  CHECK((twice - enc.encode_phrase(Words{"cat"})).norm() < 1e-15);
  const auto ctx = make_encoder(1);
  const Matrix rows = ctx.encode_sentence(Words{"the", "cat", "sat"});
  const Vector mean = (rows.row(0) + rows.row(1) + rows.row(2)).transpose() / 3.0;
  CHECK((ctx.encode_phrase(Words{"the", "cat", "sat"}) - mean).norm() < 1e-15);
}

TEST_CASE("zero upstream gives a zero gradient") {
  const auto enc = make_encoder(1);
  const Words s{"the", "cat"};
  CHECK(enc.backward(s, Matrix::Zero(2, 6)).isZero(0.0));
}

TEST_CASE("embedding rows of absent tokens get no gradient") {
  const auto enc = make_encoder(1);
  const Words s{"the", "cat", "sat"};
  Rng rng(3);
  Matrix up(3, 6);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.normal();
  const Vector g = enc.backward(s, up);
  const auto& emb = enc.slice("embedding");
  const std::size_t unused = enc.config().vocab.id("unused");
  CHECK(g.segment(static_cast<Eigen::Index>(emb.offset + unused * 6), 6).isZero(0.0));
}

TEST_CASE("backward matches finite differences") {
  for (std::size_t layers : {1u, 2u}) {
    const auto enc = make_encoder(1, 7, layers);
    const Words s{"the", "cat", "sat", "on", "mat"};
    Rng rng(9);
    Matrix up(5, 6);
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.normal();
    const Vector g = enc.backward(s, up);
    auto f = [&](const Vector& p) {
      return (ReferenceEncoder(enc.config(), p).encode_sentence(s).array() * up.array()).sum();
    };
    CHECK(oracle::check_gradient(f, enc.parameters(), g, 100, 4).max_relative_error < 1e-4);
  }
}

TEST_CASE("jvp matches finite differences") {
  const auto enc = make_encoder(1, 8, 2);
  const Words s{"dog", "on", "mat"};
  Rng rng(2);
  Vector d(enc.parameters().size());
  for (auto& x : d) x = rng.normal();
  const double h = 1e-6;
  const Matrix fd = (ReferenceEncoder(enc.config(), enc.parameters() + h * d).encode_sentence(s) -
                     ReferenceEncoder(enc.config(), enc.parameters() - h * d).encode_sentence(s)) /
                    (2 * h);
  const Matrix jvp = enc.jvp(s, d);
  CHECK((fd - jvp).norm() / jvp.norm() < 1e-4);
}

TEST_CASE("parameter vectors of the wrong size are rejected") {
  const auto enc = make_encoder(1);
  CHECK_THROWS_AS(ReferenceEncoder(enc.config(), Vector::Zero(3)), Error);
}

TEST_CASE("TADE stores round trip within float32 precision") {
  TadeStore store;
  store.dim = 4;
  Rng rng(5);
  const Words sentence{"the", "cat", "sat"};
  Matrix rows(3, 4);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = rng.normal();
  store.records[sentence_key(sentence)] = rows;
  Matrix name(1, 4);
  name << 0.1, 0.2, 0.3, 0.4;
  store.records[phrase_key(Words{"person"})] = name;

  const auto path = std::filesystem::temp_directory_path() / "tadner_test.tade";
  write_tade(store, path);
  const auto back = read_tade(path);
  CHECK(back.dim == 4);
  CHECK((back.records.at(sentence_key(sentence)) - rows).cwiseAbs().maxCoeff() <= 1e-6);

  const auto enc = load_precomputed(path);
  CHECK(enc.encode_sentence(sentence).rows() == 3);
  const Vector person = enc.encode_phrase(Words{"person"});
  CHECK(person.size() == 4);
  CHECK_THROWS_AS(enc.encode_sentence(Words{"never", "seen"}), Error);
  try {
    enc.encode_sentence(Words{"never", "seen"});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingKey);
  }
  std::filesystem::remove(path);
}

TEST_CASE("TADE layout is little-endian with a fixed header") {
  TadeStore store;
  store.dim = 2;
  store.records["phrase:x"] = Matrix::Ones(1, 2);
  const std::string bytes = serialize_tade(store);
  CHECK(bytes.substr(0, 4) == "TADE");
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 8 + 4 + 8);
  std::string truncated = bytes.substr(0, bytes.size() - 1);
  CHECK_THROWS_AS(parse_tade(std::span(reinterpret_cast<const unsigned char*>(truncated.data()), truncated.size())),
                  Error);
  CHECK(sentence_key(Words{"a", "b"}) == "sent:" + sha1_hex("a b"));
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST_CASE("precomputed encoders are frozen") {
  TadeStore store;
  store.dim = 2;
  store.records["phrase:x"] = Matrix::Ones(1, 2);
  Encoder enc = PrecomputedEncoder(std::make_shared<const TadeStore>(store));
  CHECK_FALSE(enc.trainable());
  CHECK_THROWS_AS(enc.reference(), Error);
}

}
