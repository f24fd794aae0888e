#include "doctest.h"

#include <algorithm>

#include "oracles.hpp"
#include "tadner/config.hpp"
#include "tadner/corpus.hpp"
#include "tadner/errors.hpp"

using namespace tadner;

namespace {

std::vector<std::string> tags_of(std::vector<std::string> t) { return t; }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::IoError;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("conll blocks split on blank lines") {
  auto s = parse_conll("EU B-ORG\nrejects O\n\nGermany B-LOC\n", TaggingScheme::BIO);
  REQUIRE(s.size() == 2);
  CHECK(s[0].tokens == tags_of({"EU", "rejects"}));
  CHECK(s[0].tags == tags_of({"B-ORG", "O"}));
  CHECK(s[1].tags == tags_of({"B-LOC"}));
}

TEST_CASE("empty input is an empty corpus") {
  CHECK(code_of([] { parse_conll("", TaggingScheme::IO); }) == Errc::EmptyCorpus);
}

TEST_CASE("first column is the token and last column the tag") {
  auto s = parse_conll("EU NNP B-ORG\n", TaggingScheme::BIO);
  CHECK(s[0].tokens[0] == "EU");
  CHECK(s[0].tags[0] == "B-ORG");
}

TEST_CASE("a one-column line reports its line number") {
  try {
    parse_conll("EU B-ORG\nbroken\n", TaggingScheme::BIO);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedLine);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("serialize then parse is the identity") {
  auto s = parse_conll("a I-X\nb O\n\nc I-Y\nd I-Y\n", TaggingScheme::IO);
  CHECK(parse_conll(serialize_conll(s), TaggingScheme::IO) == s);
}

TEST_CASE("scheme conversions") {
  auto conv = [](std::vector<std::string> tags, TaggingScheme from, TaggingScheme to) {
    LabeledSentence s{std::vector<std::string>(tags.size(), "w"), tags, from};
    return convert_tags(s, to).tags;
  };
  CHECK(conv({"B-PER", "I-PER", "O"}, TaggingScheme::BIO, TaggingScheme::IO) ==
        tags_of({"I-PER", "I-PER", "O"}));
  CHECK(conv({"B-PER"}, TaggingScheme::BIO, TaggingScheme::BIOES) == tags_of({"S-PER"}));
  CHECK(conv({"I-PER", "I-PER", "I-ORG"}, TaggingScheme::IO, TaggingScheme::BIO) ==
        tags_of({"B-PER", "I-PER", "B-ORG"}));
}

TEST_CASE("maximal runs become spans") {
  auto spans = spans_from_tags(tags_of({"I-PER", "I-PER", "O", "I-LOC"}), TaggingScheme::IO);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == SpanAnnotation{0, 1, "PER"});
  CHECK(spans[1] == SpanAnnotation{3, 3, "LOC"});
  CHECK(spans_from_tags(tags_of({"O", "O"}), TaggingScheme::IO).empty());
}

TEST_CASE("spans to tags") {
  std::vector<SpanAnnotation> one{{0, 1, "PER"}};
  CHECK(tags_from_spans(one, 3, TaggingScheme::IO) == tags_of({"I-PER", "I-PER", "O"}));
  CHECK(tags_from_spans({}, 2, TaggingScheme::IO) == tags_of({"O", "O"}));
}

TEST_CASE("span sets round trip exhaustively up to length 6") {
  const std::vector<std::string> types{"A", "B"};
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const auto& set : oracle::all_span_sets(n, types)) {
      std::vector<SpanAnnotation> spans;
      for (const auto& [s, e, t] : set) spans.push_back({s, e, t});
      for (auto scheme : {TaggingScheme::BIO, TaggingScheme::BIOES}) {
        CHECK(spans_from_tags(tags_from_spans(spans, n, scheme), scheme) == spans);
      }
      if (!oracle::has_touching_same_type(set)) {
        CHECK(spans_from_tags(tags_from_spans(spans, n, TaggingScheme::IO), TaggingScheme::IO) == spans);
      }
    }
  }
}

TEST_CASE("IO decoding matches the brute-force run enumerator") {
  for (const auto& tags : oracle::all_io_sequences(6, {"A", "B"})) {
    auto got = oracle::to_oracle(spans_from_tags(tags, TaggingScheme::IO));
    std::sort(got.begin(), got.end());
    CHECK(got == oracle::io_runs_brute_force(tags));
  }
}

TEST_CASE("invalid spans and tags are rejected") {
  std::vector<SpanAnnotation> overlap{{0, 1, "A"}, {1, 2, "B"}};
  CHECK(code_of([&] { tags_from_spans(overlap, 3, TaggingScheme::IO); }) == Errc::OverlappingSpans);
  std::vector<SpanAnnotation> outside{{2, 3, "A"}};
  CHECK(code_of([&] { tags_from_spans(outside, 3, TaggingScheme::IO); }) == Errc::SpanOutOfRange);
  CHECK(code_of([] { parse_tag("B-PER", TaggingScheme::IO); }) == Errc::InvalidTag);
  CHECK(code_of([] { parse_conll("x S-PER\n", TaggingScheme::BIO); }) == Errc::InvalidTag);
}

TEST_CASE("restricting types relabels the rest as O") {
  auto s = make_sentence({"a", "b", "c"}, std::vector<SpanAnnotation>{{0, 0, "A"}, {2, 2, "B"}}, TaggingScheme::BIO);
  auto r = restrict_types(s, {"B"});
  CHECK(r.tags == tags_of({"O", "O", "B-B"}));
  CHECK(untyped_tags(s) == tags_of({"B", "O", "B"}));
}

TEST_CASE("builtin type-name maps") {
  CHECK(map_type_name(builtin_type_names("conll"), "PER") == "person");
  CHECK(map_type_name(builtin_type_names("fewnerd"), "location-GPE") == "geographical social political entity");
  CHECK(map_type_name(builtin_type_names("i2b2"), "ZIP") == "zip code");
  CHECK(code_of([] { map_type_name(builtin_type_names("conll"), "XYZ"); }) == Errc::UnknownLabel);
}

TEST_CASE("type-name maps round trip through JSON") {
  TypeNameMap m({{"PER", "person"}, {"LOC", "location"}});
  CHECK(TypeNameMap::from_json(m.to_json()).entries() == m.entries());
  CHECK(code_of([] { TypeNameMap::from_json("[1]"); }) == Errc::FormatError);
}

TEST_CASE("label sets keep first-seen order") {
  auto s = parse_conll("a I-Y\nb I-X\n\nc I-Y\n", TaggingScheme::IO);
  CHECK(collect_labels(s).labels() == tags_of({"Y", "X"}));
}

}
