#include "tadner/synthetic.hpp"

#include "tadner/errors.hpp"

namespace tadner {

SyntheticCorpus::SyntheticCorpus(SyntheticSpec spec) : spec_(spec) {
  if (spec_.types < 1 || spec_.words_per_type < 1 || spec_.filler_words < 1 ||
      spec_.trigger_words < 1 || spec_.max_mentions < 1 || spec_.max_mention_length < 1 ||
      spec_.min_fillers > spec_.max_fillers ||
      (!spec_.type_words.empty() && spec_.type_words.size() != spec_.types)) {
    throw Error(Errc::InvalidConfig, "invalid synthetic corpus spec");
  }
  for (std::size_t t = 0; t < spec_.types; ++t) {
    labels_.push_back("T" + std::to_string(t));
    std::vector<std::string> w;
    const auto count = spec_.type_words.empty() ? spec_.words_per_type : spec_.type_words[t];
    if (count < 1) throw Error(Errc::InvalidConfig, "every synthetic type needs a word");
    for (std::size_t i = 0; i < count; ++i) {
      w.push_back("e" + std::to_string(t) + "w" + std::to_string(i));
    }
    words_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < spec_.filler_words; ++i) fillers_.push_back("f" + std::to_string(i));
  for (std::size_t i = 0; i < spec_.trigger_words; ++i) triggers_.push_back("g" + std::to_string(i));
  for (std::size_t i = 0; i < spec_.closer_words; ++i) closers_.push_back("c" + std::to_string(i));
}

TypeNameMap SyntheticCorpus::names() const {
  TypeNameMap map;
  for (std::size_t t = 0; t < labels_.size(); ++t) map.set(labels_[t], join_words(words_[t]));
  return map;
}

LabeledSentence SyntheticCorpus::sentence(Rng& rng, std::span<const std::size_t> types,
                                          std::span<const std::size_t> distractors,
                                          TaggingScheme scheme) const {
  if (types.empty() && distractors.empty()) {
    throw Error(Errc::InvalidConfig, "synthetic sentence needs at least one type");
  }
  std::vector<std::pair<std::size_t, bool>> pool;  // (type, counts as entity)
  for (auto t : types) pool.emplace_back(t, true);
  for (auto t : distractors) pool.emplace_back(t, false);

  auto filler = [&](std::vector<std::string>& tokens) {
    tokens.push_back(fillers_[rng.uniform_index(fillers_.size())]);
  };
  auto fill_run = [&](std::vector<std::string>& tokens) {
    const auto n = spec_.min_fillers + rng.uniform_index(spec_.max_fillers - spec_.min_fillers + 1);
    for (std::size_t i = 0; i < n; ++i) filler(tokens);
  };

  std::vector<std::string> tokens;
  std::vector<SpanAnnotation> spans;
  const auto mentions = 1 + rng.uniform_index(spec_.max_mentions);
  fill_run(tokens);
  for (std::size_t m = 0; m < mentions; ++m) {
    if (m > 0) filler(tokens);
    const auto [type, entity] = pool[rng.uniform_index(pool.size())];
    tokens.push_back(triggers_[rng.uniform_index(triggers_.size())]);
    const auto len = 1 + rng.uniform_index(spec_.max_mention_length);
    const auto start = tokens.size();
    for (std::size_t i = 0; i < len; ++i) {
      tokens.push_back(words_[type][rng.uniform_index(words_[type].size())]);
    }
    if (entity) spans.push_back(SpanAnnotation{start, tokens.size() - 1, labels_[type]});
    if (!closers_.empty()) tokens.push_back(closers_[rng.uniform_index(closers_.size())]);
  }
  fill_run(tokens);
  return make_sentence(std::move(tokens), spans, scheme);
}

std::vector<LabeledSentence> SyntheticCorpus::sentences(std::size_t count, Rng& rng,
                                                        std::span<const std::size_t> types,
                                                        std::span<const std::size_t> distractors,
                                                        TaggingScheme scheme) const {
  std::vector<LabeledSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sentence(rng, types, distractors, scheme));
  return out;
}

}  // namespace tadner
