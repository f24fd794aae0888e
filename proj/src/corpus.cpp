#include "tadner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "tadner/errors.hpp"

namespace tadner {

std::string_view scheme_name(TaggingScheme scheme) {
  switch (scheme) {
    case TaggingScheme::IO: return "IO";
    case TaggingScheme::BIO: return "BIO";
    case TaggingScheme::BIOES: return "BIOES";
  }
  return "IO";
}

TaggingScheme parse_scheme(std::string_view name) {
  if (name == "IO") return TaggingScheme::IO;
  if (name == "BIO") return TaggingScheme::BIO;
  if (name == "BIOES") return TaggingScheme::BIOES;
  throw Error(Errc::InvalidConfig, "unknown tagging scheme '" + std::string(name) + "'");
}

namespace {

bool prefix_allowed(char prefix, TaggingScheme scheme) {
  switch (scheme) {
    case TaggingScheme::IO: return prefix == 'I';
    case TaggingScheme::BIO: return prefix == 'B' || prefix == 'I';
    case TaggingScheme::BIOES:
      return prefix == 'B' || prefix == 'I' || prefix == 'E' || prefix == 'S';
  }
  return false;
}

}  // namespace

Tag parse_tag(std::string_view text, TaggingScheme scheme) {
  if (text == "O") return Tag{};
  if (text.empty()) throw Error(Errc::InvalidTag, "empty tag");
  const char prefix = text[0];
  if (!prefix_allowed(prefix, scheme)) {
    throw Error(Errc::InvalidTag, "tag '" + std::string(text) + "' is not valid under " +
                                      std::string(scheme_name(scheme)));
  }
  if (text.size() == 1) return Tag{prefix, {}};
  if (text[1] != '-' || text.size() == 2) {
    throw Error(Errc::InvalidTag, "malformed tag '" + std::string(text) + "'");
  }
  return Tag{prefix, std::string(text.substr(2))};
}

std::string format_tag(const Tag& tag) {
  if (!tag.is_entity()) return "O";
  if (tag.type.empty()) return std::string(1, tag.prefix);
  return std::string(1, tag.prefix) + "-" + tag.type;
}

std::vector<SpanAnnotation> spans_from_tags(std::span<const std::string> tags,
                                            TaggingScheme scheme) {
  std::vector<SpanAnnotation> spans;
  bool open = false;  // the last span may still be extended
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag tag = parse_tag(tags[i], scheme);
    if (!tag.is_entity()) {
      open = false;
      continue;
    }
    std::optional<std::string> type;
    if (!tag.type.empty()) type = tag.type;
    const bool continues = (tag.prefix == 'I' || tag.prefix == 'E') && open &&
                           spans.back().end + 1 == i && spans.back().entity_type == type;
    if (continues) {
      spans.back().end = i;
    } else {
      spans.push_back(SpanAnnotation{i, i, type});
    }
    open = tag.prefix == 'B' || tag.prefix == 'I';
  }
  return spans;
}

std::vector<SpanAnnotation> spans_from_tags(const LabeledSentence& sentence) {
  return spans_from_tags(sentence.tags, sentence.scheme);
}

std::vector<std::string> tags_from_spans(std::span<const SpanAnnotation> spans,
                                         std::size_t length, TaggingScheme scheme) {
  std::vector<SpanAnnotation> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> tags(length, "O");
  std::optional<std::size_t> last_end;
  for (const auto& span : sorted) {
    if (span.start > span.end || span.end >= length) {
      throw Error(Errc::SpanOutOfRange, "span [" + std::to_string(span.start) + ", " +
                                            std::to_string(span.end) + "] outside length " +
                                            std::to_string(length));
    }
    if (last_end && span.start <= *last_end) {
      throw Error(Errc::OverlappingSpans,
                  "span starting at " + std::to_string(span.start) + " overlaps its predecessor");
    }
    last_end = span.end;
    const std::string type = span.entity_type.value_or("");
    auto put = [&](std::size_t i, char prefix) { tags[i] = format_tag(Tag{prefix, type}); };
    for (std::size_t i = span.start; i <= span.end; ++i) {
      switch (scheme) {
        case TaggingScheme::IO: put(i, 'I'); break;
        case TaggingScheme::BIO: put(i, i == span.start ? 'B' : 'I'); break;
        case TaggingScheme::BIOES:
          if (span.start == span.end) put(i, 'S');
          else if (i == span.start) put(i, 'B');
          else if (i == span.end) put(i, 'E');
          else put(i, 'I');
          break;
      }
    }
  }
  return tags;
}

LabeledSentence convert_tags(const LabeledSentence& sentence, TaggingScheme target) {
  const auto spans = spans_from_tags(sentence);
  return LabeledSentence{sentence.tokens, tags_from_spans(spans, sentence.size(), target),
                         target};
}

LabeledSentence make_sentence(std::vector<std::string> tokens,
                              std::span<const SpanAnnotation> spans, TaggingScheme scheme) {
  auto tags = tags_from_spans(spans, tokens.size(), scheme);
  return LabeledSentence{std::move(tokens), std::move(tags), scheme};
}

LabeledSentence restrict_types(const LabeledSentence& sentence,
                               const std::vector<std::string>& keep) {
  std::vector<SpanAnnotation> kept;
  for (auto& span : spans_from_tags(sentence)) {
    if (span.entity_type &&
        std::find(keep.begin(), keep.end(), *span.entity_type) != keep.end()) {
      kept.push_back(std::move(span));
    }
  }
  return make_sentence(sentence.tokens, kept, sentence.scheme);
}

std::vector<std::string> untyped_tags(const LabeledSentence& sentence) {
  auto spans = spans_from_tags(sentence);
  for (auto& span : spans) span.entity_type.reset();
  return tags_from_spans(spans, sentence.size(), sentence.scheme);
}

namespace {

struct PendingSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<std::size_t> lines;
};

LabeledSentence finish_sentence(PendingSentence& pending, TaggingScheme scheme,
                                const ParseOptions& options, ParseStats* stats) {
  LabeledSentence sentence{std::move(pending.tokens), std::move(pending.tags), scheme};
  auto canonical = tags_from_spans(spans_from_tags(sentence), sentence.size(), scheme);
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    if (canonical[i] == sentence.tags[i]) continue;
    if (options.strict) {
      throw Error(Errc::InvalidTag,
                  "ill-formed " + std::string(scheme_name(scheme)) + " sequence at tag '" +
                      sentence.tags[i] + "'",
                  pending.lines[i]);
    }
    if (stats) ++stats->repaired_tags;
  }
  sentence.tags = std::move(canonical);
  pending = PendingSentence{};
  return sentence;
}

}  // namespace

std::vector<LabeledSentence> parse_conll(std::string_view text, TaggingScheme scheme,
                                         const ParseOptions& options, ParseStats* stats) {
  std::vector<LabeledSentence> sentences;
  PendingSentence pending;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto flush = [&] {
    if (!pending.tokens.empty()) {
      sentences.push_back(finish_sentence(pending, scheme, options, stats));
    }
  };
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto columns = split_words(line);
    if (columns.empty()) {
      flush();
      continue;
    }
    if (columns.front() == "-DOCSTART-") continue;
    if (columns.size() < 2) {
      throw Error(Errc::MalformedLine, "expected at least 2 columns, got 1", line_no);
    }
    try {
      parse_tag(columns.back(), scheme);
    } catch (const Error& e) {
      throw Error(Errc::InvalidTag, e.what(), line_no);
    }
    pending.tokens.push_back(columns.front());
    pending.tags.push_back(columns.back());
    pending.lines.push_back(line_no);
  }
  flush();
  if (sentences.empty()) throw Error(Errc::EmptyCorpus, "no sentences in input");
  if (stats) stats->sentences += sentences.size();
  return sentences;
}

std::vector<LabeledSentence> read_conll_file(const std::filesystem::path& path,
                                             TaggingScheme scheme, const ParseOptions& options,
                                             ParseStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_conll(buffer.str(), scheme, options, stats);
}

std::string serialize_conll(std::span<const LabeledSentence> sentences) {
  std::string out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (s > 0) out += '\n';
    const auto& sentence = sentences[s];
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      out += sentence.tokens[i];
      out += ' ';
      out += sentence.tags[i];
      out += '\n';
    }
  }
  return out;
}

LabelSet::LabelSet(std::vector<std::string> labels) {
  for (auto& label : labels) {
    if (!add(label)) throw Error(Errc::InvalidConfig, "duplicate label '" + label + "'");
  }
}

bool LabelSet::add(const std::string& label) {
  if (label.empty() || label == "O") {
    throw Error(Errc::InvalidConfig, "'" + label + "' cannot be an entity type");
  }
  if (contains(label)) return false;
  labels_.push_back(label);
  return true;
}

bool LabelSet::contains(std::string_view label) const { return index_of(label).has_value(); }

std::optional<std::size_t> LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

LabelSet collect_labels(std::span<const LabeledSentence> sentences) {
  LabelSet labels;
  for (const auto& sentence : sentences) {
    for (const auto& span : spans_from_tags(sentence)) {
      if (span.entity_type) labels.add(*span.entity_type);
    }
  }
  return labels;
}

TypeNameMap::TypeNameMap(std::map<std::string, std::string> entries) {
  for (auto& [label, name] : entries) set(label, name);
}

void TypeNameMap::set(const std::string& label, const std::string& name) {
  if (split_words(name).empty()) {
    throw Error(Errc::InvalidConfig, "type name for '" + label + "' is empty");
  }
  entries_[label] = name;
}

TypeNameMap TypeNameMap::from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::FormatError, std::string("type-name map: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::FormatError, "type-name map must be a JSON object");
  TypeNameMap map;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string()) {
      throw Error(Errc::FormatError, "type name for '" + it.key() + "' must be a string");
    }
    map.set(it.key(), it.value().get<std::string>());
  }
  return map;
}

TypeNameMap TypeNameMap::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::string TypeNameMap::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [label, name] : entries_) doc[label] = name;
  return doc.dump(2);
}

const std::string& TypeNameMap::name(std::string_view label) const {
  auto it = entries_.find(label);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownLabel, "no type name for label '" + std::string(label) + "'");
  }
  return it->second;
}

bool TypeNameMap::contains(std::string_view label) const { return entries_.contains(label); }

void TypeNameMap::require_total(const LabelSet& labels) const {
  for (const auto& label : labels.labels()) name(label);
}

std::string map_type_name(const TypeNameMap& map, std::string_view label) {
  return map.name(label);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace tadner
