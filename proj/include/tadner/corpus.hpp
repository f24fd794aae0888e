#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tadner {

enum class TaggingScheme { IO, BIO, BIOES };

std::string_view scheme_name(TaggingScheme scheme);
TaggingScheme parse_scheme(std::string_view name);

// One decoded tag. prefix is 'O' for the non-entity label; otherwise one of
// I/B/E/S. An empty type marks a boundary-only (untyped) tag such as "I".
struct Tag {
  char prefix = 'O';
  std::string type;

  bool is_entity() const { return prefix != 'O'; }
  bool operator==(const Tag&) const = default;
};

Tag parse_tag(std::string_view text, TaggingScheme scheme);
std::string format_tag(const Tag& tag);

// Inclusive token range [start, end]; entity_type absent for boundary-only spans.
struct SpanAnnotation {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> entity_type;

  std::size_t length() const { return end - start + 1; }
  auto operator<=>(const SpanAnnotation&) const = default;
  bool operator==(const SpanAnnotation&) const = default;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  TaggingScheme scheme = TaggingScheme::IO;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const LabeledSentence&) const = default;
};

struct ParseOptions {
  // Reject ill-formed continuations (e.g. BIO "I-X" after "O") instead of repairing them.
  bool strict = false;
};

struct ParseStats {
  std::size_t sentences = 0;
  std::size_t repaired_tags = 0;
};

std::vector<LabeledSentence> parse_conll(std::string_view text, TaggingScheme scheme,
                                         const ParseOptions& options = {},
                                         ParseStats* stats = nullptr);
std::vector<LabeledSentence> read_conll_file(const std::filesystem::path& path,
                                             TaggingScheme scheme,
                                             const ParseOptions& options = {},
                                             ParseStats* stats = nullptr);
std::string serialize_conll(std::span<const LabeledSentence> sentences);

// Decodes tags into maximal spans. Decoding is lenient: a continuation tag
// that cannot extend the open span starts a new one.
std::vector<SpanAnnotation> spans_from_tags(std::span<const std::string> tags,
                                            TaggingScheme scheme);
std::vector<SpanAnnotation> spans_from_tags(const LabeledSentence& sentence);

// Under IO, touching spans of the same type are not representable and merge.
std::vector<std::string> tags_from_spans(std::span<const SpanAnnotation> spans,
                                         std::size_t length, TaggingScheme scheme);

LabeledSentence convert_tags(const LabeledSentence& sentence, TaggingScheme target);

// Builds a sentence whose tags encode the given spans.
LabeledSentence make_sentence(std::vector<std::string> tokens,
                              std::span<const SpanAnnotation> spans, TaggingScheme scheme);

// Replaces every entity tag whose type is not kept with "O".
LabeledSentence restrict_types(const LabeledSentence& sentence,
                               const std::vector<std::string>& keep);

// Strips entity types, leaving boundary-only tags in the same scheme.
std::vector<std::string> untyped_tags(const LabeledSentence& sentence);

class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  // Appends if absent. Returns false when already present.
  bool add(const std::string& label);
  bool contains(std::string_view label) const;
  std::optional<std::size_t> index_of(std::string_view label) const;

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

// Labels in order of first appearance.
LabelSet collect_labels(std::span<const LabeledSentence> sentences);

class TypeNameMap {
 public:
  TypeNameMap() = default;
  explicit TypeNameMap(std::map<std::string, std::string> entries);

  static TypeNameMap from_json(std::string_view json_text);
  static TypeNameMap load(const std::filesystem::path& path);
  std::string to_json() const;

  const std::string& name(std::string_view label) const;
  bool contains(std::string_view label) const;
  void require_total(const LabelSet& labels) const;
  void set(const std::string& label, const std::string& name);

  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

std::string map_type_name(const TypeNameMap& map, std::string_view label);

// Splits a phrase on whitespace.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);

}  // namespace tadner
