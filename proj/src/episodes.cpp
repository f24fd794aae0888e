#include "tadner/episodes.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "tadner/errors.hpp"

namespace tadner {

std::map<std::string, std::size_t> count_entities(const LabeledSentence& sentence) {
  std::map<std::string, std::size_t> counts;
  for (const auto& span : spans_from_tags(sentence)) {
    if (span.entity_type) ++counts[*span.entity_type];
  }
  return counts;
}

namespace {

using Counts = std::vector<std::map<std::string, std::size_t>>;

std::map<std::string, std::size_t> totals(const Counts& counts) {
  std::map<std::string, std::size_t> out;
  for (const auto& sentence : counts) {
    for (const auto& [type, n] : sentence) out[type] += n;
  }
  return out;
}

// Greedily fills per-type quotas in [k, 2k] from the candidate order.
// Returns the chosen indices, or an empty vector if the quotas cannot be met.
std::vector<std::size_t> greedy_fill(const Counts& counts, std::span<const std::size_t> order,
                                     const std::vector<std::string>& types, std::size_t k) {
  std::map<std::string, std::size_t> have;
  for (const auto& t : types) have[t] = 0;
  auto satisfied = [&] {
    return std::all_of(have.begin(), have.end(), [&](const auto& kv) { return kv.second >= k; });
  };
  std::vector<std::size_t> chosen;
  for (std::size_t idx : order) {
    if (satisfied()) break;
    const auto& c = counts[idx];
    bool helps = false;
    bool overflows = false;
    for (const auto& t : types) {
      auto it = c.find(t);
      if (it == c.end()) continue;
      if (have[t] < k) helps = true;
      if (have[t] + it->second > 2 * k) overflows = true;
    }
    if (!helps || overflows) continue;
    for (const auto& t : types) {
      if (auto it = c.find(t); it != c.end()) have[t] += it->second;
    }
    chosen.push_back(idx);
  }
  if (!satisfied()) return {};
  return chosen;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  return order;
}

}  // namespace

std::size_t min_shots(std::span<const LabeledSentence> sentences) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& [type, n] : count_entities(s)) counts[type] += n;
  }
  std::size_t m = 0;
  for (const auto& [type, n] : counts) m = (m == 0) ? n : std::min(m, n);
  return m;
}

Episode sample_episode(std::span<const LabeledSentence> dataset, const SamplingConfig& cfg,
                       Rng& rng) {
  if (cfg.n_way < 1 || cfg.k_shot < 1) {
    throw Error(Errc::InvalidConfig, "n_way and k_shot must be at least 1");
  }
  if (dataset.empty()) throw Error(Errc::InsufficientData, "empty dataset");
  const std::size_t k = cfg.k_shot;
  const std::size_t qk = cfg.query_k == 0 ? cfg.k_shot : cfg.query_k;

  Counts counts;
  counts.reserve(dataset.size());
  for (const auto& sentence : dataset) counts.push_back(count_entities(sentence));

  std::vector<std::string> eligible;
  for (const auto& [type, n] : totals(counts)) {
    if (n >= k + qk) eligible.push_back(type);
  }
  if (eligible.size() < cfg.n_way) {
    throw Error(Errc::InsufficientData,
                std::to_string(eligible.size()) + " types have enough mentions for " +
                    std::to_string(k) + "-shot sampling, need " + std::to_string(cfg.n_way));
  }

  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    auto pool = eligible;
    rng.shuffle(pool);
    std::vector<std::string> types(pool.begin(), pool.begin() + static_cast<long>(cfg.n_way));

    const auto order = shuffled_indices(dataset.size(), rng);
    const auto support_idx = greedy_fill(counts, order, types, k);
    if (support_idx.empty()) continue;

    std::set<std::size_t> used(support_idx.begin(), support_idx.end());
    std::vector<std::size_t> rest;
    for (std::size_t idx : order) {
      if (!used.contains(idx)) rest.push_back(idx);
    }
    const auto query_idx = greedy_fill(counts, rest, types, qk);
    if (query_idx.empty()) continue;

    Episode episode;
    episode.types = LabelSet(types);
    episode.scheme = dataset.front().scheme;
    for (std::size_t idx : support_idx) {
      episode.support.push_back(restrict_types(dataset[idx], types));
    }
    for (std::size_t idx : query_idx) {
      episode.query.push_back(restrict_types(dataset[idx], types));
    }
    return episode;
  }
  throw Error(Errc::InsufficientData, "could not satisfy the k~2k quota after " +
                                          std::to_string(cfg.max_retries + 1) + " attempts");
}

std::vector<LabeledSentence> sample_support_set(std::span<const LabeledSentence> dataset,
                                                const SamplingConfig& cfg, Rng& rng) {
  if (cfg.k_shot < 1) throw Error(Errc::InvalidConfig, "k_shot must be at least 1");
  if (dataset.empty()) throw Error(Errc::InsufficientData, "empty dataset");
  const std::size_t k = cfg.k_shot;

  Counts counts;
  for (const auto& sentence : dataset) counts.push_back(count_entities(sentence));
  const auto total = totals(counts);
  if (total.empty()) throw Error(Errc::InsufficientData, "dataset has no entities");
  for (const auto& [type, n] : total) {
    if (n < k) {
      throw Error(Errc::InsufficientData, "type '" + type + "' has " + std::to_string(n) +
                                              " mentions, need " + std::to_string(k));
    }
  }

  std::map<std::string, std::size_t> have;
  auto under_quota = [&](const std::map<std::string, std::size_t>& c) {
    for (const auto& [type, n] : c) {
      if (have[type] < k) return true;
    }
    return false;
  };
  std::vector<std::size_t> chosen;
  for (std::size_t idx : shuffled_indices(dataset.size(), rng)) {
    if (!under_quota(counts[idx])) continue;
    for (const auto& [type, n] : counts[idx]) have[type] += n;
    chosen.push_back(idx);
    const bool done = std::all_of(total.begin(), total.end(),
                                  [&](const auto& kv) { return have[kv.first] >= k; });
    if (done) break;
  }

  // Drop sentences whose mentions are all surplus, latest additions first.
  for (std::size_t i = chosen.size(); i-- > 0;) {
    const auto& c = counts[chosen[i]];
    const bool removable = std::all_of(c.begin(), c.end(), [&](const auto& kv) {
      return have[kv.first] - kv.second >= k;
    });
    if (!removable) continue;
    for (const auto& [type, n] : c) have[type] -= n;
    chosen.erase(chosen.begin() + static_cast<long>(i));
  }

  std::vector<LabeledSentence> support;
  for (std::size_t idx : chosen) support.push_back(dataset[idx]);
  return support;
}

namespace {

nlohmann::json sentence_to_json(const LabeledSentence& sentence) {
  return nlohmann::json{{"tokens", sentence.tokens}, {"tags", sentence.tags}};
}

LabeledSentence sentence_from_json(const nlohmann::json& j, TaggingScheme scheme,
                                   std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw Error(Errc::SchemaViolation, what, line_no);
  };
  if (!j.is_object() || !j.contains("tokens") || !j.contains("tags")) {
    fail("sentence needs \"tokens\" and \"tags\"");
  }
  LabeledSentence sentence;
  sentence.scheme = scheme;
  try {
    sentence.tokens = j.at("tokens").get<std::vector<std::string>>();
    sentence.tags = j.at("tags").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    fail("\"tokens\" and \"tags\" must be string arrays");
  }
  if (sentence.tokens.empty() || sentence.tokens.size() != sentence.tags.size()) {
    fail("tokens and tags must be non-empty and of equal length");
  }
  for (const auto& token : sentence.tokens) {
    if (token.empty()) fail("empty token");
  }
  try {
    spans_from_tags(sentence);
  } catch (const Error& e) {
    fail(e.what());
  }
  return sentence;
}

}  // namespace

std::string episode_to_json_line(const Episode& episode) {
  nlohmann::ordered_json j;
  j["types"] = episode.types.labels();
  nlohmann::json support = nlohmann::json::array();
  for (const auto& s : episode.support) support.push_back(sentence_to_json(s));
  nlohmann::json query = nlohmann::json::array();
  for (const auto& s : episode.query) query.push_back(sentence_to_json(s));
  j["support"] = std::move(support);
  j["query"] = std::move(query);
  j["scheme"] = std::string(scheme_name(episode.scheme));
  return j.dump();
}

Episode episode_from_json_line(std::string_view line, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw Error(Errc::SchemaViolation, what, line_no);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("episode must be a JSON object");
  for (const char* field : {"types", "support", "query", "scheme"}) {
    if (!j.contains(field)) fail(std::string("missing \"") + field + "\"");
  }
  Episode episode;
  try {
    episode.scheme = parse_scheme(j.at("scheme").get<std::string>());
    episode.types = LabelSet(j.at("types").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  } catch (const Error& e) {
    fail(e.what());
  }
  if (episode.types.empty()) fail("\"types\" is empty");
  if (!j.at("support").is_array() || !j.at("query").is_array()) {
    fail("\"support\" and \"query\" must be arrays");
  }
  for (const auto& s : j.at("support")) {
    episode.support.push_back(sentence_from_json(s, episode.scheme, line_no));
  }
  for (const auto& s : j.at("query")) {
    episode.query.push_back(sentence_from_json(s, episode.scheme, line_no));
  }
  for (const auto& sentence : episode.support) {
    for (const auto& span : spans_from_tags(sentence)) {
      if (span.entity_type && !episode.types.contains(*span.entity_type)) {
        fail("support mentions type '" + *span.entity_type + "' outside \"types\"");
      }
    }
  }
  return episode;
}

void save_episodes(std::span<const Episode> episodes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& episode : episodes) out << episode_to_json_line(episode) << '\n';
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    episodes.push_back(episode_from_json_line(line, line_no));
  }
  return episodes;
}

}  // namespace tadner
