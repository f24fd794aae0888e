#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracle {

using tadner::TaggingScheme;

namespace {

void extend(std::size_t pos, std::size_t length, const std::vector<std::string>& types,
            SpanSet& current, std::vector<SpanSet>& out) {
  if (pos >= length) {
    out.push_back(current);
    return;
  }
  extend(pos + 1, length, types, current, out);  // token pos is outside every span
  for (std::size_t end = pos; end < length; ++end) {
    for (const auto& t : types) {
      current.emplace_back(pos, end, t);
      extend(end + 1, length, types, current, out);
      current.pop_back();
    }
  }
}

}  // namespace

std::vector<SpanSet> all_span_sets(std::size_t length, const std::vector<std::string>& types) {
  std::vector<SpanSet> out;
  SpanSet current;
  extend(0, length, types, current, out);
  return out;
}

std::vector<std::string> encode(const SpanSet& spans, std::size_t length, TaggingScheme scheme) {
  std::vector<std::string> tags(length, "O");
  for (const auto& [s, e, t] : spans) {
    for (std::size_t i = s; i <= e; ++i) {
      std::string prefix = "I";
      if (scheme == TaggingScheme::BIO && i == s) prefix = "B";
      if (scheme == TaggingScheme::BIOES) {
        if (s == e) prefix = "S";
        else if (i == s) prefix = "B";
        else if (i == e) prefix = "E";
      }
      tags[i] = prefix + "-" + t;
    }
  }
  return tags;
}

bool has_touching_same_type(const SpanSet& spans) {
  for (std::size_t a = 0; a < spans.size(); ++a) {
    for (std::size_t b = 0; b < spans.size(); ++b) {
      if (std::get<1>(spans[a]) + 1 == std::get<0>(spans[b]) &&
          std::get<2>(spans[a]) == std::get<2>(spans[b])) {
        return true;
      }
    }
  }
  return false;
}

SpanSet merge_touching(const SpanSet& spans) {
  SpanSet sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  SpanSet out;
  for (const auto& sp : sorted) {
    if (!out.empty() && std::get<1>(out.back()) + 1 == std::get<0>(sp) &&
        std::get<2>(out.back()) == std::get<2>(sp)) {
      std::get<1>(out.back()) = std::get<1>(sp);
    } else {
      out.push_back(sp);
    }
  }
  return out;
}

SpanSet io_runs_brute_force(const std::vector<std::string>& tags) {
  auto type_at = [&](std::size_t i) { return tags[i] == "O" ? std::string() : tags[i].substr(2); };
  SpanSet out;
  const std::size_t n = tags.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const std::string t = type_at(i);
      if (t.empty()) continue;
      bool inside = true;
      for (std::size_t k = i; k <= j; ++k) inside = inside && type_at(k) == t;
      const bool left_closed = i == 0 || type_at(i - 1) != t;
      const bool right_closed = j + 1 == n || type_at(j + 1) != t;
      if (inside && left_closed && right_closed) out.emplace_back(i, j, t);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> all_io_sequences(std::size_t length,
                                                       const std::vector<std::string>& types) {
  std::vector<std::string> alphabet{"O"};
  for (const auto& t : types) alphabet.push_back("I-" + t);
  std::vector<std::vector<std::string>> out{{}};
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : out) {
      for (const auto& a : alphabet) {
        auto seq = prefix;
        seq.push_back(a);
        next.push_back(std::move(seq));
      }
    }
    out = std::move(next);
  }
  return out;
}

SpanSet to_oracle(const std::vector<tadner::SpanAnnotation>& spans) {
  SpanSet out;
  for (const auto& s : spans) out.emplace_back(s.start, s.end, s.entity_type.value_or(""));
  return out;
}

Counts count_sets(const std::vector<tadner::SentenceSpans>& predicted,
                  const std::vector<tadner::SentenceSpans>& gold) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::string>;
  using Bound = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::set<Key> p, g;
  std::set<Bound> pb, gb;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (const auto& s : predicted[i]) {
      p.emplace(i, s.start, s.end, *s.entity_type);
      pb.emplace(i, s.start, s.end);
    }
    for (const auto& s : gold[i]) {
      g.emplace(i, s.start, s.end, *s.entity_type);
      gb.emplace(i, s.start, s.end);
    }
  }
  Counts c;
  for (const auto& k : p) {
    if (g.contains(k)) {
      ++c.tp;
      continue;
    }
    ++c.fp;
    if (gb.contains({std::get<0>(k), std::get<1>(k), std::get<2>(k)})) ++c.fp_type;
    else ++c.fp_span;
  }
  for (const auto& k : g) {
    if (p.contains(k)) continue;
    ++c.fn;
    if (pb.contains({std::get<0>(k), std::get<1>(k), std::get<2>(k)})) ++c.fn_type;
    else ++c.fn_span;
  }
  return c;
}

tadner::SentenceSpans random_spans(tadner::Rng& rng, std::size_t length,
                                   const std::vector<std::string>& types) {
  tadner::SentenceSpans out;
  std::size_t i = 0;
  while (i < length) {
    if (rng.uniform01() < 0.6) {
      ++i;
      continue;
    }
    const std::size_t len = 1 + rng.uniform_index(std::min<std::size_t>(3, length - i));
    out.push_back({i, i + len - 1, types[rng.uniform_index(types.size())]});
    i += len;
  }
  return out;
}

FdReport check_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                        std::size_t directions, std::uint64_t seed, double step, double floor) {
  tadner::Rng rng(seed);
  FdReport report;
  for (std::size_t k = 0; k < directions; ++k) {
    Eigen::VectorXd d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.normal();
    d.normalize();
    const double fd = (f(x + step * d) - f(x - step * d)) / (2.0 * step);
    const double analytic = grad.dot(d);
    const double scale = std::max({std::abs(fd), std::abs(analytic), floor});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(fd - analytic) / scale);
    ++report.directions;
  }
  return report;
}

}  // namespace oracle
