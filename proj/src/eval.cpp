#include "tadner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "tadner/errors.hpp"

namespace tadner {

namespace {

using Key = std::tuple<std::size_t, std::size_t, std::string>;
using Boundary = std::pair<std::size_t, std::size_t>;

std::multiset<Key> keys_of(const SentenceSpans& spans) {
  std::multiset<Key> out;
  for (const auto& s : spans) out.emplace(s.start, s.end, s.entity_type.value_or(""));
  return out;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::LengthMismatch, "predicted and gold sentence counts differ");
}

// Matches spans exactly, returning the unmatched leftovers on both sides.
std::pair<std::vector<Key>, std::vector<Key>> unmatched(const SentenceSpans& pred,
                                                        const SentenceSpans& gold,
                                                        std::size_t& tp) {
  auto p = keys_of(pred);
  auto g = keys_of(gold);
  std::vector<Key> fp;
  for (const auto& k : p) {
    auto it = g.find(k);
    if (it != g.end()) {
      g.erase(it);
      ++tp;
    } else {
      fp.push_back(k);
    }
  }
  return {fp, std::vector<Key>(g.begin(), g.end())};
}

}  // namespace

MetricsSummary summarize_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  MetricsSummary m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

MetricsSummary micro_f1(std::span<const SentenceSpans> predicted, std::span<const SentenceSpans> gold) {
  check_lengths(predicted.size(), gold.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto [f_pos, f_neg] = unmatched(predicted[i], gold[i], tp);
    fp += f_pos.size();
    fn += f_neg.size();
  }
  return summarize_counts(tp, fp, fn);
}

ErrorBreakdown& ErrorBreakdown::operator+=(const ErrorBreakdown& other) {
  fp_span += other.fp_span;
  fp_type += other.fp_type;
  fn_span += other.fn_span;
  fn_type += other.fn_type;
  total_false += other.total_false;
  return *this;
}

ErrorBreakdown error_breakdown(std::span<const SentenceSpans> predicted,
                               std::span<const SentenceSpans> gold) {
  check_lengths(predicted.size(), gold.size());
  ErrorBreakdown out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    std::size_t tp = 0;
    auto [fps, fns] = unmatched(predicted[i], gold[i], tp);
    std::set<Boundary> gold_bounds, pred_bounds;
    for (const auto& s : gold[i]) gold_bounds.emplace(s.start, s.end);
    for (const auto& s : predicted[i]) pred_bounds.emplace(s.start, s.end);
    // Spans in one sentence do not overlap, so a boundary match is a type error.
    for (const auto& [s, e, t] : fps) {
      if (gold_bounds.contains({s, e})) ++out.fp_type;
      else ++out.fp_span;
    }
    for (const auto& [s, e, t] : fns) {
      if (pred_bounds.contains({s, e})) ++out.fn_type;
      else ++out.fn_span;
    }
    out.total_false += fps.size() + fns.size();
  }
  return out;
}

Statistic aggregate(std::span<const double> values) {
  Statistic st;
  if (values.empty()) return st;
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return st;
}

AggregateReport aggregate_runs(std::span<const MetricsSummary> runs,
                               std::span<const ErrorBreakdown> errors, std::size_t failed_runs) {
  AggregateReport report;
  report.runs = runs.size();
  report.failed_runs = failed_runs;
  std::vector<double> p, r, f;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& m : runs) {
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
  }
  report.precision = aggregate(p);
  report.recall = aggregate(r);
  report.f1 = aggregate(f);
  report.pooled = summarize_counts(tp, fp, fn);
  for (const auto& e : errors) report.errors += e;
  return report;
}

std::string report_to_json(const AggregateReport& report) {
  auto stat = [](const Statistic& s) {
    return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.stddev}};
  };
  nlohmann::ordered_json doc;
  doc["runs"] = report.runs;
  doc["failed_runs"] = report.failed_runs;
  doc["precision"] = stat(report.precision);
  doc["recall"] = stat(report.recall);
  doc["f1"] = stat(report.f1);
  doc["pooled"] = {{"precision", report.pooled.precision},
                   {"recall", report.pooled.recall},
                   {"f1", report.pooled.f1},
                   {"tp", report.pooled.tp},
                   {"fp", report.pooled.fp},
                   {"fn", report.pooled.fn}};
  doc["errors"] = {{"fp_span", report.errors.fp_span},
                   {"fp_type", report.errors.fp_type},
                   {"fn_span", report.errors.fn_span},
                   {"fn_type", report.errors.fn_type},
                   {"total_false", report.errors.total_false}};
  return doc.dump(2) + "\n";
}

std::string report_to_table(const AggregateReport& report) {
  std::ostringstream out;
  char line[128];
  auto row = [&](const char* name, const Statistic& s) {
    std::snprintf(line, sizeof line, "%-10s %8.2f %8.2f\n", name, 100.0 * s.mean, 100.0 * s.stddev);
    out << line;
  };
  std::snprintf(line, sizeof line, "%-10s %8s %8s\n", "metric", "mean", "std");
  out << line;
  row("precision", report.precision);
  row("recall", report.recall);
  row("f1", report.f1);
  out << "\n";
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s\n", "errors", "span", "type", "total");
  out << line;
  std::snprintf(line, sizeof line, "%-10s %8zu %8zu %8zu\n", "false pos", report.errors.fp_span,
                report.errors.fp_type, report.errors.fp_span + report.errors.fp_type);
  out << line;
  std::snprintf(line, sizeof line, "%-10s %8zu %8zu %8zu\n", "false neg", report.errors.fn_span,
                report.errors.fn_type, report.errors.fn_span + report.errors.fn_type);
  out << line;
  std::snprintf(line, sizeof line, "runs: %zu  failed: %zu\n", report.runs, report.failed_runs);
  out << line;
  return out.str();
}

}  // namespace tadner
