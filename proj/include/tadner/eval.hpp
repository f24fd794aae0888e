#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tadner/corpus.hpp"

namespace tadner {

// Spans of one sentence.
using SentenceSpans = std::vector<SpanAnnotation>;

struct MetricsSummary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  bool operator==(const MetricsSummary&) const = default;
};

// Exact match on (start, end, type), counts pooled over sentences.
MetricsSummary micro_f1(std::span<const SentenceSpans> predicted, std::span<const SentenceSpans> gold);
MetricsSummary summarize_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct ErrorBreakdown {
  std::size_t fp_span = 0;
  std::size_t fp_type = 0;
  std::size_t fn_span = 0;
  std::size_t fn_type = 0;
  std::size_t total_false = 0;

  ErrorBreakdown& operator+=(const ErrorBreakdown& other);
  bool operator==(const ErrorBreakdown&) const = default;
};

// A false positive whose boundaries match a gold span of another type is a type
// error, otherwise a span error; false negatives are split the same way.
ErrorBreakdown error_breakdown(std::span<const SentenceSpans> predicted,
                               std::span<const SentenceSpans> gold);

struct Statistic {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1); 0 for a single run
};

Statistic aggregate(std::span<const double> values);

struct AggregateReport {
  Statistic precision;
  Statistic recall;
  Statistic f1;
  MetricsSummary pooled;  // counts summed over all runs
  ErrorBreakdown errors;
  std::size_t runs = 0;
  std::size_t failed_runs = 0;
};

AggregateReport aggregate_runs(std::span<const MetricsSummary> runs,
                               std::span<const ErrorBreakdown> errors, std::size_t failed_runs = 0);

std::string report_to_json(const AggregateReport& report);
std::string report_to_table(const AggregateReport& report);

}  // namespace tadner
