#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tadner {

enum class Errc {
  MalformedLine,
  InvalidTag,
  EmptyCorpus,
  OverlappingSpans,
  SpanOutOfRange,
  UnknownLabel,
  InsufficientData,
  SchemaViolation,
  FormatError,
  MissingKey,
  LengthMismatch,
  NonFiniteLoss,
  DegenerateDenominator,
  EmptySupport,
  MissingTypeInSupport,
  FrozenEncoder,
  InvalidConfig,
  IoError,
};

std::string_view errc_name(Errc code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  Errc code() const noexcept { return code_; }
  // 1-based line number for parse errors, when known.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace tadner
