#include "tadner/errors.hpp"

namespace tadner {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::InvalidTag: return "InvalidTag";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::OverlappingSpans: return "OverlappingSpans";
    case Errc::SpanOutOfRange: return "SpanOutOfRange";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::FormatError: return "FormatError";
    case Errc::MissingKey: return "MissingKey";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DegenerateDenominator: return "DegenerateDenominator";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::MissingTypeInSupport: return "MissingTypeInSupport";
    case Errc::FrozenEncoder: return "FrozenEncoder";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string decorate(Errc code, const std::string& message, std::optional<std::size_t> line) {
  std::string out(errc_name(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line) {}

}  // namespace tadner
