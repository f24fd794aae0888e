#include "tadner/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "tadner/binary_io.hpp"
#include "tadner/errors.hpp"

namespace tadner {

namespace {

constexpr std::string_view kMagic = "TADC";
constexpr std::uint32_t kReferenceKind = 0;
constexpr std::uint32_t kPrecomputedKind = 1;

void put_vector(std::string& out, const Vector& v) {
  binary::put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) binary::put_f32(out, static_cast<float>(v[i]));
}

Vector read_vector(binary::Reader& in) {
  const auto n = in.u64();
  if (n > in.remaining() / 4) throw Error(Errc::FormatError, "parameter block exceeds file size");
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = in.f32();
    if (!std::isfinite(v[i])) throw Error(Errc::FormatError, "non-finite parameter in checkpoint");
  }
  return v;
}

void put_encoder(std::string& out, const Encoder& encoder, std::string_view tade_path) {
  const auto* ref = encoder.maybe_reference();
  if (!ref) {
    if (tade_path.empty()) {
      throw Error(Errc::InvalidConfig, "precomputed encoder needs its TADE path to be checkpointed");
    }
    binary::put_u32(out, kPrecomputedKind);
    binary::put_string(out, tade_path);
    return;
  }
  const auto& cfg = ref->config();
  binary::put_u32(out, kReferenceKind);
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.dim));
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.context_window));
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.layers));
  binary::put_u64(out, cfg.seed);
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.vocab.size()));
  for (const auto& token : cfg.vocab.tokens()) binary::put_string(out, token);
  put_vector(out, ref->parameters());
}

Encoder read_encoder(binary::Reader& in) {
  const auto kind = in.u32();
  if (kind == kPrecomputedKind) return load_precomputed(in.string());
  if (kind != kReferenceKind) throw Error(Errc::FormatError, "unknown encoder kind in checkpoint");
  EncoderConfig cfg;
  cfg.dim = in.u32();
  cfg.context_window = in.u32();
  cfg.layers = in.u32();
  cfg.seed = in.u64();
  const auto vocab_size = in.u32();
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vocab_size; ++i) tokens.push_back(in.string());
  if (tokens.empty() || tokens.front() != Vocabulary::kUnknown) {
    throw Error(Errc::FormatError, "checkpoint vocabulary must start with the unknown token");
  }
  cfg.vocab = Vocabulary(std::span(tokens).subspan(1));
  if (cfg.vocab.size() != tokens.size()) throw Error(Errc::FormatError, "duplicate vocabulary entry");
  return ReferenceEncoder(std::move(cfg), read_vector(in));
}

}  // namespace

std::string serialize_checkpoint(const SourceModels& models, std::string_view tade_path) {
  std::string out(kMagic);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_string(out, scheme_name(models.detector.scheme));
  put_encoder(out, models.detector.encoder, tade_path);
  put_encoder(out, models.type_encoder, tade_path);
  const auto& head = models.detector.head;
  binary::put_u32(out, static_cast<std::uint32_t>(head.classes()));
  binary::put_u32(out, static_cast<std::uint32_t>(head.dim()));
  binary::put_f64(out, head.dropout_rate());
  put_vector(out, head.parameters());
  binary::put_u32(out, models.names.random ? 1 : 0);
  binary::put_u64(out, models.names.seed);
  binary::put_string(out, models.names.map.to_json());
  return out;
}

SourceModels parse_checkpoint(std::string_view bytes) {
  binary::Reader in(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
  if (in.bytes(4) != kMagic) throw Error(Errc::FormatError, "not a checkpoint (bad magic)");
  if (const auto v = in.u32(); v != kCheckpointVersion) {
    throw Error(Errc::FormatError, "unsupported checkpoint version " + std::to_string(v));
  }
  const auto scheme = parse_scheme(in.string());
  Encoder span_encoder = read_encoder(in);
  Encoder type_encoder = read_encoder(in);
  const auto classes = in.u32();
  const auto dim = in.u32();
  const double dropout = in.f64();
  SpanHead head(classes, dim, dropout);
  Vector head_params = read_vector(in);
  if (head_params.size() != head.parameters().size()) {
    throw Error(Errc::FormatError, "span head parameter count mismatch");
  }
  head.parameters() = std::move(head_params);
  if (classes != detection_classes(scheme).size() || dim != span_encoder.dim()) {
    throw Error(Errc::FormatError, "span head shape does not match scheme and encoder");
  }
  TypeNames names;
  names.random = in.u32() != 0;
  names.seed = in.u64();
  names.map = TypeNameMap::from_json(in.string());
  if (!in.done()) throw Error(Errc::FormatError, "trailing bytes after checkpoint");
  return SourceModels{SpanDetector{std::move(span_encoder), std::move(head), scheme},
                      std::move(type_encoder), std::move(names)};
}

void save_checkpoint(const SourceModels& models, const std::filesystem::path& path,
                     std::string_view tade_path) {
  const auto bytes = serialize_checkpoint(models, tade_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

SourceModels load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

SourceModels round_trip_precision(const SourceModels& models) {
  SourceModels out = models;
  auto round = [](Vector& v) { v = v.cast<float>().cast<double>(); };
  if (out.detector.encoder.trainable()) round(out.detector.encoder.reference().parameters());
  if (out.type_encoder.trainable()) round(out.type_encoder.reference().parameters());
  round(out.detector.head.parameters());
  return out;
}

}  // namespace tadner
