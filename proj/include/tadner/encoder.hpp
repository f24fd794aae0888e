#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tadner/tade.hpp"

namespace tadner {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Tokens = std::span<const std::string>;

class Vocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";
  static constexpr std::size_t kUnknownId = 0;

  Vocabulary();
  explicit Vocabulary(std::span<const std::string> tokens);

  std::size_t add(const std::string& token);
  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct EncoderConfig {
  // Output width r.
  std::size_t dim = 16;
  Vocabulary vocab;
  std::size_t context_window = 1;
  std::size_t layers = 1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Trainable reference encoder. Each row of the output is computed as
//   x0_i   = E[token_i]
//   x{l+1} = x_l + tanh(b_l + sum_{o=-w..w} W_{l,o} x_l[i+o])     (zero padding)
//   s_i    = x_L[i] * x_L[i]                                      (elementwise)
//   h_i    = s_i / sqrt(|s_i|^2 + eps)
// Rows are non-negative unit vectors, so dot products between rows lie in [0, 1].
class ReferenceEncoder {
 public:
  explicit ReferenceEncoder(EncoderConfig config);
  ReferenceEncoder(EncoderConfig config, Vector parameters);

  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }

  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }
  const std::vector<ParamSlice>& layout() const { return layout_; }
  const ParamSlice& slice(std::string_view name) const;

  std::vector<std::size_t> token_ids(Tokens tokens) const;

  Matrix encode_sentence(Tokens tokens) const;
  Vector encode_phrase(Tokens tokens) const;

  // Gradient of <upstream, encode_sentence(tokens)> with respect to the parameters.
  Vector backward(Tokens tokens, const Matrix& upstream) const;
  void backward_accumulate(Tokens tokens, const Matrix& upstream, Vector& grad) const;
  // Same for encode_phrase with a vector upstream.
  void backward_phrase_accumulate(Tokens tokens, const Vector& upstream, Vector& grad) const;

  // Directional derivative of encode_sentence along a parameter direction.
  Matrix jvp(Tokens tokens, const Vector& direction) const;

 private:
  struct Activations;
  Activations forward(const std::vector<std::size_t>& ids) const;
  void build_layout();

  EncoderConfig config_;
  std::vector<ParamSlice> layout_;
  Vector params_;
};

// Read-only encoder backed by a TADE store.
class PrecomputedEncoder {
 public:
  explicit PrecomputedEncoder(std::shared_ptr<const TadeStore> store);

  std::size_t dim() const { return store_->dim; }
  Matrix encode_sentence(Tokens tokens) const;
  Vector encode_phrase(Tokens tokens) const;
  const TadeStore& store() const { return *store_; }

 private:
  std::shared_ptr<const TadeStore> store_;
};

PrecomputedEncoder load_precomputed(const std::filesystem::path& path);

// Value-semantic handle over either encoder implementation.
class Encoder {
 public:
  Encoder(ReferenceEncoder encoder) : impl_(std::move(encoder)) {}
  Encoder(PrecomputedEncoder encoder) : impl_(std::move(encoder)) {}

  std::size_t dim() const;
  Matrix encode_sentence(Tokens tokens) const;
  Vector encode_phrase(Tokens tokens) const;
  Vector encode_phrase(std::string_view text) const;

  bool trainable() const { return std::holds_alternative<ReferenceEncoder>(impl_); }
  // Throws FrozenEncoder for precomputed encoders.
  ReferenceEncoder& reference();
  const ReferenceEncoder& reference() const;
  const ReferenceEncoder* maybe_reference() const {
    return std::get_if<ReferenceEncoder>(&impl_);
  }

  std::size_t parameter_count() const;
  Vector zero_gradient() const { return Vector::Zero(static_cast<Eigen::Index>(parameter_count())); }
  void backward_accumulate(Tokens tokens, const Matrix& upstream, Vector& grad) const;
  void backward_phrase_accumulate(Tokens tokens, const Vector& upstream, Vector& grad) const;

 private:
  std::variant<ReferenceEncoder, PrecomputedEncoder> impl_;
};

}  // namespace tadner
