#include "tadner/encoder.hpp"

#include <cmath>

#include "tadner/corpus.hpp"
#include "tadner/errors.hpp"
#include "tadner/rng.hpp"

namespace tadner {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

constexpr double kNormEps = 1e-12;

// Initial spread of the mixing weights relative to 1/sqrt(fan_in).
constexpr double kMixInitScale = 0.5;

}  // namespace

Vocabulary::Vocabulary() { add(std::string(kUnknown)); }

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const auto& token : tokens) add(token);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

void EncoderConfig::validate() const {
  if (dim < 2) throw Error(Errc::InvalidConfig, "encoder dim must be at least 2");
  if (layers < 1) throw Error(Errc::InvalidConfig, "encoder needs at least one layer");
  if (vocab.size() < 1) throw Error(Errc::InvalidConfig, "empty vocabulary");
}

struct ReferenceEncoder::Activations {
  std::vector<std::size_t> ids;
  std::vector<Matrix> x;  // layers + 1 entries, N x d
  std::vector<Matrix> t;  // tanh outputs per layer, N x d
  Matrix s;               // squared final activations, N x d
  Vector norms;           // N
  Matrix u;               // N x d
};

ReferenceEncoder::ReferenceEncoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  build_layout();
  const std::size_t d = config_.dim;
  const std::size_t taps = 2 * config_.context_window + 1;
  Rng rng(config_.seed);
  params_.resize(static_cast<Eigen::Index>(layout_.back().offset + layout_.back().size));
  params_.setZero();
  const auto& emb = slice("embedding");
  const double emb_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < emb.size; ++i) params_[emb.offset + i] = rng.normal() * emb_scale;
  const double mix_scale = kMixInitScale / std::sqrt(static_cast<double>(d * taps));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const auto& w = slice("layer" + std::to_string(l) + ".weight");
    for (std::size_t i = 0; i < w.size; ++i) params_[w.offset + i] = rng.normal() * mix_scale;
  }
}

ReferenceEncoder::ReferenceEncoder(EncoderConfig config, Vector parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
  config_.validate();
  build_layout();
  const auto expected = layout_.back().offset + layout_.back().size;
  if (static_cast<std::size_t>(params_.size()) != expected) {
    throw Error(Errc::FormatError, "encoder parameter count " + std::to_string(params_.size()) +
                                       " does not match layout " + std::to_string(expected));
  }
  if (!params_.allFinite()) throw Error(Errc::FormatError, "non-finite encoder parameter");
}

void ReferenceEncoder::build_layout() {
  layout_.clear();
  const std::size_t d = config_.dim;
  const std::size_t taps = 2 * config_.context_window + 1;
  std::size_t offset = 0;
  auto push = [&](std::string name, std::size_t size) {
    layout_.push_back(ParamSlice{std::move(name), offset, size});
    offset += size;
  };
  push("embedding", config_.vocab.size() * d);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    push("layer" + std::to_string(l) + ".weight", taps * d * d);
    push("layer" + std::to_string(l) + ".bias", d);
  }
}

const ParamSlice& ReferenceEncoder::slice(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw Error(Errc::InvalidConfig, "no parameter slice named '" + std::string(name) + "'");
}

std::vector<std::size_t> ReferenceEncoder::token_ids(Tokens tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(config_.vocab.id(token));
  return ids;
}

ReferenceEncoder::Activations ReferenceEncoder::forward(const std::vector<std::size_t>& ids) const {
  if (ids.empty()) throw Error(Errc::LengthMismatch, "cannot encode an empty token sequence");
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto w = static_cast<Eigen::Index>(config_.context_window);
  const double* p = params_.data();

  Activations act;
  act.ids = ids;
  Matrix x0(n, d);
  ConstRowMap emb(p + slice("embedding").offset, static_cast<Eigen::Index>(config_.vocab.size()), d);
  for (Eigen::Index i = 0; i < n; ++i) x0.row(i) = emb.row(static_cast<Eigen::Index>(ids[i]));
  act.x.push_back(std::move(x0));

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const auto& ws = slice("layer" + std::to_string(l) + ".weight");
    const auto& bs = slice("layer" + std::to_string(l) + ".bias");
    Eigen::Map<const Eigen::RowVectorXd> bias(p + bs.offset, d);
    const Matrix& x = act.x.back();
    Matrix pre = bias.replicate(n, 1);
    for (Eigen::Index o = 0; o <= 2 * w; ++o) {
      ConstRowMap weight(p + ws.offset + static_cast<std::size_t>(o * d * d), d, d);
      const Eigen::Index shift = o - w;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = i + shift;
        if (j < 0 || j >= n) continue;
        pre.row(i).noalias() += x.row(j) * weight.transpose();
      }
    }
    Matrix t = pre.array().tanh().matrix();
    act.x.push_back(x + t);
    act.t.push_back(std::move(t));
  }

  const Matrix& z = act.x.back();
  act.s = z.cwiseAbs2();
  act.norms = (act.s.rowwise().squaredNorm().array() + kNormEps).sqrt().matrix();
  act.u = act.s.array().colwise() / act.norms.array();
  return act;
}

Matrix ReferenceEncoder::encode_sentence(Tokens tokens) const {
  return forward(token_ids(tokens)).u;
}

Vector ReferenceEncoder::encode_phrase(Tokens tokens) const {
  return encode_sentence(tokens).colwise().mean().transpose();
}

Vector ReferenceEncoder::backward(Tokens tokens, const Matrix& upstream) const {
  Vector grad = Vector::Zero(params_.size());
  backward_accumulate(tokens, upstream, grad);
  return grad;
}

void ReferenceEncoder::backward_accumulate(Tokens tokens, const Matrix& upstream,
                                           Vector& grad) const {
  const auto act = forward(token_ids(tokens));
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto w = static_cast<Eigen::Index>(config_.context_window);
  if (upstream.rows() != n || upstream.cols() != d) {
    throw Error(Errc::LengthMismatch, "upstream gradient shape does not match the encoding");
  }
  if (grad.size() != params_.size()) {
    throw Error(Errc::LengthMismatch, "gradient buffer size does not match the parameters");
  }
  const double* p = params_.data();
  double* g = grad.data();

  // Through the row normalization, then the elementwise square.
  const Matrix& z = act.x.back();
  Matrix dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = act.norms[i];
    const double proj = act.s.row(i).dot(upstream.row(i));
    const Eigen::RowVectorXd ds = upstream.row(i) / norm - act.s.row(i) * (proj / (norm * norm * norm));
    dx.row(i) = 2.0 * z.row(i).cwiseProduct(ds);
  }

  for (std::size_t l = config_.layers; l-- > 0;) {
    const auto& ws = slice("layer" + std::to_string(l) + ".weight");
    const auto& bs = slice("layer" + std::to_string(l) + ".bias");
    const Matrix& x = act.x[l];
    const Matrix dpre = (dx.array() * (1.0 - act.t[l].array().square())).matrix();
    Eigen::Map<Eigen::RowVectorXd>(g + bs.offset, d) += dpre.colwise().sum();
    Matrix dx_prev = dx;  // residual path
    for (Eigen::Index o = 0; o <= 2 * w; ++o) {
      const std::size_t off = ws.offset + static_cast<std::size_t>(o * d * d);
      ConstRowMap weight(p + off, d, d);
      RowMap dweight(g + off, d, d);
      const Eigen::Index shift = o - w;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = i + shift;
        if (j < 0 || j >= n) continue;
        dweight.noalias() += dpre.row(i).transpose() * x.row(j);
        dx_prev.row(j).noalias() += dpre.row(i) * weight;
      }
    }
    dx = std::move(dx_prev);
  }

  const auto& emb = slice("embedding");
  RowMap demb(g + emb.offset, static_cast<Eigen::Index>(config_.vocab.size()), d);
  for (Eigen::Index i = 0; i < n; ++i) demb.row(static_cast<Eigen::Index>(act.ids[i])) += dx.row(i);
}

void ReferenceEncoder::backward_phrase_accumulate(Tokens tokens, const Vector& upstream,
                                                  Vector& grad) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Matrix rows = (upstream / static_cast<double>(n)).transpose().replicate(n, 1);
  backward_accumulate(tokens, rows, grad);
}

Matrix ReferenceEncoder::jvp(Tokens tokens, const Vector& direction) const {
  if (direction.size() != params_.size()) {
    throw Error(Errc::LengthMismatch, "direction size does not match the parameters");
  }
  const auto act = forward(token_ids(tokens));
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto w = static_cast<Eigen::Index>(config_.context_window);
  const double* p = params_.data();
  const double* v = direction.data();

  const auto& emb = slice("embedding");
  ConstRowMap vemb(v + emb.offset, static_cast<Eigen::Index>(config_.vocab.size()), d);
  Matrix dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) dx.row(i) = vemb.row(static_cast<Eigen::Index>(act.ids[i]));

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const auto& ws = slice("layer" + std::to_string(l) + ".weight");
    const auto& bs = slice("layer" + std::to_string(l) + ".bias");
    const Matrix& x = act.x[l];
    Matrix dpre = Eigen::Map<const Eigen::RowVectorXd>(v + bs.offset, d).replicate(n, 1);
    for (Eigen::Index o = 0; o <= 2 * w; ++o) {
      const std::size_t off = ws.offset + static_cast<std::size_t>(o * d * d);
      ConstRowMap weight(p + off, d, d);
      ConstRowMap vweight(v + off, d, d);
      const Eigen::Index shift = o - w;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = i + shift;
        if (j < 0 || j >= n) continue;
        dpre.row(i).noalias() += x.row(j) * vweight.transpose() + dx.row(j) * weight.transpose();
      }
    }
    dx += (dpre.array() * (1.0 - act.t[l].array().square())).matrix();
  }

  const Matrix& z = act.x.back();
  Matrix dh(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = act.norms[i];
    const Eigen::RowVectorXd ds = 2.0 * z.row(i).cwiseProduct(dx.row(i));
    const double proj = act.s.row(i).dot(ds);
    dh.row(i) = ds / norm - act.s.row(i) * (proj / (norm * norm * norm));
  }
  return dh;
}

PrecomputedEncoder::PrecomputedEncoder(std::shared_ptr<const TadeStore> store)
    : store_(std::move(store)) {
  if (!store_ || store_->dim == 0) throw Error(Errc::FormatError, "empty embedding store");
}

Matrix PrecomputedEncoder::encode_sentence(Tokens tokens) const {
  const auto key = sentence_key(tokens);
  auto it = store_->records.find(key);
  if (it == store_->records.end()) {
    throw Error(Errc::MissingKey, "no stored vectors for sentence '" + join_words(tokens) + "'");
  }
  if (it->second.rows() != static_cast<Eigen::Index>(tokens.size())) {
    throw Error(Errc::FormatError, "stored row count differs from token count for " + key);
  }
  return it->second;
}

Vector PrecomputedEncoder::encode_phrase(Tokens tokens) const {
  auto it = store_->records.find(phrase_key(tokens));
  if (it != store_->records.end()) return it->second.colwise().mean().transpose();
  it = store_->records.find(sentence_key(tokens));
  if (it != store_->records.end()) return it->second.colwise().mean().transpose();
  throw Error(Errc::MissingKey, "no stored vector for phrase '" + join_words(tokens) + "'");
}

PrecomputedEncoder load_precomputed(const std::filesystem::path& path) {
  return PrecomputedEncoder(std::make_shared<const TadeStore>(read_tade(path)));
}

std::size_t Encoder::dim() const {
  return std::visit([](const auto& e) { return e.dim(); }, impl_);
}

Matrix Encoder::encode_sentence(Tokens tokens) const {
  return std::visit([&](const auto& e) { return e.encode_sentence(tokens); }, impl_);
}

Vector Encoder::encode_phrase(Tokens tokens) const {
  return std::visit([&](const auto& e) { return e.encode_phrase(tokens); }, impl_);
}

Vector Encoder::encode_phrase(std::string_view text) const {
  const auto words = split_words(text);
  return encode_phrase(Tokens(words));
}

ReferenceEncoder& Encoder::reference() {
  if (auto* e = std::get_if<ReferenceEncoder>(&impl_)) return *e;
  throw Error(Errc::FrozenEncoder, "precomputed encoders have no trainable parameters");
}

const ReferenceEncoder& Encoder::reference() const {
  if (const auto* e = std::get_if<ReferenceEncoder>(&impl_)) return *e;
  throw Error(Errc::FrozenEncoder, "precomputed encoders have no trainable parameters");
}

std::size_t Encoder::parameter_count() const {
  if (const auto* e = maybe_reference()) return static_cast<std::size_t>(e->parameters().size());
  return 0;
}

void Encoder::backward_accumulate(Tokens tokens, const Matrix& upstream, Vector& grad) const {
  reference().backward_accumulate(tokens, upstream, grad);
}

void Encoder::backward_phrase_accumulate(Tokens tokens, const Vector& upstream,
                                         Vector& grad) const {
  reference().backward_phrase_accumulate(tokens, upstream, grad);
}

}  // namespace tadner
