#include "tadner/tade.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>

#include "tadner/binary_io.hpp"
#include "tadner/corpus.hpp"
#include "tadner/errors.hpp"

namespace tadner {

std::string sha1_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw Error(Errc::IoError, "SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char byte = digest[i];
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0xF]);
  }
  return out;
}

std::string sentence_key(std::span<const std::string> tokens) {
  return "sent:" + sha1_hex(join_words(tokens));
}

std::string phrase_key(std::span<const std::string> tokens) {
  return "phrase:" + join_words(tokens);
}

TadeStore parse_tade(std::span<const unsigned char> bytes) {
  binary::Reader in(bytes);
  if (in.remaining() < 4 || in.bytes(4) != "TADE") {
    throw Error(Errc::FormatError, "missing TADE magic");
  }
  TadeStore store;
  const std::uint32_t version = in.u32();
  if (version != kTadeVersion) {
    throw Error(Errc::FormatError, "unsupported TADE version " + std::to_string(version));
  }
  store.dim = in.u32();
  if (store.dim == 0) throw Error(Errc::FormatError, "TADE dim is zero");
  while (!in.done()) {
    std::string key = in.string();
    const std::uint32_t rows = in.u32();
    if (rows == 0) throw Error(Errc::FormatError, "record '" + key + "' has no rows");
    if (in.remaining() / 4 / store.dim < rows) {
      throw Error(Errc::FormatError, "record '" + key + "' is truncated");
    }
    Eigen::MatrixXd values(rows, store.dim);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < store.dim; ++c) {
        const float v = in.f32();
        if (!std::isfinite(v)) throw Error(Errc::FormatError, "non-finite value in '" + key + "'");
        values(r, c) = v;
      }
    }
    if (!store.records.emplace(std::move(key), std::move(values)).second) {
      throw Error(Errc::FormatError, "duplicate TADE key");
    }
  }
  return store;
}

TadeStore read_tade(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_tade(bytes);
}

std::string serialize_tade(const TadeStore& store) {
  std::string out = "TADE";
  binary::put_u32(out, kTadeVersion);
  binary::put_u32(out, store.dim);
  for (const auto& [key, values] : store.records) {
    if (values.cols() != static_cast<Eigen::Index>(store.dim)) {
      throw Error(Errc::FormatError, "record '" + key + "' width differs from dim");
    }
    binary::put_string(out, key);
    binary::put_u32(out, static_cast<std::uint32_t>(values.rows()));
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      for (Eigen::Index c = 0; c < values.cols(); ++c) {
        binary::put_f32(out, static_cast<float>(values(r, c)));
      }
    }
  }
  return out;
}

void write_tade(const TadeStore& store, const std::filesystem::path& path) {
  const std::string bytes = serialize_tade(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tadner
