#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace tadner {

// Precomputed-embedding store in the TADE binary layout:
//   "TADE" | u32 version (=1) | u32 dim | records...
//   record: u32 key_len | key bytes | u32 rows | rows*dim float32
// All integers and floats little-endian.
struct TadeStore {
  std::uint32_t dim = 0;
  std::map<std::string, Eigen::MatrixXd, std::less<>> records;
};

inline constexpr std::uint32_t kTadeVersion = 1;

TadeStore read_tade(const std::filesystem::path& path);
TadeStore parse_tade(std::span<const unsigned char> bytes);
void write_tade(const TadeStore& store, const std::filesystem::path& path);
std::string serialize_tade(const TadeStore& store);

std::string sha1_hex(std::string_view text);
// "sent:<sha1 of tokens joined by single spaces>"
std::string sentence_key(std::span<const std::string> tokens);
// "phrase:<tokens joined by single spaces>"
std::string phrase_key(std::span<const std::string> tokens);

}  // namespace tadner
