#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tadner/pipeline.hpp"

namespace tadner {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary checkpoint of the source models: magic "TADC", u32 version, scheme,
// both encoders, the span head and the type-name settings. Parameters are
// stored as float32 little-endian. A precomputed encoder is stored by the path
// of its TADE file, which `tade_path` supplies.
std::string serialize_checkpoint(const SourceModels& models, std::string_view tade_path = {});
SourceModels parse_checkpoint(std::string_view bytes);

void save_checkpoint(const SourceModels& models, const std::filesystem::path& path,
                     std::string_view tade_path = {});
SourceModels load_checkpoint(const std::filesystem::path& path);

// Rounds every stored parameter through float32, as a save/load cycle would.
SourceModels round_trip_precision(const SourceModels& models);

}  // namespace tadner
