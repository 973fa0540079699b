#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

#include "argmine/layers.hpp"

namespace argmine {

/// Flat parameter file: magic "AMPARAM1", count, then per tensor the name,
/// rank, extents and raw little-endian doubles. All integers are u64 LE.
void save_parameters(const nn::ParameterStore& store, const std::filesystem::path& file);

/// Loads values into an existing store. Names, order and shapes must match.
void load_parameters(nn::ParameterStore& store, const std::filesystem::path& file);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);

}  // namespace argmine
