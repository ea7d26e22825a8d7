#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace zeroleaf::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over path.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace zeroleaf::io
