#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "collagen/image.hpp"

namespace collagen {

using Bytes = std::vector<std::uint8_t>;

// PNG codec. Decoding throws Error on truncated or malformed input.
Bytes encode_png(const RgbImage& image);
Bytes encode_png(const RgbaImage& image);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
RgbaImage decode_png_rgba(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a uniquely named sibling temp file followed by rename(2), so
/// readers observe either the old content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace collagen
