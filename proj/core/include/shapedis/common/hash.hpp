#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace shapedis {

/// Lower-case hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents. Throws InputError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace shapedis
