#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace l1trace {

// Collapses every run of ASCII whitespace to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string ascii_lower(std::string_view text);

std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace l1trace
