#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace badfusion {

// Thin wrappers that raise Error(IoError) instead of returning stream state.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path,
                 std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
void copy_file_exact(const std::filesystem::path& from,
                     const std::filesystem::path& to);
void ensure_directory(const std::filesystem::path& dir);

}  // namespace badfusion
