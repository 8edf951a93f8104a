#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace kf {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
void append_text_file(const std::filesystem::path& path, std::string_view content);

// Recursive content hash of a directory tree: relative paths, entry kinds and
// file bytes, visited in sorted order. Entries whose first path component is in
// `skip_top_level` are ignored.
std::uint64_t tree_hash(const std::filesystem::path& root, std::initializer_list<std::string_view> skip_top_level = {});

// Creates a fresh empty directory under the system temp dir.
std::filesystem::path make_temp_dir(std::string_view prefix);

std::string basename_of(std::string_view path);

}  // namespace kf
