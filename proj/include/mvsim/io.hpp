#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mvsim {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Writes to a sibling temporary and renames into place, so readers never
/// observe a partial file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace mvsim
