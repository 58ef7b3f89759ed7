#pragma once

#include <filesystem>
#include <string>

namespace gaitlab {

/// Whole file as a string; throws Error when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over `path`, so readers never
/// observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace gaitlab
