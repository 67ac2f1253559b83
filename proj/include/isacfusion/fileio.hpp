#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace isac {

/// Write `content` to `path` via a temporary sibling file and rename, so a
/// reader never observes a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws ValidationError naming the path if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace isac
