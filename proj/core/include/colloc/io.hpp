#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace colloc {

/// Writes through a temporary sibling file and renames it into place, so an
/// interrupted write never leaves a partial file under the final name.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace colloc
