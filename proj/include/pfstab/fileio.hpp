#pragma once

#include <filesystem>
#include <string>

namespace pfstab {

/// Throws Error(MissingArtifact) if the file does not exist, Error(Io) on
/// read failure.
std::string read_text_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace pfstab
