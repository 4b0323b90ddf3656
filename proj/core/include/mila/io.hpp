#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mila {

/// Whole-file read; throws Error(code) naming the path on failure.
std::string read_text_file(const std::filesystem::path& path, const std::string& code = "CLI_IO");

/// Writes through `<path>.tmp` and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const std::string& code = "CLI_IO");

/// Drops leading `#` comment lines (provenance headers) from a JSON file body.
std::string_view strip_comment_lines(std::string_view text);

}  // namespace mila
