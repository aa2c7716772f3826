#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace prosody::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a torn file. The temp file is removed if anything fails.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);
// The views would dangle.
std::vector<std::string_view> split_lines(std::string&& text) = delete;

} // namespace prosody::io
