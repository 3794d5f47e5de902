#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emasched {

/// Row-oriented CSV table. Fields are split on commas; quoting is not supported
/// because every file this project reads or writes is numeric or identifier-only.
struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column index by name; throws naming the file when absent.
  std::size_t column(std::string_view name) const;
  /// "file:line" for error messages.
  std::string where(std::size_t row) const;
};

CsvTable read_csv(const std::filesystem::path& path);
/// Throws unless the header matches `expected` exactly.
void require_header(const CsvTable& t, const std::vector<std::string>& expected);

std::vector<std::string> split_commas(std::string_view line);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& where);
std::int64_t parse_int(std::string_view text, const std::string& where);
std::optional<double> parse_optional_double(std::string_view text, const std::string& where);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string hash_file(const std::filesystem::path& path);

}  // namespace emasched
