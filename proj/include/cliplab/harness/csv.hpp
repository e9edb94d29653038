#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cliplab::harness {

/// 17 significant digits, so every double survives a text round trip.
std::string format_real(double v);

/// A header plus rows of already formatted cells. Column order is the header
/// order; rows must match its width.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double v) { return format_real(v); }
inline std::string cell(std::int64_t v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }
inline std::string cell(const char* v) { return v; }
inline std::string cell(std::string v) { return v; }

/// Reads a whole file; used for byte comparisons of emitted artifacts.
std::string read_file(const std::filesystem::path& path);

}  // namespace cliplab::harness
