#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mincontrol::cli {

/// "%.17g", with "inf", "-inf" and "nan" spelled out.
std::string FormatNumber(double v);

/// Writes to `path`.tmp and renames over `path`, so readers never observe a
/// partial file.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& contents);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void AddRow(const std::vector<double>& row);
  std::size_t rows() const { return rows_.size(); }
  std::string ToString() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace mincontrol::cli
