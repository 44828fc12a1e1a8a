#pragma once

// Minimal CSV tables for reports: header row, comma separated, fields quoted
// when they contain a comma, quote or newline.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace braintools::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; nullopt when absent.
  std::optional<std::size_t> find(const std::string& column) const;
  // Throws FormatError naming the file when absent.
  std::size_t require(const std::string& column) const;
  std::string source;
};

Table read(const std::filesystem::path& path);
std::string serialize(const Table& table);
void write(const std::filesystem::path& path, const Table& table);

// Shortest round-trip decimal form ("%.17g" trimmed); empty for nullopt.
std::string format(double value);
std::string format(std::optional<double> value);
double parse_double(const std::string& field, const std::string& context);

}  // namespace braintools::csv
