#include "csv.hpp"

#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "errors.hpp"
#include "tensorio.hpp"

namespace braintools::csv {

std::optional<std::size_t> Table::find(const std::string& column) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) return i;
  return std::nullopt;
}

std::size_t Table::require(const std::string& column) const {
  if (auto i = find(column)) return *i;
  throw FormatError((source.empty() ? std::string("csv") : source) + ": missing column '" + column + "'");
}

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text, const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw FormatError(source + ": unterminated quote");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string quote(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

Table read(const std::filesystem::path& path) {
  const std::string source = path.string();
  auto records = parse_records(io::read_text(path), source);
  if (records.empty()) throw FormatError(source + ": empty CSV");
  Table t;
  t.source = source;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw FormatError(source + ": row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                        " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

std::string serialize(const Table& table) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << quote(r[i]);
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out.str();
}

void write(const std::filesystem::path& path, const Table& table) { io::write_text(path, serialize(table)); }

std::string format(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

std::string format(std::optional<double> value) { return value ? format(*value) : std::string(); }

double parse_double(const std::string& field, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size())
    throw FormatError(context + ": not a number: '" + field + "'");
  return v;
}

}  // namespace braintools::csv
