#include "npy.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace braintools::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Returns the raw text of the value following `'key':` in a python dict literal.
std::string_view dict_value(std::string_view dict, std::string_view key) {
  const std::string quoted_single = "'" + std::string(key) + "'";
  const std::string quoted_double = "\"" + std::string(key) + "\"";
  auto pos = dict.find(quoted_single);
  std::size_t key_len = quoted_single.size();
  if (pos == std::string_view::npos) {
    pos = dict.find(quoted_double);
    key_len = quoted_double.size();
  }
  if (pos == std::string_view::npos) throw FormatError("NPY header missing key '" + std::string(key) + "'");
  auto colon = dict.find(':', pos + key_len);
  if (colon == std::string_view::npos) throw FormatError("NPY header malformed near '" + std::string(key) + "'");
  auto rest = dict.substr(colon + 1);
  rest = trim(rest);
  std::size_t end = 0;
  if (!rest.empty() && rest.front() == '(') {
    end = rest.find(')');
    if (end == std::string_view::npos) throw FormatError("NPY header: unterminated shape tuple");
    ++end;
  } else if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
    end = rest.find(rest.front(), 1);
    if (end == std::string_view::npos) throw FormatError("NPY header: unterminated string");
    ++end;
  } else {
    end = rest.find_first_of(",}");
    if (end == std::string_view::npos) throw FormatError("NPY header: unterminated value");
  }
  return trim(rest.substr(0, end));
}

DType parse_descr(std::string_view quoted) {
  if (quoted.size() < 2) throw FormatError("NPY header: bad descr");
  auto d = quoted.substr(1, quoted.size() - 2);
  if (d == "<f8") return DType::Float64;
  if (d == "<f4") return DType::Float32;
  if (d == "<i8") return DType::Int64;
  if (d == "|b1") return DType::Bool;
  throw FormatError("unsupported NPY dtype '" + std::string(d) + "'");
}

std::vector<std::size_t> parse_shape(std::string_view tuple) {
  if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')')
    throw FormatError("NPY header: shape is not a tuple");
  std::vector<std::size_t> shape;
  auto body = tuple.substr(1, tuple.size() - 2);
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto comma = body.find(',', pos);
    auto item = trim(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (!item.empty()) {
      std::size_t value = 0;
      for (char c : item) {
        if (c == 'L') break;
        if (c < '0' || c > '9') throw FormatError("NPY header: bad shape entry '" + std::string(item) + "'");
        value = value * 10 + static_cast<std::size_t>(c - '0');
      }
      shape.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return shape;
}

}  // namespace

std::size_t item_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::Int64: return 8;
    case DType::Bool: return 1;
  }
  return 0;
}

std::string descr(DType dtype) {
  switch (dtype) {
    case DType::Float32: return "<f4";
    case DType::Float64: return "<f8";
    case DType::Int64: return "<i8";
    case DType::Bool: return "|b1";
  }
  return "";
}

std::size_t Array::count() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string make_header(DType dtype, std::span<const std::size_t> shape, bool fortran_order) {
  std::string dict = "{'descr': '" + descr(dtype) + "', 'fortran_order': " + (fortran_order ? "True" : "False") +
                     ", 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) dict += ", ";
    dict += std::to_string(shape[i]);
  }
  if (shape.size() == 1) dict += ",";
  dict += "), }";
  // magic(6) + version(2) + header_len(2) + dict + padding + '\n'
  const std::size_t unpadded = kMagicLen + 2 + 2 + dict.size() + 1;
  const std::size_t padding = (64 - unpadded % 64) % 64;
  dict.append(padding, ' ');
  dict.push_back('\n');
  return dict;
}

Array parse(std::span<const std::byte> file_bytes) {
  if (file_bytes.size() < 10 || std::memcmp(file_bytes.data(), kMagic, kMagicLen) != 0)
    throw FormatError("not an NPY file (bad magic)");
  const auto major = static_cast<unsigned>(file_bytes[6]);
  std::size_t header_len = 0;
  std::size_t preamble = 0;
  if (major == 1) {
    header_len = static_cast<std::size_t>(file_bytes[8]) | (static_cast<std::size_t>(file_bytes[9]) << 8);
    preamble = 10;
  } else if (major == 2 || major == 3) {
    if (file_bytes.size() < 12) throw FormatError("truncated NPY preamble");
    header_len = 0;
    for (int i = 0; i < 4; ++i) header_len |= static_cast<std::size_t>(file_bytes[8 + i]) << (8 * i);
    preamble = 12;
  } else {
    throw FormatError("unsupported NPY version " + std::to_string(major));
  }
  if (file_bytes.size() < preamble + header_len) throw FormatError("truncated NPY header");
  std::string_view dict(reinterpret_cast<const char*>(file_bytes.data() + preamble), header_len);
  dict = trim(dict);
  if (dict.empty() || dict.front() != '{' || dict.back() != '}') throw FormatError("NPY header is not a dict");

  Array out;
  out.dtype = parse_descr(dict_value(dict, "descr"));
  const auto fortran = dict_value(dict, "fortran_order");
  if (fortran == "True") {
    out.fortran_order = true;
  } else if (fortran != "False") {
    throw FormatError("NPY header: bad fortran_order");
  }
  out.shape = parse_shape(dict_value(dict, "shape"));

  const std::size_t payload = out.count() * item_size(out.dtype);
  const std::size_t offset = preamble + header_len;
  if (file_bytes.size() - offset != payload)
    throw FormatError("NPY payload size " + std::to_string(file_bytes.size() - offset) + " does not match header (" +
                      std::to_string(payload) + " bytes expected)");
  out.bytes.assign(file_bytes.begin() + static_cast<std::ptrdiff_t>(offset), file_bytes.end());
  return out;
}

Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse(std::as_bytes(std::span(raw)));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::byte> serialize(const Array& array) {
  if (array.bytes.size() != array.count() * item_size(array.dtype))
    throw InputError("NPY payload does not match shape");
  const std::string header = make_header(array.dtype, array.shape, array.fortran_order);
  if (header.size() > 0xFFFF) throw InputError("NPY header too long for format 1.0");
  std::vector<std::byte> out;
  out.reserve(10 + header.size() + array.bytes.size());
  for (std::size_t i = 0; i < kMagicLen; ++i) out.push_back(static_cast<std::byte>(kMagic[i]));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(header.size() & 0xFF));
  out.push_back(static_cast<std::byte>((header.size() >> 8) & 0xFF));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), array.bytes.begin(), array.bytes.end());
  return out;
}

void write(const std::filesystem::path& path, const Array& array) {
  const auto bytes = serialize(array);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace braintools::npy
