#pragma once

// Minimal NPY v1.0 reader/writer. Little-endian float32, float64, int64 and
// bool payloads; anything else is rejected with FormatError.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace braintools::npy {

enum class DType { Float32, Float64, Int64, Bool };

std::size_t item_size(DType dtype) noexcept;
std::string descr(DType dtype);

struct Array {
  DType dtype = DType::Float64;
  std::vector<std::size_t> shape;
  bool fortran_order = false;
  std::vector<std::byte> bytes;

  std::size_t count() const noexcept;
};

// Canonical header exactly as numpy writes it: dict text padded with spaces
// and a trailing newline so that the preamble length is a multiple of 64.
std::string make_header(DType dtype, std::span<const std::size_t> shape, bool fortran_order);

Array parse(std::span<const std::byte> file_bytes);
Array read(const std::filesystem::path& path);

std::vector<std::byte> serialize(const Array& array);
void write(const std::filesystem::path& path, const Array& array);

}  // namespace braintools::npy
