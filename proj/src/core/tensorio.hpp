#pragma once

// Interchange formats: NPY tensors, FeatureSeries sidecars, dataset manifests
// and ROI files. Everything is up-cast to float64 on load.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "npy.hpp"
#include "types.hpp"

namespace braintools::io {

namespace fs = std::filesystem;

// A 1-D or 2-D tensor as float64. 1-D tensors are held as an n x 1 matrix and
// remember their rank so that saving reproduces the original header.
struct Tensor {
  std::vector<std::size_t> shape;
  npy::DType source_dtype = npy::DType::Float64;
  Matrix values;
};

// Throws FormatError for malformed files or rank > 2, DataError (with the
// first offending C-order index) for NaN/Inf entries.
Tensor load_tensor(const fs::path& path);
void save_tensor(const fs::path& path, const Tensor& tensor);

Matrix load_matrix(const fs::path& path);
Vector load_vector(const fs::path& path);
VoxelMask load_mask(const fs::path& path);
std::vector<std::int64_t> load_indices(const fs::path& path);

void save_matrix(const fs::path& path, const Matrix& m);
void save_vector(const fs::path& path, const Vector& v);
void save_mask(const fs::path& path, const VoxelMask& mask);
void save_indices(const fs::path& path, const std::vector<std::size_t>& indices);

// FeatureSeries are stored as `<name>.npy` plus an optional `<name>.json`
// sidecar holding {"sample_rate_hz", "t0_s", "name"}.
fs::path sidecar_path(const fs::path& npy_path);
FeatureSeries load_feature_series(const fs::path& path, double default_rate_hz, double default_t0_s);
void save_feature_series(const fs::path& path, const FeatureSeries& series);

FmriRun load_fmri_run(const fs::path& path, double tr_s, std::string story_id = {}, std::string participant_id = {},
                      int repeat_index = 0);

enum class Split { Train, Val, Test };
Split parse_split(const std::string& s);
std::string to_string(Split s);

struct StoryEntry {
  std::string story_id;
  fs::path features;
  fs::path fmri;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::string participant_id;
  double tr_s = kDefaultTr;
  std::vector<StoryEntry> stories;
  std::vector<fs::path> repeats;
  fs::path base_dir;

  std::size_t count(Split s) const;
  std::vector<const StoryEntry*> stories_in(Split s) const;
};

struct ManifestOptions {
  bool require_test = true;
  // Stat-check referenced files. Feature paths may contain a `{layer}`
  // placeholder; they are checked after substituting `layer` when non-empty.
  bool check_files = true;
  std::string layer;
};

// Relative paths are resolved against the manifest's directory.
DatasetManifest load_manifest(const fs::path& path, const ManifestOptions& options = {});
void save_manifest(const fs::path& path, const DatasetManifest& manifest);

// Replaces `{layer}` / `{story}` placeholders.
std::string substitute(std::string text, const std::string& key, const std::string& value);

RoiMask load_roi(const fs::path& path);
void save_roi(const fs::path& path, const RoiMask& roi);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace braintools::io
