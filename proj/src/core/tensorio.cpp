#include "tensorio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"

namespace braintools {

void FeatureSeries::validate() const {
  if (data.rows() < 1 || data.cols() < 1) throw InputError("FeatureSeries '" + name + "' is empty");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw InputError("FeatureSeries '" + name + "' has non-positive sample rate");
  if (!std::isfinite(t0_s)) throw InputError("FeatureSeries '" + name + "' has non-finite t0");
  if (!data.allFinite()) throw DataError("FeatureSeries '" + name + "' contains non-finite values");
}

void FmriRun::validate() const {
  if (data.rows() < 1 || data.cols() < 1) throw InputError("FmriRun '" + story_id + "' is empty");
  if (!(tr_s > 0.0)) throw InputError("FmriRun '" + story_id + "' has non-positive TR");
  if (!data.allFinite()) throw DataError("FmriRun '" + story_id + "' contains non-finite values");
}

void RoiMask::validate(std::size_t n_voxels) const {
  for (std::size_t i = 0; i < voxel_indices.size(); ++i) {
    if (i > 0 && voxel_indices[i] <= voxel_indices[i - 1])
      throw RoiError("ROI '" + label + "': voxel indices must be strictly increasing");
    if (voxel_indices[i] >= n_voxels)
      throw RoiError("ROI '" + label + "': voxel index " + std::to_string(voxel_indices[i]) + " out of range (" +
                     std::to_string(n_voxels) + " voxels)");
  }
}

std::size_t count_true(const VoxelMask& mask) {
  std::size_t n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

std::vector<std::size_t> mask_indices(const VoxelMask& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

}  // namespace braintools

namespace braintools::io {

using nlohmann::json;

namespace {

template <typename T>
T read_le(const std::byte* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::string index_string(const std::vector<std::size_t>& idx) {
  std::string s = "(";
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i]);
  return s + ")";
}

json parse_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

Tensor load_tensor(const fs::path& path) {
  const npy::Array raw = npy::read(path);
  if (raw.shape.empty() || raw.shape.size() > 2)
    throw FormatError(path.string() + ": expected a 1-D or 2-D tensor, got rank " + std::to_string(raw.shape.size()));

  const std::size_t rows = raw.shape[0];
  const std::size_t cols = raw.shape.size() == 2 ? raw.shape[1] : 1;
  const std::size_t n = rows * cols;
  std::vector<double> flat(n);
  const std::byte* p = raw.bytes.data();
  for (std::size_t i = 0; i < n; ++i) {
    switch (raw.dtype) {
      case npy::DType::Float64: flat[i] = read_le<double>(p + 8 * i); break;
      case npy::DType::Float32: flat[i] = static_cast<double>(read_le<float>(p + 4 * i)); break;
      case npy::DType::Int64: flat[i] = static_cast<double>(read_le<std::int64_t>(p + 8 * i)); break;
      case npy::DType::Bool: flat[i] = p[i] != std::byte{0} ? 1.0 : 0.0; break;
    }
  }

  Tensor t;
  t.shape = raw.shape;
  t.source_dtype = raw.dtype;
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < n; ++i) {
    // Map storage order to (row, col); report offending indices in C order.
    std::size_t r, c;
    if (raw.fortran_order) {
      r = i % rows;
      c = i / rows;
    } else {
      r = i / cols;
      c = i % cols;
    }
    if (!std::isfinite(flat[i])) {
      std::vector<std::size_t> idx = raw.shape.size() == 2 ? std::vector<std::size_t>{r, c} : std::vector<std::size_t>{r};
      throw DataError(path.string() + ": non-finite value at index " + index_string(idx), idx);
    }
    t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[i];
  }
  return t;
}

void save_tensor(const fs::path& path, const Tensor& tensor) {
  const auto rows = static_cast<std::size_t>(tensor.values.rows());
  const auto cols = static_cast<std::size_t>(tensor.values.cols());
  npy::Array raw;
  raw.dtype = npy::DType::Float64;
  if (tensor.shape.size() == 1) {
    if (cols != 1) throw InputError("1-D tensor must be held as a column");
    raw.shape = {rows};
  } else {
    raw.shape = {rows, cols};
  }
  raw.bytes.resize(rows * cols * 8);
  std::size_t k = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c, ++k) {
      const double v = tensor.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      std::memcpy(raw.bytes.data() + 8 * k, &v, 8);
    }
  npy::write(path, raw);
}

Matrix load_matrix(const fs::path& path) { return load_tensor(path).values; }

Vector load_vector(const fs::path& path) {
  Tensor t = load_tensor(path);
  if (t.values.cols() == 1) return t.values.col(0);
  if (t.values.rows() == 1) return t.values.row(0).transpose();
  throw FormatError(path.string() + ": expected a vector");
}

VoxelMask load_mask(const fs::path& path) {
  const Vector v = load_vector(path);
  VoxelMask mask(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) mask[static_cast<std::size_t>(i)] = v[i] != 0.0;
  return mask;
}

std::vector<std::int64_t> load_indices(const fs::path& path) {
  const Vector v = load_vector(path);
  std::vector<std::int64_t> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v[i]);
  return out;
}

void save_matrix(const fs::path& path, const Matrix& m) {
  save_tensor(path, Tensor{{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                           npy::DType::Float64, m});
}

void save_vector(const fs::path& path, const Vector& v) {
  save_tensor(path, Tensor{{static_cast<std::size_t>(v.size())}, npy::DType::Float64, Matrix(v)});
}

void save_mask(const fs::path& path, const VoxelMask& mask) {
  npy::Array raw;
  raw.dtype = npy::DType::Bool;
  raw.shape = {mask.size()};
  raw.bytes.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) raw.bytes[i] = mask[i] ? std::byte{1} : std::byte{0};
  npy::write(path, raw);
}

void save_indices(const fs::path& path, const std::vector<std::size_t>& indices) {
  npy::Array raw;
  raw.dtype = npy::DType::Int64;
  raw.shape = {indices.size()};
  raw.bytes.resize(indices.size() * 8);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto v = static_cast<std::int64_t>(indices[i]);
    std::memcpy(raw.bytes.data() + 8 * i, &v, 8);
  }
  npy::write(path, raw);
}

fs::path sidecar_path(const fs::path& npy_path) {
  fs::path p = npy_path;
  p.replace_extension(".json");
  return p;
}

FeatureSeries load_feature_series(const fs::path& path, double default_rate_hz, double default_t0_s) {
  FeatureSeries s;
  s.data = load_matrix(path);
  s.sample_rate_hz = default_rate_hz;
  s.t0_s = default_t0_s;
  s.name = path.stem().string();
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    const json j = parse_json_file(side, "sidecar");
    s.sample_rate_hz = j.value("sample_rate_hz", default_rate_hz);
    s.t0_s = j.value("t0_s", default_t0_s);
    s.name = j.value("name", s.name);
  }
  s.validate();
  return s;
}

void save_feature_series(const fs::path& path, const FeatureSeries& series) {
  save_matrix(path, series.data);
  json j;
  j["sample_rate_hz"] = series.sample_rate_hz;
  j["t0_s"] = series.t0_s;
  j["name"] = series.name;
  write_text(sidecar_path(path), j.dump(2) + "\n");
}

FmriRun load_fmri_run(const fs::path& path, double tr_s, std::string story_id, std::string participant_id,
                      int repeat_index) {
  FmriRun run;
  run.data = load_matrix(path);
  run.tr_s = tr_s;
  run.story_id = story_id.empty() ? path.stem().string() : std::move(story_id);
  run.participant_id = std::move(participant_id);
  run.repeat_index = repeat_index;
  run.validate();
  return run;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ManifestError("unknown split '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "";
}

std::size_t DatasetManifest::count(Split s) const {
  std::size_t n = 0;
  for (const auto& st : stories) n += st.split == s ? 1 : 0;
  return n;
}

std::vector<const StoryEntry*> DatasetManifest::stories_in(Split s) const {
  std::vector<const StoryEntry*> out;
  for (const auto& st : stories)
    if (st.split == s) out.push_back(&st);
  return out;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
    text.replace(pos, token.size(), value);
  return text;
}

DatasetManifest load_manifest(const fs::path& path, const ManifestOptions& options) {
  const json j = parse_json_file(path, "manifest");
  DatasetManifest m;
  m.base_dir = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : m.base_dir / p; };
  try {
    m.participant_id = j.at("participant_id").get<std::string>();
    m.tr_s = j.value("tr_s", kDefaultTr);
    for (const auto& s : j.at("stories")) {
      StoryEntry e;
      e.story_id = s.at("story_id").get<std::string>();
      e.features = resolve(s.at("features").get<std::string>());
      e.fmri = resolve(s.at("fmri").get<std::string>());
      e.split = parse_split(s.at("split").get<std::string>());
      m.stories.push_back(std::move(e));
    }
    if (j.contains("repeats"))
      for (const auto& r : j.at("repeats")) m.repeats.push_back(resolve(r.get<std::string>()));
  } catch (const json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }

  if (!(m.tr_s > 0.0)) throw ManifestError(path.string() + ": tr_s must be positive");
  if (m.stories.empty()) throw ManifestError(path.string() + ": stories list is empty");
  std::set<std::string> seen;
  for (const auto& s : m.stories) {
    if (!seen.insert(s.story_id).second)
      throw ManifestError(path.string() + ": story '" + s.story_id + "' listed more than once");
  }
  if (options.require_test && m.count(Split::Test) == 0)
    throw ManifestError(path.string() + ": test split is empty");
  if (options.check_files) {
    auto check = [&](const fs::path& p) {
      if (!fs::is_regular_file(p)) throw ManifestError(path.string() + ": referenced file missing: " + p.string());
    };
    for (const auto& s : m.stories) {
      check(options.layer.empty() ? s.features : fs::path(substitute(s.features.string(), "layer", options.layer)));
      check(s.fmri);
    }
    for (const auto& r : m.repeats) check(r);
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  json j;
  j["participant_id"] = manifest.participant_id;
  j["tr_s"] = manifest.tr_s;
  auto rel = [&](const fs::path& p) {
    return p.is_absolute() ? fs::relative(p, path.parent_path()).generic_string() : p.generic_string();
  };
  j["stories"] = json::array();
  for (const auto& s : manifest.stories)
    j["stories"].push_back(
        {{"story_id", s.story_id}, {"features", rel(s.features)}, {"fmri", rel(s.fmri)}, {"split", to_string(s.split)}});
  j["repeats"] = json::array();
  for (const auto& r : manifest.repeats) j["repeats"].push_back(rel(r));
  write_text(path, j.dump(2) + "\n");
}

RoiMask load_roi(const fs::path& path) {
  const json j = parse_json_file(path, "ROI file");
  RoiMask roi;
  try {
    roi.label = j.at("label").get<std::string>();
    for (const auto& v : j.at("voxels")) {
      const auto idx = v.get<std::int64_t>();
      if (idx < 0) throw RoiError(path.string() + ": negative voxel index");
      roi.voxel_indices.push_back(static_cast<std::size_t>(idx));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (std::size_t i = 1; i < roi.voxel_indices.size(); ++i)
    if (roi.voxel_indices[i] <= roi.voxel_indices[i - 1])
      throw RoiError(path.string() + ": voxel indices must be strictly increasing");
  return roi;
}

void save_roi(const fs::path& path, const RoiMask& roi) {
  json j;
  j["label"] = roi.label;
  j["voxels"] = roi.voxel_indices;
  write_text(path, j.dump() + "\n");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace braintools::io
