#include "paired.hpp"

#include <algorithm>

#include "errors.hpp"
#include "json.hpp"

namespace braintools::io {

using nlohmann::json;

void PairedDir::validate() const {
  Eigen::Index total = 0;
  for (const auto& s : stories) total += s.n_trs;
  if (stories.empty()) throw FormatError("paired dataset lists no stories");
  if (X.rows() != total || Y.rows() != total || Xds.rows() != total || tr_times_s.size() != total)
    throw FormatError("paired dataset rows do not match story lengths (" + std::to_string(total) + ")");
  if (X.cols() != Xds.cols() * static_cast<Eigen::Index>(pairing.fir_delays.size()))
    throw FormatError("paired dataset X width does not match Xds width times delays");
}

RowSelection select_rows(const PairedDir& dir, std::span<const Split> splits) {
  RowSelection sel;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  Eigen::Index offset = 0, total = 0;
  for (const auto& s : dir.stories) {
    if (std::find(splits.begin(), splits.end(), s.split) != splits.end()) {
      blocks.emplace_back(offset, s.n_trs);
      sel.story_lengths.push_back(s.n_trs);
      sel.story_ids.push_back(s.story_id);
      total += s.n_trs;
    }
    offset += s.n_trs;
  }
  sel.X.resize(total, dir.X.cols());
  sel.Y.resize(total, dir.Y.cols());
  sel.Xds.resize(total, dir.Xds.cols());
  Eigen::Index row = 0;
  for (const auto& [begin, len] : blocks) {
    sel.X.middleRows(row, len) = dir.X.middleRows(begin, len);
    sel.Y.middleRows(row, len) = dir.Y.middleRows(begin, len);
    sel.Xds.middleRows(row, len) = dir.Xds.middleRows(begin, len);
    row += len;
  }
  return sel;
}

Matrix gather_rows(const Matrix& m, std::span<const PairedStory> stories, std::span<const Split> splits) {
  Eigen::Index offset = 0, total = 0;
  for (const auto& s : stories) {
    if (std::find(splits.begin(), splits.end(), s.split) != splits.end()) total += s.n_trs;
    offset += s.n_trs;
  }
  if (offset != m.rows()) throw InputError("gather_rows: story lengths do not match the rows");
  Matrix out(total, m.cols());
  Eigen::Index row = 0;
  offset = 0;
  for (const auto& s : stories) {
    if (std::find(splits.begin(), splits.end(), s.split) != splits.end()) {
      out.middleRows(row, s.n_trs) = m.middleRows(offset, s.n_trs);
      row += s.n_trs;
    }
    offset += s.n_trs;
  }
  return out;
}

PairedDir concat_paired(std::span<const pairing::PairedDataset> parts, std::span<const PairedStory> stories,
                        const pairing::PairingConfig& cfg, std::string layer) {
  if (parts.size() != stories.size() || parts.empty()) throw InputError("concat_paired: parts and stories differ");
  PairedDir out;
  out.pairing = cfg;
  out.layer = std::move(layer);
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.X.rows();
  out.X.resize(total, parts.front().X.cols());
  out.Y.resize(total, parts.front().Y.cols());
  out.Xds.resize(total, parts.front().downsampled.cols());
  out.tr_times_s.resize(total);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (p.X.cols() != out.X.cols() || p.Y.cols() != out.Y.cols())
      throw InputError("story '" + stories[k].story_id + "' has a different feature or voxel count");
    const Eigen::Index n = p.X.rows();
    out.X.middleRows(row, n) = p.X;
    out.Y.middleRows(row, n) = p.Y;
    out.Xds.middleRows(row, n) = p.downsampled;
    out.tr_times_s.segment(row, n) = p.tr_times_s;
    PairedStory s = stories[k];
    s.n_trs = n;
    out.stories.push_back(std::move(s));
    row += n;
  }
  return out;
}

Matrix fir_by_story(const Matrix& xds, std::span<const Eigen::Index> story_lengths, std::span<const int> delays) {
  Matrix out(xds.rows(), xds.cols() * static_cast<Eigen::Index>(delays.size()));
  Eigen::Index row = 0;
  for (const Eigen::Index n : story_lengths) {
    out.middleRows(row, n) = pairing::fir_expand(xds.middleRows(row, n), delays);
    row += n;
  }
  if (row != xds.rows()) throw InputError("fir_by_story: story lengths do not cover the rows");
  return out;
}

namespace {

json pairing_json(const pairing::PairingConfig& cfg) {
  return {{"window_s", cfg.window_s},
          {"stride_s", cfg.stride_s},
          {"tr_s", cfg.tr_s},
          {"lanczos_lobes", cfg.lanczos_lobes},
          {"fir_delays", cfg.fir_delays}};
}

pairing::PairingConfig pairing_parse(const json& j) {
  pairing::PairingConfig cfg;
  cfg.window_s = j.value("window_s", cfg.window_s);
  cfg.stride_s = j.value("stride_s", cfg.stride_s);
  cfg.tr_s = j.value("tr_s", cfg.tr_s);
  cfg.lanczos_lobes = j.value("lanczos_lobes", cfg.lanczos_lobes);
  cfg.fir_delays = j.value("fir_delays", cfg.fir_delays);
  cfg.validate();
  return cfg;
}

}  // namespace

std::string pairing_to_json(const pairing::PairingConfig& cfg) { return pairing_json(cfg).dump(2) + "\n"; }

pairing::PairingConfig pairing_from_json(const std::string& text) {
  try {
    return pairing_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("pairing config: ") + e.what());
  }
}

void save_paired(const fs::path& dir, const PairedDir& paired) {
  paired.validate();
  save_matrix(dir / "X.npy", paired.X);
  save_matrix(dir / "Y.npy", paired.Y);
  save_matrix(dir / "Xds.npy", paired.Xds);
  save_vector(dir / "tr_times.npy", paired.tr_times_s);
  json stories = json::array();
  for (const auto& s : paired.stories)
    stories.push_back({{"story_id", s.story_id}, {"split", to_string(s.split)}, {"n_trs", s.n_trs}});
  json meta{{"stories", stories}, {"pairing", pairing_json(paired.pairing)}, {"layer", paired.layer}};
  write_text(dir / "paired.json", meta.dump(2) + "\n");
}

bool paired_exists(const fs::path& dir) {
  for (const char* f : {"X.npy", "Y.npy", "Xds.npy", "tr_times.npy", "paired.json"})
    if (!fs::exists(dir / f)) return false;
  return true;
}

PairedDir load_paired(const fs::path& dir) {
  if (!fs::exists(dir / "paired.json")) throw IoError("no paired dataset in " + dir.string());
  PairedDir p;
  try {
    const json meta = json::parse(read_text(dir / "paired.json"));
    for (const auto& s : meta.at("stories"))
      p.stories.push_back({s.at("story_id").get<std::string>(), parse_split(s.at("split").get<std::string>()),
                           s.at("n_trs").get<Eigen::Index>()});
    p.pairing = pairing_parse(meta.value("pairing", json::object()));
    p.layer = meta.value("layer", std::string());
  } catch (const json::exception& e) {
    throw FormatError((dir / "paired.json").string() + ": " + e.what());
  }
  p.X = load_matrix(dir / "X.npy");
  p.Y = load_matrix(dir / "Y.npy");
  p.Xds = load_matrix(dir / "Xds.npy");
  p.tr_times_s = load_vector(dir / "tr_times.npy");
  p.validate();
  return p;
}

}  // namespace braintools::io
