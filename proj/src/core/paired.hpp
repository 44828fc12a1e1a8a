#pragma once

// On-disk paired datasets: the directory exchanged between `pair`, `fit`,
// `residualize` and the external tuner.
//
//   X.npy         n_trs x (n_dims * n_delays) FIR design
//   Y.npy         n_trs x n_voxels
//   Xds.npy       n_trs x n_dims, before FIR expansion
//   tr_times.npy  TR centres within each story
//   paired.json   {"stories": [{"story_id", "split", "n_trs"}], "pairing": {...}, "layer"}
//
// Rows are the concatenation of the listed stories in order.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pairing.hpp"
#include "tensorio.hpp"

namespace braintools::io {

struct PairedStory {
  std::string story_id;
  Split split = Split::Train;
  Eigen::Index n_trs = 0;
};

struct PairedDir {
  Matrix X;
  Matrix Y;
  Matrix Xds;
  Vector tr_times_s;
  std::vector<PairedStory> stories;
  pairing::PairingConfig pairing;
  std::string layer;

  void validate() const;
};

// Rows of the stories whose split is in `splits`, with their lengths.
struct RowSelection {
  Matrix X;
  Matrix Y;
  Matrix Xds;
  std::vector<Eigen::Index> story_lengths;
  std::vector<std::string> story_ids;
};

RowSelection select_rows(const PairedDir& dir, std::span<const Split> splits);

// Rows of `m` (laid out like `stories`) whose story split is in `splits`.
Matrix gather_rows(const Matrix& m, std::span<const PairedStory> stories, std::span<const Split> splits);

// Concatenates per-story pairings.
PairedDir concat_paired(std::span<const pairing::PairedDataset> parts, std::span<const PairedStory> stories,
                        const pairing::PairingConfig& cfg, std::string layer = {});

// FIR-expands each story block of `xds` separately.
Matrix fir_by_story(const Matrix& xds, std::span<const Eigen::Index> story_lengths, std::span<const int> delays);

std::string pairing_to_json(const pairing::PairingConfig& cfg);
pairing::PairingConfig pairing_from_json(const std::string& text);

void save_paired(const fs::path& dir, const PairedDir& paired);
PairedDir load_paired(const fs::path& dir);
bool paired_exists(const fs::path& dir);

}  // namespace braintools::io
