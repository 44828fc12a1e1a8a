#pragma once

// Synthetic fMRI-like datasets with known signal composition.
//
// Each story has latent TR-rate Gaussian sources S (semantic) and L
// (low-level), linearly interpolated onto the stimulus sample grid. The model
// representation stream is [S, L A] for a fixed random mixing A, so a linear
// map from the low-level feature recovers the L part exactly. Brain responses
// are built from the same pairing path the pipeline uses:
//   signal = fir(lanczos(S)) w_sem + fir(lanczos(L)) w_low
//   y_r    = signal + noise_r,   Var(noise) = Var(signal) / snr
// with w_sem, w_low scaled per voxel so that the two parts have variance
// 1 - share and share. The analytic ceiling is sqrt(snr / (1 + snr)).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pairing.hpp"
#include "tensorio.hpp"
#include "types.hpp"

namespace braintools::synth {

struct SynthSpec {
  Eigen::Index n_trs = 2000;  // total over stories
  Eigen::Index n_voxels = 200;
  Eigen::Index n_feature_dims = 8;  // semantic dimensions of the representation
  Eigen::Index n_lowlevel_dims = 4;
  double snr = 1.0;
  double lowlevel_share = 0.0;
  int n_repeats = 10;
  std::uint64_t seed = 0;
  int n_stories = 4;  // last story is test, the one before it val (when >= 3)
  int n_participants = 1;
  double feature_rate_hz = 10.0;
  pairing::PairingConfig pairing{};

  void validate() const;
};

SynthSpec spec_from_json(const std::string& json_text);
std::string spec_to_json(const SynthSpec& spec);

struct SynthStory {
  std::string story_id;
  io::Split split = io::Split::Train;
  FeatureSeries features;  // stimulus-rate representation stream
  FeatureSeries lowlevel;  // TR-rate low-level feature
  Matrix sem_design;       // fir(lanczos(S))
  Matrix low_design;       // fir(lanczos(L))
};

struct SynthParticipant {
  std::string participant_id;
  std::vector<FmriRun> runs;     // one per story; the test story run is repeat 0
  std::vector<FmriRun> repeats;  // repeats of the test story
  Matrix w_sem;                  // effective weights, see header comment
  Matrix w_low;
  Vector noise_sd;
  Vector nc_true;
};

struct SynthDataset {
  SynthSpec spec;
  std::vector<SynthStory> stories;
  std::vector<SynthParticipant> participants;

  std::size_t test_story() const;
};

SynthDataset generate(const SynthSpec& spec);

// Writes stimuli/, lowlevel/, rois/, <participant>/{manifest.json, fmri/,
// repeats/, truth/} and a ready-to-run config.json under `out`.
void write_dataset(const SynthDataset& data, const std::filesystem::path& out);

std::vector<RoiMask> default_rois(Eigen::Index n_voxels);

}  // namespace braintools::synth
