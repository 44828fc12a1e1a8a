#pragma once

// Config-driven orchestration of the measurement stages.
//
// Report tree under `out`:
//   <participant>/pair/<layer>/                paired dataset per layer
//   <participant>/ceiling/{nc,mask}.npy
//   <participant>/fit/<layer>/                 rho.npy, alpha.npy, per_voxel.csv, alignment.csv
//   <participant>/fit/alignment.csv            B averaged over layers
//   <participant>/residualize/<feature>/<layer>/
//   <participant>/impact/<feature>/<layer>/    fit on the residualized design
//   <participant>/impact/impact.csv
//   alignment.csv, impact.csv                  all participants
//   stats/significance.json
//   semphon/preference.csv
//   .stages/<stage>.done                       config hash of the completed stage
//   run.json                                   config hash, seed, stages, output digests
//   timings.json                               wall-clock per stage (not hashed)

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csv.hpp"
#include "encoding.hpp"
#include "paired.hpp"
#include "pairing.hpp"
#include "semphon.hpp"
#include "stats.hpp"

namespace braintools::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string> kStages{"pair", "ceiling", "fit", "residualize", "impact", "stats", "semphon"};

struct PipelineConfig {
  fs::path config_path;
  fs::path base_dir;  // relative paths resolve here
  std::vector<fs::path> manifests;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<std::string> layers;  // substituted for {layer} in feature paths; empty: one unnamed layer
  pairing::PairingConfig pairing;
  encoding::RidgeConfig ridge;
  double threshold = 0.4;
  std::vector<std::string> roi_globs;
  std::map<std::string, std::string> lowlevel;  // feature name -> path template with {story}
  std::vector<double> residual_alphas;
  stats::WilcoxonMode stats_mode = stats::WilcoxonMode::Auto;
  std::optional<fs::path> stats_baseline;  // CSV with participant,roi,B
  std::optional<fs::path> semphon_index;
  semphon::Metric semphon_metric = semphon::Metric::Cosine;
  std::string hash;  // SHA-256 of the canonical config JSON
};

// Throws ConfigError for malformed or inconsistent configs and missing
// referenced manifests.
PipelineConfig load_config(const fs::path& path);
PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir);

// "lo..hi:n" (log-spaced), "a,b,c" or a single number.
std::vector<double> parse_alpha_grid(const std::string& text);

// Comma-separated stage names, "all" or empty for every stage. Returned in
// pipeline order without duplicates. Unknown names -> ConfigError.
std::vector<std::string> parse_stages(const std::string& csv);

struct RunSummary {
  std::vector<std::string> ran;
  std::vector<std::string> skipped;  // already complete for this config
  std::string tree_digest;           // over every hashed output
};

// Runs the requested stages in order. A stage whose marker holds the current
// config hash is skipped unless `force`. Missing prerequisites -> StageError;
// module errors are rethrown with the stage and participant prefixed.
RunSummary run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages, bool force = false);

// Per-ROI normalized alignment of one encoding fit.
struct RoiAlignment {
  std::string roi;  // file stem
  std::string label;
  double b = 0.0;
  std::size_t n_voxels = 0;
};

struct FitOutputs {
  Vector rho;    // full length, 0 for voxels outside the mask
  Vector alpha;  // full length, 0 for voxels outside the mask
  std::vector<RoiAlignment> alignment;
  std::size_t n_constant = 0;
};

// Fits on train+val rows of `paired`, scores on test rows, restricted to
// `keep`, and writes rho.npy, alpha.npy, per_voxel.csv, encoding.json and
// alignment.csv into `out_dir` (when non-empty).
FitOutputs fit_and_score(const fs::path& paired_dir, const Vector& nc, const VoxelMask& keep, double threshold,
                         const std::vector<std::pair<std::string, RoiMask>>& rois, const encoding::RidgeConfig& ridge,
                         const fs::path& out_dir);

// Sorted, de-duplicated matches of the globs, resolved against `base_dir`;
// returns (file stem, mask). No match -> ConfigError.
std::vector<std::pair<std::string, RoiMask>> load_rois(const std::vector<std::string>& globs, const fs::path& base_dir);

// Stacks one TR-rate low-level file per story of `paired`; each must have the
// story's TR count.
Matrix load_lowlevel_rows(const std::vector<fs::path>& per_story, const io::PairedDir& paired);

struct ResidualPaired {
  io::PairedDir paired;  // train+val stories first, then test
  Vector alpha_per_dim;
};

// Removes the ridge-predicted low-level part from `paired.Xds` (fit on
// train+val rows) and rebuilds the FIR design per story.
ResidualPaired residualize_paired(const io::PairedDir& paired, const Matrix& lowlevel_rows,
                                  const std::vector<double>& alpha_grid);

// Semantic-phonetic index: {"vectors": "bundle.npy", "triples": [{"word",
// "layer", "word_row", "semantic_row", "phonetic_row"}]}; rows index the
// bundle matrix, paths resolve against the index directory.
std::vector<semphon::WordTriple> load_semphon_index(const fs::path& index_path);

struct Comparison {
  std::string roi;
  std::string feature;     // empty for model-vs-model comparisons
  std::string comparison;  // e.g. "original_vs_residual"
  std::vector<std::string> participants;
  std::vector<double> a;
  std::vector<double> b;
};

// Pairs column `col_a` of `a` with `col_b` of `b` by (participant, roi), one
// comparison per roi. Tables need participant and roi columns.
std::vector<Comparison> pair_alignment_tables(const csv::Table& a, const std::string& col_a, const csv::Table& b,
                                              const std::string& col_b, const std::string& comparison);

// {"tests": [...]} with W, W+, W-, p, exact and star (p < 0.05) per
// comparison; comparisons with fewer than kMinPairs participants are listed
// with "emitted": false.
std::string significance_report(const std::vector<Comparison>& comparisons, stats::WilcoxonMode mode,
                                const std::string& config_hash);

}  // namespace braintools::pipeline
