// braintools: command-line front end over the C API.
//
// Exit codes: 0 ok, 2 usage or config error, 3 stage error, 4 data error.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "braintools/braintools.h"
#include "json.hpp"

using nlohmann::json;

namespace {

int exit_code(bt_status s) {
  switch (s) {
    case BT_OK: return 0;
    case BT_ERR_CONFIG: return 2;
    case BT_ERR_STAGE: return 3;
    default: return 4;
  }
}

int report(bt_status s, char* result, bool quiet) {
  if (s == BT_OK) {
    if (result && !quiet) std::cout << json::parse(result).dump(2) << "\n";
  } else {
    std::cerr << "braintools: " << bt_status_string(s) << ": " << bt_last_error() << "\n";
  }
  bt_string_free(result);
  return exit_code(s);
}

int run_tool(const std::string& tool, const json& options, bool quiet) {
  char* result = nullptr;
  const bt_status s = bt_tool_run(tool.c_str(), options.dump().c_str(), &result);
  return report(s, result, quiet);
}

std::vector<int> parse_delays(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-alignment measurement toolkit"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Do not print the JSON summary or progress logs");
  app.set_version_flag("--version", std::string(bt_version()));

  json opts = json::object();
  std::string tool;

  // Pipeline stages accept --config; `pair`, `ceiling`, `fit`, `residualize`,
  // `impact`, `stats` and `semphon` also work on explicit files without it.
  std::string config;
  bool force = false;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Pipeline config; runs this stage of the pipeline")->check(CLI::ExistingFile);
    sub->add_flag("--force", force, "Rerun even if the stage is complete");
  };

  // pair
  std::vector<std::string> features, fmri, stories, splits;
  double tr = 2.0045, window = 16.0, stride = 0.1;
  int lobes = 3;
  std::string delays = "1,2,3,4,5", layer, out;
  auto* pair = app.add_subcommand("pair", "Pair stimulus features with fMRI runs");
  add_config(pair);
  pair->add_option("--features", features, "Feature .npy per story")->check(CLI::ExistingFile);
  pair->add_option("--fmri", fmri, "fMRI .npy per story")->check(CLI::ExistingFile);
  pair->add_option("--stories", stories, "Story ids (default: fMRI file stems)");
  pair->add_option("--splits", splits, "train|val|test per story (default: last is test)");
  pair->add_option("--tr", tr, "TR in seconds");
  pair->add_option("--window", window, "Window length in seconds");
  pair->add_option("--stride", stride, "Window stride in seconds");
  pair->add_option("--lobes", lobes, "Lanczos lobes");
  pair->add_option("--delays", delays, "FIR delays in TRs, comma separated");
  pair->add_option("--layer", layer, "Layer label recorded in paired.json");
  pair->add_option("--out", out, "Output paired directory");

  // ceiling
  std::vector<std::string> repeats;
  double threshold = 0.4;
  std::string mask_out;
  auto* ceil = app.add_subcommand("ceiling", "Noise ceiling from repeated runs");
  add_config(ceil);
  ceil->add_option("--repeats", repeats, "Repeat .npy files")->check(CLI::ExistingFile);
  ceil->add_option("--threshold", threshold, "Keep voxels with NC above this");
  ceil->add_option("--tr", tr, "TR in seconds");
  ceil->add_option("--out", out, "Output nc.npy");
  ceil->add_option("--mask-out", mask_out, "Output mask.npy");

  // fit
  std::string paired, alphas = "1e0..1e4:10", folds = "story", nc, mask;
  std::vector<std::string> rois;
  bool no_standardize = false;
  auto* fit = app.add_subcommand("fit", "Fit ridge encoding models and compute alignment");
  add_config(fit);
  fit->add_option("--paired", paired, "Paired directory");
  fit->add_option("--alphas", alphas, "Alpha grid: lo..hi:n or a,b,c");
  fit->add_option("--folds", folds, "'story' or a number of contiguous folds");
  fit->add_option("--nc", nc, "Noise ceiling .npy")->check(CLI::ExistingFile);
  fit->add_option("--mask", mask, "Voxel mask .npy")->check(CLI::ExistingFile);
  fit->add_option("--threshold", threshold, "Ceiling threshold when --mask is absent");
  fit->add_option("--roi", rois, "ROI JSON files or globs");
  fit->add_flag("--no-standardize", no_standardize, "Do not z-score features");
  fit->add_option("--out", out, "Output directory");

  // residualize
  std::vector<std::string> lowlevel;
  std::string res_alphas;
  auto* resid = app.add_subcommand("residualize", "Remove a low-level feature from model representations");
  add_config(resid);
  resid->add_option("--paired", paired, "Paired directory");
  resid->add_option("--lowlevel", lowlevel, "Low-level .npy per story, or one template with {story}");
  resid->add_option("--alphas", res_alphas, "Alpha grid: lo..hi:n or a,b,c");
  resid->add_option("--out", out, "Output paired directory");

  // impact
  std::string original, residual, feature;
  auto* impact = app.add_subcommand("impact", "Low-level impact from two alignment tables");
  add_config(impact);
  impact->add_option("--original", original, "alignment.csv of the original representations")->check(CLI::ExistingFile);
  impact->add_option("--residual", residual, "alignment.csv after residualization")->check(CLI::ExistingFile);
  impact->add_option("--feature", feature, "Feature name");
  impact->add_option("--layer", layer, "Layer label");
  impact->add_option("--out", out, "Output impact.csv");

  // stats
  std::string a_csv, b_csv, column_a = "B", column_b = "B", mode = "auto";
  auto* stats = app.add_subcommand("stats", "Wilcoxon signed-rank tests across participants");
  add_config(stats);
  stats->add_option("--a", a_csv, "Alignment CSV (participant,roi,B)")->check(CLI::ExistingFile);
  stats->add_option("--b", b_csv, "Alignment CSV (participant,roi,B)")->check(CLI::ExistingFile);
  stats->add_option("--column-a", column_a, "Value column of --a");
  stats->add_option("--column-b", column_b, "Value column of --b");
  stats->add_option("--mode", mode, "exact, normal_approx or auto");
  stats->add_option("--out", out, "Output significance.json");

  // semphon
  std::string index, metric = "cosine";
  auto* sem = app.add_subcommand("semphon", "Semantic-phonetic preference per layer");
  add_config(sem);
  sem->add_option("--index", index, "Triple index JSON")->check(CLI::ExistingFile);
  sem->add_option("--metric", metric, "cosine or euclidean");
  sem->add_option("--out", out, "Output preference.csv");

  // synth
  std::string spec;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset with known ground truth");
  syn->add_option("--spec", spec, "Spec JSON (defaults apply when omitted)")->check(CLI::ExistingFile);
  syn->add_option("--out", out, "Output directory")->required();

  // permute
  long block = 10;
  unsigned long long seed = 0;
  auto* perm = app.add_subcommand("permute", "Block-permute fMRI rows");
  perm->add_option("--fmri", fmri, "fMRI .npy")->required()->expected(1)->check(CLI::ExistingFile);
  perm->add_option("--block", block, "Block length in TRs");
  perm->add_option("--seed", seed, "Seed");
  perm->add_option("--out", out, "Output .npy")->required();

  // lowlevel
  auto* low = app.add_subcommand("lowlevel", "Compute low-level stimulus features");
  low->require_subcommand(1);
  std::string audio, alignments, vocab;
  double sr = 0.0;
  int order = 2;
  long n_trs = 0;
  bool oov = false;
  auto* power = low->add_subcommand("power", "Band power spectrum per TR");
  power->add_option("--audio", audio, "Mono waveform .npy")->required()->check(CLI::ExistingFile);
  power->add_option("--sr", sr, "Sample rate in Hz")->required();
  power->add_option("--tr", tr, "TR in seconds");
  power->add_option("--out", out, "Output .npy")->required();
  auto* phones = low->add_subcommand("phones", "Binary phone n-gram features per TR");
  phones->add_option("--alignments", alignments, "Phone alignment JSON")->required()->check(CLI::ExistingFile);
  phones->add_option("--order", order, "2 (diphones) or 3 (triphones)");
  phones->add_option("--vocab", vocab, "N-gram vocabulary JSON (default: observed)")->check(CLI::ExistingFile);
  phones->add_flag("--oov", oov, "Add a column for unseen n-grams");
  phones->add_option("--n-trs", n_trs, "Number of TRs")->required();
  phones->add_option("--tr", tr, "TR in seconds");
  phones->add_option("--out", out, "Output .npy")->required();

  // run
  std::string stage_list;
  auto* run = app.add_subcommand("run", "Run pipeline stages from a config");
  run->add_option("--config", config, "Pipeline config")->required()->check(CLI::ExistingFile);
  run->add_option("--stages", stage_list, "Comma-separated stages (default: all)");
  run->add_flag("--force", force, "Rerun completed stages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (quiet) setenv("BRAINTOOLS_QUIET", "1", 1);

  auto missing = [](const char* flag) {
    std::cerr << "braintools: " << flag << " is required without --config\n";
    return 2;
  };
  auto stage = [&](const std::string& name) {
    char* result = nullptr;
    const bt_status s = bt_pipeline_run(config.c_str(), name.c_str(), force ? 1 : 0, &result);
    return report(s, result, quiet);
  };

  if (run->parsed()) return stage(stage_list);

  if (pair->parsed()) {
    if (!config.empty()) return stage("pair");
    if (features.empty()) return missing("--features");
    if (out.empty()) return missing("--out");
    std::vector<int> d;
    try {
      d = parse_delays(delays);
    } catch (const std::exception&) {
      std::cerr << "braintools: --delays must be comma-separated integers\n";
      return 2;
    }
    opts = {{"features", features}, {"fmri", fmri}, {"tr", tr}, {"window", window}, {"stride", stride},
            {"lobes", lobes}, {"delays", d}, {"out", out}};
    if (!stories.empty()) opts["stories"] = stories;
    if (!splits.empty()) opts["splits"] = splits;
    if (!layer.empty()) opts["layer"] = layer;
    return run_tool("pair", opts, quiet);
  }
  if (ceil->parsed()) {
    if (!config.empty()) return stage("ceiling");
    if (repeats.empty()) return missing("--repeats");
    if (out.empty()) return missing("--out");
    opts = {{"repeats", repeats}, {"threshold", threshold}, {"tr", tr}, {"out", out}};
    if (!mask_out.empty()) opts["mask_out"] = mask_out;
    return run_tool("ceiling", opts, quiet);
  }
  if (fit->parsed()) {
    if (!config.empty()) return stage("fit");
    if (paired.empty()) return missing("--paired");
    if (nc.empty()) return missing("--nc");
    if (rois.empty()) return missing("--roi");
    if (out.empty()) return missing("--out");
    opts = {{"paired", paired}, {"alphas", alphas},  {"folds", folds}, {"nc", nc},
            {"roi", rois},      {"threshold", threshold}, {"standardize", !no_standardize}, {"out", out}};
    if (!mask.empty()) opts["mask"] = mask;
    return run_tool("fit", opts, quiet);
  }
  if (resid->parsed()) {
    if (!config.empty()) return stage("residualize");
    if (paired.empty()) return missing("--paired");
    if (lowlevel.empty()) return missing("--lowlevel");
    if (out.empty()) return missing("--out");
    opts = {{"paired", paired}, {"lowlevel", lowlevel}, {"out", out}};
    if (!res_alphas.empty()) opts["alphas"] = res_alphas;
    return run_tool("residualize", opts, quiet);
  }
  if (impact->parsed()) {
    if (!config.empty()) return stage("impact");
    if (original.empty()) return missing("--original");
    if (residual.empty()) return missing("--residual");
    if (feature.empty()) return missing("--feature");
    if (out.empty()) return missing("--out");
    opts = {{"original", original}, {"residual", residual}, {"feature", feature}, {"out", out}};
    if (!layer.empty()) opts["layer"] = layer;
    return run_tool("impact", opts, quiet);
  }
  if (stats->parsed()) {
    if (!config.empty()) return stage("stats");
    if (a_csv.empty()) return missing("--a");
    if (b_csv.empty()) return missing("--b");
    if (out.empty()) return missing("--out");
    opts = {{"a", a_csv}, {"b", b_csv}, {"column_a", column_a}, {"column_b", column_b}, {"mode", mode}, {"out", out}};
    return run_tool("stats", opts, quiet);
  }
  if (sem->parsed()) {
    if (!config.empty()) return stage("semphon");
    if (index.empty()) return missing("--index");
    if (out.empty()) return missing("--out");
    return run_tool("semphon", {{"index", index}, {"metric", metric}, {"out", out}}, quiet);
  }
  if (syn->parsed()) {
    opts = {{"out", out}};
    if (!spec.empty()) opts["spec"] = spec;
    return run_tool("synth", opts, quiet);
  }
  if (perm->parsed()) {
    return run_tool("permute", {{"fmri", fmri.front()}, {"block", block}, {"seed", seed}, {"out", out}}, quiet);
  }
  if (power->parsed()) return run_tool("power", {{"audio", audio}, {"sr", sr}, {"tr", tr}, {"out", out}}, quiet);
  if (phones->parsed()) {
    opts = {{"alignments", alignments}, {"order", order}, {"oov", oov}, {"n_trs", n_trs}, {"tr", tr}, {"out", out}};
    if (!vocab.empty()) opts["vocab"] = vocab;
    return run_tool("phones", opts, quiet);
  }
  return 2;
}
