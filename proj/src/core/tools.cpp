#include "tools.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "ceiling.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "lowlevel.hpp"
#include "paired.hpp"
#include "permute.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "tensorio.hpp"

namespace braintools::tools {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
T get(const json& o, const char* key) {
  if (!o.contains(key)) throw InputError(std::string("missing option '") + key + "'");
  try {
    return o.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("option '") + key + "': " + e.what());
  }
}

template <typename T>
T get(const json& o, const char* key, T fallback) {
  return o.contains(key) && !o.at(key).is_null() ? get<T>(o, key) : fallback;
}

std::vector<double> alphas(const json& o, const char* key, std::vector<double> fallback) {
  if (!o.contains(key)) return fallback;
  const json& a = o.at(key);
  try {
    if (a.is_string()) return pipeline::parse_alpha_grid(a.get<std::string>());
    std::vector<double> grid = a.get<std::vector<double>>();
    encoding::RidgeConfig check;
    check.alpha_grid = grid;
    check.validate();
    return grid;
  } catch (const ConfigError& e) {
    throw InputError(e.what());
  } catch (const json::exception& e) {
    throw InputError(std::string("option '") + key + "': " + e.what());
  }
}

pairing::PairingConfig pairing_options(const json& o) {
  pairing::PairingConfig cfg;
  cfg.tr_s = get(o, "tr", cfg.tr_s);
  cfg.window_s = get(o, "window", cfg.window_s);
  cfg.stride_s = get(o, "stride", cfg.stride_s);
  cfg.lanczos_lobes = get(o, "lobes", cfg.lanczos_lobes);
  cfg.fir_delays = get(o, "delays", cfg.fir_delays);
  cfg.validate();
  return cfg;
}

json tool_pair(const json& o) {
  const auto cfg = pairing_options(o);
  const auto features = get<std::vector<std::string>>(o, "features");
  const auto fmri = get<std::vector<std::string>>(o, "fmri");
  if (features.empty() || features.size() != fmri.size())
    throw InputError("pair: need one --fmri per --features file");
  auto stories = get(o, "stories", std::vector<std::string>{});
  auto splits = get(o, "splits", std::vector<std::string>{});
  if (!stories.empty() && stories.size() != features.size()) throw InputError("pair: --stories count differs");
  if (!splits.empty() && splits.size() != features.size()) throw InputError("pair: --splits count differs");
  const std::string layer = get(o, "layer", std::string());

  std::vector<pairing::PairedDataset> parts;
  std::vector<io::PairedStory> meta;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const std::string id = stories.empty() ? fs::path(fmri[k]).stem().string() : stories[k];
    io::Split split = io::Split::Train;
    if (!splits.empty()) {
      try {
        split = io::parse_split(splits[k]);
      } catch (const ManifestError& e) {
        throw InputError(e.what());
      }
    } else if (features.size() > 1 && k + 1 == features.size()) {
      split = io::Split::Test;
    }
    const auto series = io::load_feature_series(features[k], 1.0 / cfg.stride_s, cfg.window_s);
    const auto run = io::load_fmri_run(fmri[k], cfg.tr_s, id);
    parts.push_back(pairing::build_paired(series, run, cfg));
    meta.push_back({id, split, 0});
  }
  const auto paired = io::concat_paired(parts, meta, cfg, layer);
  io::save_paired(get<std::string>(o, "out"), paired);
  return {{"n_trs", paired.X.rows()}, {"n_features", paired.X.cols()}, {"n_voxels", paired.Y.cols()}};
}

json tool_ceiling(const json& o) {
  const auto paths = get<std::vector<std::string>>(o, "repeats");
  const double tr = get(o, "tr", kDefaultTr);
  std::vector<FmriRun> runs;
  int r = 0;
  for (const auto& p : paths) runs.push_back(io::load_fmri_run(p, tr, "repeat", "", r++));
  const auto map = ceiling::estimate_noise_ceiling(runs, get(o, "threshold", ceiling::kDefaultThreshold));
  io::save_vector(get<std::string>(o, "out"), map.nc);
  if (o.contains("mask_out")) io::save_mask(get<std::string>(o, "mask_out"), map.keep_mask);
  return {{"n_voxels", map.nc.size()}, {"n_kept", map.n_kept()}, {"mean_nc", map.nc.mean()}};
}

json tool_fit(const json& o) {
  encoding::RidgeConfig ridge;
  ridge.alpha_grid = alphas(o, "alphas", ridge.alpha_grid);
  const json folds = o.value("folds", json("story"));
  if (folds.is_string() && folds.get<std::string>() == "story") {
    ridge.n_folds = 0;
  } else if (folds.is_string()) {
    try {
      ridge.n_folds = std::stoi(folds.get<std::string>());
    } catch (const std::exception&) {
      throw InputError("fit: --folds must be 'story' or an integer >= 2");
    }
  } else {
    ridge.n_folds = get<int>(o, "folds");
  }
  ridge.standardize = get(o, "standardize", true);
  ridge.validate();

  const double threshold = get(o, "threshold", ceiling::kDefaultThreshold);
  const Vector nc = io::load_vector(get<std::string>(o, "nc"));
  const VoxelMask keep = o.contains("mask") ? io::load_mask(get<std::string>(o, "mask")) : ceiling::threshold_mask(nc, threshold);
  auto rois = pipeline::load_rois(get<std::vector<std::string>>(o, "roi"), fs::current_path());
  const auto out = pipeline::fit_and_score(get<std::string>(o, "paired"), nc, keep, threshold, rois, ridge,
                                           get<std::string>(o, "out"));
  json b = json::object();
  for (const auto& a : out.alignment) b[a.roi] = a.b;
  return {{"B", b}, {"n_constant", out.n_constant}};
}

json tool_residualize(const json& o) {
  const fs::path src = get<std::string>(o, "paired");
  const auto paired = io::load_paired(src);
  // One path per story, or a single template with {story}.
  const auto paths = get<std::vector<std::string>>(o, "lowlevel");
  std::vector<fs::path> files;
  if (paths.size() == 1 && paired.stories.size() > 1) {
    for (const auto& s : paired.stories) files.emplace_back(io::substitute(paths[0], "story", s.story_id));
  } else {
    files.assign(paths.begin(), paths.end());
  }
  const Matrix low = pipeline::load_lowlevel_rows(files, paired);
  const auto res = pipeline::residualize_paired(paired, low, alphas(o, "alphas", lowlevel::default_residual_grid()));
  const fs::path dst = get<std::string>(o, "out");
  io::save_paired(dst, res.paired);
  io::save_vector(dst / "residual_alpha.npy", res.alpha_per_dim);
  return {{"n_trs", res.paired.X.rows()}, {"n_lowlevel_dims", low.cols()}};
}

json tool_impact(const json& o) {
  const auto orig = csv::read(get<std::string>(o, "original"));
  const auto resid = csv::read(get<std::string>(o, "residual"));
  const std::string feature = get<std::string>(o, "feature");
  const std::string layer = get(o, "layer", std::string("mean"));
  auto index = [](const csv::Table& t) {
    std::map<std::string, double> m;
    const auto ir = t.require("roi"), ib = t.require("B");
    for (const auto& row : t.rows) m[row[ir]] = csv::parse_double(row[ib], t.source);
    return m;
  };
  const auto bo = index(orig), br = index(resid);
  csv::Table out{{"roi", "feature", "layer", "B_o", "B_r", "R"}, {}, {}};
  json r = json::object();
  std::size_t n_null = 0;
  for (const auto& [roi, b_o] : bo) {
    const auto it = br.find(roi);
    if (it == br.end()) throw InputError("impact: roi '" + roi + "' missing from the residual alignment");
    const auto impact = lowlevel::low_level_impact(b_o, it->second);
    if (!impact) ++n_null;
    r[roi] = impact ? json(*impact) : json(nullptr);
    out.rows.push_back({roi, feature, layer, csv::format(b_o), csv::format(it->second), csv::format(impact)});
  }
  csv::write(get<std::string>(o, "out"), out);
  return {{"R", r}, {"n_null", n_null}};
}

json tool_stats(const json& o) {
  const auto a = csv::read(get<std::string>(o, "a"));
  const auto b = csv::read(get<std::string>(o, "b"));
  const auto comparisons = pipeline::pair_alignment_tables(a, get(o, "column_a", std::string("B")), b,
                                                           get(o, "column_b", std::string("B")), "a_vs_b");
  const auto mode = stats::parse_mode(get(o, "mode", std::string("auto")));
  const std::string report = pipeline::significance_report(comparisons, mode, "");
  io::write_text(get<std::string>(o, "out"), report);
  return json::parse(report);
}

json tool_semphon(const json& o) {
  const auto triples = pipeline::load_semphon_index(get<std::string>(o, "index"));
  const auto metric = semphon::parse_metric(get(o, "metric", std::string("cosine")));
  csv::Table out{{"layer", "d", "n_triples"}, {}, {}};
  json d = json::object();
  for (const auto& [layer, lp] : semphon::preference_by_layer(triples, metric)) {
    out.rows.push_back({std::to_string(layer), csv::format(lp.d), std::to_string(lp.n_triples)});
    d[std::to_string(layer)] = lp.d;
  }
  csv::write(get<std::string>(o, "out"), out);
  return {{"d", d}};
}

json tool_synth(const json& o) {
  synth::SynthSpec spec;
  if (o.contains("spec")) {
    spec = synth::spec_from_json(io::read_text(get<std::string>(o, "spec")));
  } else if (o.contains("spec_json")) {
    spec = synth::spec_from_json(o.at("spec_json").dump());
  }
  const auto data = synth::generate(spec);
  synth::write_dataset(data, get<std::string>(o, "out"));
  json ids = json::array();
  for (const auto& p : data.participants) ids.push_back(p.participant_id);
  return {{"participants", ids}, {"n_stories", data.stories.size()}, {"nc_true", std::sqrt(spec.snr / (1.0 + spec.snr))}};
}

json tool_permute(const json& o) {
  const Matrix y = io::load_matrix(get<std::string>(o, "fmri"));
  const auto block = get<Eigen::Index>(o, "block", permute::kDefaultBlockLen);
  const auto seed = get<std::uint64_t>(o, "seed", 0);
  const auto perm = permute::make_block_permutation(y.rows(), block, seed);
  const fs::path out = get<std::string>(o, "out");
  io::save_matrix(out, permute::apply_block_permutation(y, perm));
  json meta{{"block_len", perm.block_len}, {"seed", perm.seed}, {"mapping", perm.mapping}, {"n_trs", y.rows()}};
  io::write_text(fs::path(out).replace_extension(".permutation.json"), meta.dump(2) + "\n");
  return meta;
}

json tool_power(const json& o) {
  const Vector wave = io::load_vector(get<std::string>(o, "audio"));
  const auto feat = lowlevel::power_spectrum_features(std::span<const double>(wave.data(), wave.size()),
                                                      get<double>(o, "sr"), get(o, "tr", kDefaultTr));
  io::save_feature_series(get<std::string>(o, "out"), feat.series);
  return {{"n_trs", feat.series.n_samples()}, {"n_bands", feat.series.n_dims()}};
}

json tool_phones(const json& o) {
  json raw;
  try {
    raw = json::parse(io::read_text(get<std::string>(o, "alignments")));
  } catch (const json::exception& e) {
    throw FormatError(std::string("alignments: ") + e.what());
  }
  std::vector<lowlevel::PhoneInterval> phones;
  try {
    for (const auto& p : raw)
      phones.push_back({p.at("phone").get<std::string>(), p.at("start").get<double>(), p.at("end").get<double>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("alignments: ") + e.what());
  }
  const int order = get(o, "order", 2);
  lowlevel::PhoneVocabulary vocab;
  vocab.oov_column = get(o, "oov", false);
  if (o.contains("vocab")) {
    try {
      vocab.ngrams = json::parse(io::read_text(get<std::string>(o, "vocab"))).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("vocab: ") + e.what());
    }
  } else {
    vocab.ngrams = lowlevel::observed_ngrams(phones, order);
  }
  const auto feat = lowlevel::phone_onehot_features(phones, order, vocab, get(o, "tr", kDefaultTr),
                                                    get<Eigen::Index>(o, "n_trs"));
  const fs::path out = get<std::string>(o, "out");
  io::save_feature_series(out, feat.series);
  io::write_text(fs::path(out).replace_extension(".vocab.json"), json(vocab.ngrams).dump(2) + "\n");
  return {{"n_trs", feat.series.n_samples()}, {"n_columns", feat.series.n_dims()}, {"kind", lowlevel::to_string(feat.kind)}};
}

json tool_run(const json& o) {
  const auto cfg = pipeline::load_config(get<std::string>(o, "config"));
  const auto summary = pipeline::run_pipeline(cfg, pipeline::parse_stages(get(o, "stages", std::string("all"))),
                                              get(o, "force", false));
  return {{"ran", summary.ran}, {"skipped", summary.skipped}, {"tree_digest", summary.tree_digest}, {"out", cfg.out.string()}};
}

const std::map<std::string, std::function<json(const json&)>>& registry() {
  static const std::map<std::string, std::function<json(const json&)>> r{
      {"pair", tool_pair},       {"ceiling", tool_ceiling}, {"fit", tool_fit},         {"residualize", tool_residualize},
      {"impact", tool_impact},   {"stats", tool_stats},     {"semphon", tool_semphon}, {"synth", tool_synth},
      {"permute", tool_permute}, {"power", tool_power},     {"phones", tool_phones},   {"run", tool_run}};
  return r;
}

}  // namespace

const std::vector<std::string>& tool_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

std::string run_tool(const std::string& name, const std::string& options_json) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw InputError("unknown tool '" + name + "'");
  json options;
  try {
    options = options_json.empty() ? json::object() : json::parse(options_json);
  } catch (const json::exception& e) {
    throw InputError(std::string("options: ") + e.what());
  }
  if (!options.is_object()) throw InputError("options must be a JSON object");
  try {
    return it->second(options).dump();
  } catch (const json::exception& e) {
    throw FormatError(name + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(name + ": " + e.what());
  }
}

}  // namespace braintools::tools
