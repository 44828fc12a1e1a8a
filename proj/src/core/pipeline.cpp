#include "pipeline.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "ceiling.hpp"
#include "errors.hpp"
#include "hash.hpp"
#include "json.hpp"
#include "log.hpp"
#include "lowlevel.hpp"
#include "paired.hpp"
#include "rng.hpp"
#include "tensorio.hpp"

namespace braintools::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------- config

std::vector<double> parse_alpha_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("alpha grid: not a number: '" + s + "'");
    return v;
  };
  std::vector<double> grid;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto colon = text.find(':', dots);
    if (colon == std::string::npos) throw ConfigError("alpha grid '" + text + "': expected lo..hi:n");
    const double lo = number(text.substr(0, dots));
    const double hi = number(text.substr(dots + 2, colon - dots - 2));
    const double n = number(text.substr(colon + 1));
    if (n < 1 || n != std::floor(n) || !(lo > 0.0) || !(hi >= lo))
      throw ConfigError("alpha grid '" + text + "': need 0 < lo <= hi and integer n >= 1");
    grid = encoding::logspace_grid(lo, hi, static_cast<int>(n));
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(number(item));
  }
  encoding::RidgeConfig check;
  check.alpha_grid = grid;
  try {
    check.validate();
  } catch (const InputError& e) {
    throw ConfigError("alpha grid '" + text + "': " + e.what());
  }
  return grid;
}

namespace {

std::vector<double> alphas_from_json(const json& j) {
  if (j.is_string()) return parse_alpha_grid(j.get<std::string>());
  if (j.is_array()) {
    std::vector<double> grid = j.get<std::vector<double>>();
    encoding::RidgeConfig check;
    check.alpha_grid = grid;
    try {
      check.validate();
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
    return grid;
  }
  if (j.is_object()) {
    return parse_alpha_grid(std::to_string(j.at("min").get<double>()) + ".." + std::to_string(j.at("max").get<double>()) +
                            ":" + std::to_string(j.at("n").get<int>()));
  }
  throw ConfigError("alphas must be a string, list or {min, max, n}");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::string> parse_stages(const std::string& text) {
  if (text.empty() || text == "all") return kStages;
  std::set<std::string> wanted;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (std::find(kStages.begin(), kStages.end(), item) == kStages.end())
      throw ConfigError("unknown stage '" + item + "'");
    wanted.insert(item);
  }
  std::vector<std::string> out;
  for (const auto& s : kStages)
    if (wanted.count(s)) out.push_back(s);
  return out;
}

PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");

  PipelineConfig c;
  c.base_dir = base_dir;
  c.hash = hash::sha256_hex(j.dump());
  try {
    reject_unknown(j,
                   {"manifest", "manifests", "out", "seed", "layers", "pairing", "ridge", "ceiling", "rois", "lowlevel",
                    "residualize", "stats", "semphon"},
                   "config");
    if (j.contains("manifests")) {
      for (const auto& m : j.at("manifests")) c.manifests.push_back(resolve(base_dir, m.get<std::string>()));
    }
    if (j.contains("manifest")) c.manifests.push_back(resolve(base_dir, j.at("manifest").get<std::string>()));
    if (c.manifests.empty()) throw ConfigError("config: no manifest given");
    for (const auto& m : c.manifests)
      if (!fs::is_regular_file(m)) throw ConfigError("config: manifest not found: " + m.string());

    c.out = resolve(base_dir, j.value("out", std::string("results")));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("layers")) {
      for (const auto& l : j.at("layers")) c.layers.push_back(l.is_string() ? l.get<std::string>() : l.dump());
      if (c.layers.empty()) throw ConfigError("config: layers list is empty");
    }

    if (j.contains("pairing")) {
      const json& p = j.at("pairing");
      reject_unknown(p, {"window_s", "stride_s", "tr_s", "lanczos_lobes", "fir_delays"}, "pairing");
      c.pairing = io::pairing_from_json(p.dump());
    }

    c.ridge.seed = rng::substream(c.seed, "ridge");
    if (j.contains("ridge")) {
      const json& r = j.at("ridge");
      reject_unknown(r, {"alphas", "folds", "standardize"}, "ridge");
      if (r.contains("alphas")) c.ridge.alpha_grid = alphas_from_json(r.at("alphas"));
      if (r.contains("folds")) {
        const json& f = r.at("folds");
        if (f.is_string() && f.get<std::string>() == "story") {
          c.ridge.n_folds = 0;
        } else if (f.is_number_integer() && f.get<int>() >= 2) {
          c.ridge.n_folds = f.get<int>();
        } else {
          throw ConfigError("ridge.folds must be \"story\" or an integer >= 2");
        }
      }
      c.ridge.standardize = r.value("standardize", true);
    }

    if (j.contains("ceiling")) {
      reject_unknown(j.at("ceiling"), {"threshold"}, "ceiling");
      c.threshold = j.at("ceiling").value("threshold", c.threshold);
      if (!(c.threshold >= 0.0 && c.threshold < 1.0)) throw ConfigError("ceiling.threshold must be in [0, 1)");
    }

    if (j.contains("rois")) c.roi_globs = j.at("rois").get<std::vector<std::string>>();
    if (c.roi_globs.empty()) throw ConfigError("config: no ROI globs given");

    if (j.contains("lowlevel")) {
      for (const auto& [name, tmpl] : j.at("lowlevel").items()) {
        if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("lowlevel: bad feature name '" + name + "'");
        c.lowlevel[name] = tmpl.get<std::string>();
      }
    }
    c.residual_alphas = lowlevel::default_residual_grid();
    if (j.contains("residualize")) {
      reject_unknown(j.at("residualize"), {"alphas"}, "residualize");
      if (j.at("residualize").contains("alphas")) c.residual_alphas = alphas_from_json(j.at("residualize").at("alphas"));
    }

    if (j.contains("stats")) {
      const json& s = j.at("stats");
      reject_unknown(s, {"mode", "baseline"}, "stats");
      c.stats_mode = stats::parse_mode(s.value("mode", std::string("auto")));
      if (s.contains("baseline")) {
        c.stats_baseline = resolve(base_dir, s.at("baseline").get<std::string>());
        if (!fs::is_regular_file(*c.stats_baseline))
          throw ConfigError("stats.baseline not found: " + c.stats_baseline->string());
      }
    }

    if (j.contains("semphon")) {
      const json& s = j.at("semphon");
      reject_unknown(s, {"index", "metric"}, "semphon");
      c.semphon_index = resolve(base_dir, s.at("index").get<std::string>());
      if (!fs::is_regular_file(*c.semphon_index))
        throw ConfigError("semphon.index not found: " + c.semphon_index->string());
      c.semphon_metric = semphon::parse_metric(s.value("metric", std::string("cosine")));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config not found: " + path.string());
  PipelineConfig c = parse_config(io::read_text(path), fs::absolute(path).parent_path());
  c.config_path = path;
  return c;
}

// ---------------------------------------------------------------- helpers

std::vector<std::pair<std::string, RoiMask>> load_rois(const std::vector<std::string>& globs, const fs::path& base_dir) {
  std::set<std::string> files;
  for (const auto& g : globs) {
    const std::string pattern = resolve(base_dir, g).string();
    glob_t result{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &result);
    if (rc == 0)
      for (std::size_t i = 0; i < result.gl_pathc; ++i) files.insert(result.gl_pathv[i]);
    ::globfree(&result);
    if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("glob failed for " + pattern);
  }
  if (files.empty()) throw ConfigError("no ROI files match the configured globs");
  std::vector<std::pair<std::string, RoiMask>> out;
  std::set<std::string> stems;
  for (const auto& f : files) {
    const std::string stem = fs::path(f).stem().string();
    if (!stems.insert(stem).second) throw ConfigError("two ROI files share the name '" + stem + "'");
    out.emplace_back(stem, io::load_roi(f));
  }
  return out;
}

FitOutputs fit_and_score(const fs::path& paired_dir, const Vector& nc, const VoxelMask& keep, double threshold,
                         const std::vector<std::pair<std::string, RoiMask>>& rois, const encoding::RidgeConfig& ridge,
                         const fs::path& out_dir) {
  const io::PairedDir paired = io::load_paired(paired_dir);
  const Eigen::Index n_voxels = paired.Y.cols();
  if (nc.size() != n_voxels || static_cast<Eigen::Index>(keep.size()) != n_voxels)
    throw InputError("noise ceiling covers " + std::to_string(nc.size()) + " voxels, paired data has " +
                     std::to_string(n_voxels));
  const std::vector<io::Split> train_splits{io::Split::Train, io::Split::Val};
  const std::vector<io::Split> test_splits{io::Split::Test};
  const auto train = io::select_rows(paired, train_splits);
  const auto test = io::select_rows(paired, test_splits);
  if (train.X.rows() == 0) throw InputError("paired data has no train rows");
  if (test.X.rows() == 0) throw InputError("paired data has no test rows");

  const auto ytr = ceiling::apply_mask(train.Y, keep);
  const auto yte = ceiling::apply_mask(test.Y, keep);
  auto model = encoding::fit_encoding(train.X, ytr.data, train.story_lengths, ridge);
  FitOutputs out;
  const Vector rho_kept = encoding::evaluate_encoding(model, test.X, yte.data);
  encoding::pearson_columns(model.predict(test.X), yte.data, &out.n_constant);

  out.rho = Vector::Zero(n_voxels);
  out.alpha = Vector::Zero(n_voxels);
  for (std::size_t k = 0; k < ytr.voxel_index.size(); ++k) {
    out.rho[static_cast<Eigen::Index>(ytr.voxel_index[k])] = rho_kept[static_cast<Eigen::Index>(k)];
    out.alpha[static_cast<Eigen::Index>(ytr.voxel_index[k])] = model.alpha_per_voxel[static_cast<Eigen::Index>(k)];
  }
  ceiling::NoiseCeilingMap map{nc, threshold, keep};
  for (const auto& [stem, roi] : rois) {
    const auto a = encoding::normalized_alignment(out.rho, map, roi);
    out.alignment.push_back({stem, roi.label, a.b, a.voxels.size()});
  }

  if (!out_dir.empty()) {
    io::save_vector(out_dir / "rho.npy", out.rho);
    io::save_vector(out_dir / "alpha.npy", out.alpha);
    csv::Table per_voxel{{"voxel", "rho", "alpha", "nc"}, {}, {}};
    for (const auto v : ytr.voxel_index) {
      const auto i = static_cast<Eigen::Index>(v);
      per_voxel.rows.push_back({std::to_string(v), csv::format(out.rho[i]), csv::format(out.alpha[i]), csv::format(nc[i])});
    }
    csv::write(out_dir / "per_voxel.csv", per_voxel);
    csv::Table align{{"roi", "label", "B", "n_voxels"}, {}, {}};
    for (const auto& a : out.alignment) align.rows.push_back({a.roi, a.label, csv::format(a.b), std::to_string(a.n_voxels)});
    csv::write(out_dir / "alignment.csv", align);
    json enc{{"alpha_grid", ridge.alpha_grid},
             {"folds", ridge.n_folds == 0 ? json("story") : json(ridge.n_folds)},
             {"standardize", ridge.standardize},
             {"train_stories", train.story_ids},
             {"test_stories", test.story_ids},
             {"n_train", train.X.rows()},
             {"n_test", test.X.rows()},
             {"n_features", train.X.cols()},
             {"n_voxels", n_voxels},
             {"n_fitted", ytr.voxel_index.size()},
             {"n_constant_predictions", out.n_constant},
             {"layer", paired.layer}};
    io::write_text(out_dir / "encoding.json", enc.dump(2) + "\n");
  }
  return out;
}

std::vector<Comparison> pair_alignment_tables(const csv::Table& a, const std::string& col_a, const csv::Table& b,
                                              const std::string& col_b, const std::string& comparison) {
  auto index = [](const csv::Table& t, const std::string& col) {
    const auto ip = t.require("participant"), ir = t.require("roi"), iv = t.require(col);
    std::map<std::string, std::map<std::string, double>> by_roi;
    for (const auto& row : t.rows) {
      if (row[iv].empty()) continue;
      auto [it, fresh] = by_roi[row[ir]].emplace(row[ip], csv::parse_double(row[iv], t.source + " column " + col));
      if (!fresh) throw FormatError(t.source + ": duplicate row for participant '" + row[ip] + "', roi '" + row[ir] + "'");
    }
    return by_roi;
  };
  const auto ia = index(a, col_a);
  const auto ib = index(b, col_b);
  std::vector<Comparison> out;
  for (const auto& [roi, pa] : ia) {
    const auto it = ib.find(roi);
    if (it == ib.end()) continue;
    Comparison c;
    c.roi = roi;
    c.comparison = comparison;
    for (const auto& [participant, value] : pa) {
      const auto jt = it->second.find(participant);
      if (jt == it->second.end()) continue;
      c.participants.push_back(participant);
      c.a.push_back(value);
      c.b.push_back(jt->second);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string significance_report(const std::vector<Comparison>& comparisons, stats::WilcoxonMode mode,
                                const std::string& config_hash) {
  json tests = json::array();
  for (const auto& c : comparisons) {
    json t{{"roi", c.roi}, {"comparison", c.comparison}, {"n", c.participants.size()}, {"participants", c.participants}};
    if (!c.feature.empty()) t["feature"] = c.feature;
    if (c.participants.size() < stats::kMinPairs) {
      t["emitted"] = false;
      t["reason"] = "fewer than " + std::to_string(stats::kMinPairs) + " paired participants";
    } else {
      const auto r = stats::wilcoxon_signed_rank(c.a, c.b, mode);
      t["emitted"] = true;
      t["W"] = r.w;
      t["W_plus"] = r.w_plus;
      t["W_minus"] = r.w_minus;
      t["p"] = r.p;
      t["exact"] = r.exact;
      t["degenerate"] = r.degenerate;
      t["n_nonzero"] = r.n_nonzero;
      t["star"] = r.p < 0.05;
    }
    tests.push_back(std::move(t));
  }
  json report{{"mode", stats::to_string(mode)}, {"tests", tests}};
  if (!config_hash.empty()) report["config_hash"] = config_hash;
  return report.dump(2) + "\n";
}

Matrix load_lowlevel_rows(const std::vector<fs::path>& per_story, const io::PairedDir& paired) {
  if (per_story.size() != paired.stories.size())
    throw InputError(std::to_string(per_story.size()) + " low-level files for " + std::to_string(paired.stories.size()) +
                     " stories");
  Matrix out;
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < per_story.size(); ++k) {
    const auto& s = paired.stories[k];
    const auto series = io::load_feature_series(per_story[k], 1.0 / paired.pairing.tr_s, 0.5 * paired.pairing.tr_s);
    if (series.n_samples() != s.n_trs)
      throw InputError("low-level feature " + per_story[k].string() + " has " + std::to_string(series.n_samples()) +
                       " rows, story '" + s.story_id + "' has " + std::to_string(s.n_trs) + " TRs");
    if (k == 0) out.resize(paired.Xds.rows(), series.n_dims());
    if (series.n_dims() != out.cols()) throw InputError("low-level feature width differs across stories");
    out.middleRows(row, s.n_trs) = series.data;
    row += s.n_trs;
  }
  return out;
}

ResidualPaired residualize_paired(const io::PairedDir& paired, const Matrix& lowlevel_rows,
                                  const std::vector<double>& alpha_grid) {
  if (lowlevel_rows.rows() != paired.Xds.rows()) throw InputError("low-level rows do not match the paired data");
  const std::vector<io::Split> tr_s{io::Split::Train, io::Split::Val};
  const std::vector<io::Split> te_s{io::Split::Test};
  const auto train = io::select_rows(paired, tr_s);
  const auto test = io::select_rows(paired, te_s);
  const auto res = lowlevel::residualize(train.Xds, test.Xds, io::gather_rows(lowlevel_rows, paired.stories, tr_s),
                                         io::gather_rows(lowlevel_rows, paired.stories, te_s), alpha_grid,
                                         train.story_lengths);
  ResidualPaired out;
  auto& r = out.paired;
  r.pairing = paired.pairing;
  r.layer = paired.layer;
  for (const auto& s : paired.stories)
    if (s.split != io::Split::Test) r.stories.push_back(s);
  for (const auto& s : paired.stories)
    if (s.split == io::Split::Test) r.stories.push_back(s);
  r.Xds.resize(paired.Xds.rows(), paired.Xds.cols());
  r.Xds << res.train, res.test;
  r.Y.resize(paired.Y.rows(), paired.Y.cols());
  r.Y << train.Y, test.Y;
  const Matrix times = paired.tr_times_s;
  Matrix t(times.rows(), 1);
  t << io::gather_rows(times, paired.stories, tr_s), io::gather_rows(times, paired.stories, te_s);
  r.tr_times_s = t.col(0);
  std::vector<Eigen::Index> lengths;
  for (const auto& s : r.stories) lengths.push_back(s.n_trs);
  r.X = io::fir_by_story(r.Xds, lengths, paired.pairing.fir_delays);
  out.alpha_per_dim = res.alpha_per_dim;
  return out;
}

std::vector<semphon::WordTriple> load_semphon_index(const fs::path& index_path) {
  json idx;
  try {
    idx = json::parse(io::read_text(index_path));
  } catch (const json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  std::vector<semphon::WordTriple> triples;
  try {
    const Matrix vectors = io::load_matrix(resolve(index_path.parent_path(), idx.at("vectors").get<std::string>()));
    auto row = [&](const json& t, const char* key) -> Vector {
      const auto r = t.at(key).get<long long>();
      if (r < 0 || r >= vectors.rows())
        throw InputError(index_path.string() + ": " + key + " " + std::to_string(r) + " out of range");
      return vectors.row(r).transpose();
    };
    for (const auto& t : idx.at("triples"))
      triples.push_back({row(t, "word_row"), row(t, "semantic_row"), row(t, "phonetic_row"),
                         t.at("word").get<std::string>(), t.at("layer").get<int>()});
  } catch (const json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  return triples;
}

// ---------------------------------------------------------------- stages

namespace {

struct Participant {
  io::DatasetManifest manifest;
  fs::path manifest_path;
  fs::path dir;
};

class Runner {
 public:
  explicit Runner(const PipelineConfig& c) : c_(c) {
    for (const auto& m : c_.manifests) {
      io::ManifestOptions opts;
      opts.check_files = false;
      Participant p{io::load_manifest(m, opts), m, {}};
      p.dir = c_.out / p.manifest.participant_id;
      for (const auto& q : participants_)
        if (q.manifest.participant_id == p.manifest.participant_id)
          throw ConfigError("participant '" + p.manifest.participant_id + "' appears in two manifests");
      participants_.push_back(std::move(p));
    }
    layers_ = c_.layers.empty() ? std::vector<std::string>{""} : c_.layers;
  }

  void run(const std::string& stage) {
    if (stage == "pair") return pair();
    if (stage == "ceiling") return ceiling();
    if (stage == "fit") return fit();
    if (stage == "residualize") return residualize();
    if (stage == "impact") return impact();
    if (stage == "stats") return stats();
    if (stage == "semphon") return semphon();
    throw ConfigError("unknown stage '" + stage + "'");
  }

  void set_context(std::string ctx) { context_ = std::move(ctx); }
  const std::string& context() const { return context_; }

 private:
  static std::string layer_tag(const std::string& layer) { return layer.empty() ? "default" : "layer-" + layer; }
  static std::string layer_label(const std::string& layer) { return layer.empty() ? "default" : layer; }

  static void require(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw StageError(what + " outputs missing (" + p.string() + ")");
  }

  void pair() {
    for (const auto& p : participants_) {
      context_ = p.manifest.participant_id;
      const auto& m = p.manifest;
      if (std::abs(m.tr_s - c_.pairing.tr_s) > 1e-9)
        throw ConfigError("manifest TR " + std::to_string(m.tr_s) + " differs from pairing.tr_s " +
                          std::to_string(c_.pairing.tr_s));
      std::vector<FmriRun> runs;
      for (const auto& s : m.stories) runs.push_back(io::load_fmri_run(s.fmri, m.tr_s, s.story_id, m.participant_id));
      for (const auto& layer : layers_) {
        io::ManifestOptions opts;
        opts.layer = layer;
        io::load_manifest(p.manifest_path, opts);  // file checks for this layer
        std::vector<pairing::PairedDataset> parts;
        std::vector<io::PairedStory> stories;
        for (std::size_t k = 0; k < m.stories.size(); ++k) {
          const auto& s = m.stories[k];
          const fs::path feat = layer.empty() ? s.features : fs::path(io::substitute(s.features.string(), "layer", layer));
          const auto series = io::load_feature_series(feat, 1.0 / c_.pairing.stride_s, c_.pairing.window_s);
          parts.push_back(pairing::build_paired(series, runs[k], c_.pairing));
          stories.push_back({s.story_id, s.split, 0});
        }
        io::save_paired(p.dir / "pair" / layer_tag(layer), io::concat_paired(parts, stories, c_.pairing, layer));
      }
    }
  }

  void ceiling() {
    for (const auto& p : participants_) {
      context_ = p.manifest.participant_id;
      if (p.manifest.repeats.size() < 2)
        throw InputError("manifest lists " + std::to_string(p.manifest.repeats.size()) + " repeats, need at least 2");
      const auto* test = p.manifest.stories_in(io::Split::Test).front();
      std::vector<FmriRun> reps;
      int r = 0;
      for (const auto& path : p.manifest.repeats)
        reps.push_back(io::load_fmri_run(path, p.manifest.tr_s, test->story_id, p.manifest.participant_id, r++));
      const auto map = ceiling::estimate_noise_ceiling(reps, c_.threshold);
      io::save_vector(p.dir / "ceiling" / "nc.npy", map.nc);
      io::save_mask(p.dir / "ceiling" / "mask.npy", map.keep_mask);
      json meta{{"threshold", map.threshold},
                {"n_voxels", map.nc.size()},
                {"n_kept", map.n_kept()},
                {"n_repeats", reps.size()},
                {"mean_nc", map.nc.mean()}};
      io::write_text(p.dir / "ceiling" / "ceiling.json", meta.dump(2) + "\n");
    }
  }

  struct CeilingFiles {
    Vector nc;
    VoxelMask keep;
  };

  CeilingFiles load_ceiling(const Participant& p) const {
    require(p.dir / "ceiling" / "nc.npy", "ceiling");
    require(p.dir / "ceiling" / "mask.npy", "ceiling");
    return {io::load_vector(p.dir / "ceiling" / "nc.npy"), io::load_mask(p.dir / "ceiling" / "mask.npy")};
  }

  // Mean over layers of per-layer alignment, ROI order preserved.
  static std::vector<RoiAlignment> average_layers(const std::vector<std::vector<RoiAlignment>>& per_layer) {
    std::vector<RoiAlignment> mean = per_layer.front();
    for (std::size_t i = 0; i < mean.size(); ++i) {
      double sum = 0.0;
      for (const auto& l : per_layer) sum += l[i].b;
      mean[i].b = sum / static_cast<double>(per_layer.size());
    }
    return mean;
  }

  void fit() {
    const auto rois = load_rois(c_.roi_globs, c_.base_dir);
    csv::Table all{{"participant", "roi", "label", "B", "n_voxels"}, {}, {}};
    for (const auto& p : participants_) {
      context_ = p.manifest.participant_id;
      for (const auto& layer : layers_) require(p.dir / "pair" / layer_tag(layer) / "paired.json", "pair");
      const auto ceil = load_ceiling(p);
      std::vector<std::vector<RoiAlignment>> per_layer;
      csv::Table by_layer{{"roi", "label", "layer", "B", "n_voxels"}, {}, {}};
      for (const auto& layer : layers_) {
        const auto out = fit_and_score(p.dir / "pair" / layer_tag(layer), ceil.nc, ceil.keep, c_.threshold, rois,
                                       c_.ridge, p.dir / "fit" / layer_tag(layer));
        if (out.n_constant > 0)
          log::warn(p.manifest.participant_id + " " + layer_tag(layer) + ": " + std::to_string(out.n_constant) +
                    " voxels have constant predictions");
        for (const auto& a : out.alignment)
          by_layer.rows.push_back({a.roi, a.label, layer_label(layer), csv::format(a.b), std::to_string(a.n_voxels)});
        per_layer.push_back(out.alignment);
      }
      csv::Table mean{{"roi", "label", "B", "n_voxels"}, {}, {}};
      for (const auto& a : average_layers(per_layer)) {
        mean.rows.push_back({a.roi, a.label, csv::format(a.b), std::to_string(a.n_voxels)});
        all.rows.push_back({p.manifest.participant_id, a.roi, a.label, csv::format(a.b), std::to_string(a.n_voxels)});
      }
      csv::write(p.dir / "fit" / "alignment.csv", mean);
      csv::write(p.dir / "fit" / "alignment_by_layer.csv", by_layer);
    }
    context_.clear();
    csv::write(c_.out / "alignment.csv", all);
  }

  void residualize() {
    if (c_.lowlevel.empty()) {
      log::info("residualize: no low-level features configured");
      return;
    }
    for (const auto& p : participants_) {
      context_ = p.manifest.participant_id;
      for (const auto& layer : layers_) {
        const fs::path src = p.dir / "pair" / layer_tag(layer);
        require(src / "paired.json", "pair");
        const auto paired = io::load_paired(src);
        for (const auto& [name, tmpl] : c_.lowlevel) {
          std::vector<fs::path> files;
          for (const auto& s : paired.stories) files.push_back(resolve(c_.base_dir, io::substitute(tmpl, "story", s.story_id)));
          const auto res = residualize_paired(paired, load_lowlevel_rows(files, paired), c_.residual_alphas);
          const fs::path dst = p.dir / "residualize" / name / layer_tag(layer);
          io::save_paired(dst, res.paired);
          io::save_vector(dst / "residual_alpha.npy", res.alpha_per_dim);
        }
      }
    }
  }

  static std::vector<RoiAlignment> read_alignment(const fs::path& path) {
    const auto t = csv::read(path);
    const auto ir = t.require("roi"), il = t.require("label"), ib = t.require("B"), in = t.require("n_voxels");
    std::vector<RoiAlignment> out;
    for (const auto& row : t.rows)
      out.push_back({row[ir], row[il], csv::parse_double(row[ib], t.source), std::stoul(row[in])});
    return out;
  }

  void impact() {
    if (c_.lowlevel.empty()) {
      log::info("impact: no low-level features configured");
      return;
    }
    const auto rois = load_rois(c_.roi_globs, c_.base_dir);
    const std::vector<std::string> header{"roi", "feature", "layer", "B_o", "B_r", "R"};
    csv::Table all{{"participant", "roi", "feature", "layer", "B_o", "B_r", "R"}, {}, {}};
    for (const auto& p : participants_) {
      context_ = p.manifest.participant_id;
      const auto ceil = load_ceiling(p);
      csv::Table table{header, {}, {}};
      auto emit = [&](const RoiAlignment& o, const RoiAlignment& r, const std::string& feature, const std::string& layer) {
        const auto impact = lowlevel::low_level_impact(o.b, r.b);
        if (!impact)
          log::warn(p.manifest.participant_id + " " + o.roi + " " + feature + ": B_o is zero, impact undefined");
        std::vector<std::string> row{o.roi, feature, layer, csv::format(o.b), csv::format(r.b), csv::format(impact)};
        table.rows.push_back(row);
        row.insert(row.begin(), p.manifest.participant_id);
        all.rows.push_back(std::move(row));
      };
      for (const auto& [name, tmpl] : c_.lowlevel) {
        std::vector<std::vector<RoiAlignment>> orig, resid;
        for (const auto& layer : layers_) {
          const fs::path fit_csv = p.dir / "fit" / layer_tag(layer) / "alignment.csv";
          require(fit_csv, "fit");
          const fs::path res_dir = p.dir / "residualize" / name / layer_tag(layer);
          require(res_dir / "paired.json", "residualize");
          orig.push_back(read_alignment(fit_csv));
          const auto out = fit_and_score(res_dir, ceil.nc, ceil.keep, c_.threshold, rois, c_.ridge,
                                         p.dir / "impact" / name / layer_tag(layer));
          resid.push_back(out.alignment);
          if (orig.back().size() != resid.back().size())
            throw StageError("fit outputs are stale: ROI set differs from the current config");
          for (std::size_t i = 0; i < resid.back().size(); ++i)
            emit(orig.back()[i], resid.back()[i], name, layer_label(layer));
        }
        const auto mo = average_layers(orig), mr = average_layers(resid);
        for (std::size_t i = 0; i < mo.size(); ++i) emit(mo[i], mr[i], name, "mean");
      }
      csv::write(p.dir / "impact" / "impact.csv", table);
    }
    context_.clear();
    csv::write(c_.out / "impact.csv", all);
  }

  void stats() {
    require(c_.out / "alignment.csv", "fit");
    std::vector<Comparison> comparisons;
    if (!c_.lowlevel.empty()) {
      require(c_.out / "impact.csv", "impact");
      const auto t = csv::read(c_.out / "impact.csv");
      const auto il = t.require("layer"), ifeat = t.require("feature");
      for (const auto& [name, tmpl] : c_.lowlevel) {
        csv::Table sub{t.header, {}, t.source};
        for (const auto& row : t.rows)
          if (row[il] == "mean" && row[ifeat] == name) sub.rows.push_back(row);
        for (auto& cmp : pair_alignment_tables(sub, "B_o", sub, "B_r", "original_vs_residual")) {
          cmp.feature = name;
          comparisons.push_back(std::move(cmp));
        }
      }
    }
    if (c_.stats_baseline) {
      const auto model = csv::read(c_.out / "alignment.csv");
      const auto base = csv::read(*c_.stats_baseline);
      for (auto& cmp : pair_alignment_tables(model, "B", base, "B", "model_vs_baseline"))
        comparisons.push_back(std::move(cmp));
    }
    io::write_text(c_.out / "stats" / "significance.json", significance_report(comparisons, c_.stats_mode, c_.hash));
  }

  void semphon() {
    if (!c_.semphon_index) {
      log::info("semphon: no index configured");
      return;
    }
    const auto triples = load_semphon_index(*c_.semphon_index);
    csv::Table out{{"layer", "d", "n_triples"}, {}, {}};
    for (const auto& [layer, lp] : semphon::preference_by_layer(triples, c_.semphon_metric))
      out.rows.push_back({std::to_string(layer), csv::format(lp.d), std::to_string(lp.n_triples)});
    csv::write(c_.out / "semphon" / "preference.csv", out);
  }

  const PipelineConfig& c_;
  std::vector<Participant> participants_;
  std::vector<std::string> layers_;
  std::string context_;
};

const std::set<std::string> kUnhashed{"timings.json", "run.json"};

}  // namespace

RunSummary run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages, bool force) {
  try {
    fs::create_directories(config.out / ".stages");
  } catch (const fs::filesystem_error& e) {
    throw ConfigError("output directory not writable: " + config.out.string() + " (" + e.what() + ")");
  }
  Runner runner(config);
  RunSummary summary;

  json timings = json::object();
  if (fs::exists(config.out / "timings.json")) {
    try {
      timings = json::parse(io::read_text(config.out / "timings.json"));
    } catch (const json::exception&) {
      timings = json::object();
    }
  }

  for (const auto& stage : stages) {
    const fs::path marker = config.out / ".stages" / (stage + ".done");
    if (!force && fs::exists(marker) && io::read_text(marker) == config.hash + "\n") {
      log::info("stage " + stage + ": up to date");
      summary.skipped.push_back(stage);
      continue;
    }
    fs::remove(marker);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      runner.set_context({});
      runner.run(stage);
    } catch (const Error& e) {
      const std::string where = runner.context().empty() ? stage : stage + ", " + runner.context();
      if (const auto* d = dynamic_cast<const DataError*>(&e))
        throw DataError("stage " + where + ": " + e.what(), d->index());
      throw_error(e.kind(), "stage " + where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("stage " + stage + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
      throw IoError("stage " + stage + ": " + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timings[stage] = secs;
    io::write_text(marker, config.hash + "\n");
    summary.ran.push_back(stage);
    log::info("stage " + stage + ": done in " + csv::format(std::round(secs * 1000.0) / 1000.0) + " s");
  }

  io::write_text(config.out / "timings.json", timings.dump(2) + "\n");
  const auto tree = hash::hash_tree(config.out, kUnhashed);
  summary.tree_digest = hash::tree_digest(tree);
  std::vector<std::string> completed;
  for (const auto& s : kStages)
    if (fs::exists(config.out / ".stages" / (s + ".done"))) completed.push_back(s);
  json run{{"config_hash", config.hash},
           {"seed", config.seed},
           {"stages_completed", completed},
           {"timings_file", "timings.json"},
           {"outputs", tree},
           {"tree_digest", summary.tree_digest}};
  io::write_text(config.out / "run.json", run.dump(2) + "\n");
  return summary;
}

}  // namespace braintools::pipeline
