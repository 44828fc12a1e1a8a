#include "doctest.h"
#include "errors.hpp"
#include "hash.hpp"
#include "json.hpp"
#include "log.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace braintools;
using namespace braintools::pipeline;
using bt_test::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct QuietLog {
  QuietLog() {
    log::set_sink([](std::string_view, std::string_view) {});
  }
  ~QuietLog() { log::set_sink({}); }
};

synth::SynthSpec small_spec(int participants = 5) {
  synth::SynthSpec s;
  s.n_trs = 400;
  s.n_voxels = 40;
  s.n_repeats = 4;
  s.snr = 2.0;
  s.n_participants = participants;
  s.seed = 5;
  return s;
}

fs::path make_dataset(const fs::path& dir, const synth::SynthSpec& spec) {
  synth::write_dataset(synth::generate(spec), dir);
  return dir / "config.json";
}

void edit_config(const fs::path& path, const std::function<void(json&)>& edit) {
  json j = json::parse(io::read_text(path));
  edit(j);
  io::write_text(path, j.dump(2));
}

double csv_value(const csv::Table& t, const std::string& col, std::size_t row) {
  return csv::parse_double(t.rows.at(row).at(t.require(col)), col);
}

}  // namespace

TEST_CASE("full pipeline on a synthetic dataset") {
  QuietLog quiet;
  TempDir tmp("pipe");
  const fs::path cfg_path = make_dataset(tmp.path, small_spec());
  const PipelineConfig cfg = load_config(cfg_path);
  CHECK(cfg.manifests.size() == 5);
  const RunSummary run = run_pipeline(cfg, parse_stages(""));
  CHECK(run.ran == kStages);
  const fs::path out = cfg.out;
  CHECK(fs::is_regular_file(out / "alignment.csv"));
  CHECK(fs::is_regular_file(out / "impact.csv"));
  CHECK(fs::is_regular_file(out / "stats/significance.json"));
  CHECK(fs::is_regular_file(out / "sub-03/pair/default/X.npy"));
  CHECK(fs::is_regular_file(out / "sub-03/ceiling/mask.npy"));
  CHECK(fs::is_regular_file(out / "sub-03/fit/default/per_voxel.csv"));
  CHECK(fs::is_regular_file(out / "sub-03/residualize/synthetic/default/X.npy"));
  CHECK(fs::is_regular_file(out / "timings.json"));

  const auto align = csv::read(out / "alignment.csv");
  CHECK(align.header == std::vector<std::string>{"participant", "roi", "label", "B", "n_voxels"});
  CHECK(align.rows.size() == 10);
  for (std::size_t i = 0; i < align.rows.size(); ++i) CHECK(csv_value(align, "B", i) == doctest::Approx(1.0).epsilon(0.2));

  const auto sig = json::parse(io::read_text(out / "stats/significance.json"));
  REQUIRE(sig.at("tests").size() == 2);
  for (const auto& t : sig.at("tests")) {
    CHECK(t.at("emitted").get<bool>());
    CHECK(t.at("n").get<int>() == 5);
    CHECK(t.at("comparison") == "original_vs_residual");
  }

  const auto meta = json::parse(io::read_text(out / "run.json"));
  CHECK(meta.at("config_hash") == cfg.hash);
  CHECK(meta.at("tree_digest") == run.tree_digest);
  CHECK(meta.at("outputs").contains("alignment.csv"));
  CHECK_FALSE(meta.at("outputs").contains("timings.json"));
  for (const auto& stage : kStages) CHECK(io::read_text(out / ".stages" / (stage + ".done")) == cfg.hash + "\n");

  SUBCASE("rerun is a no-op and force reproduces the digest") {
    const RunSummary again = run_pipeline(cfg, parse_stages(""));
    CHECK(again.ran.empty());
    CHECK(again.skipped == kStages);
    CHECK(again.tree_digest == run.tree_digest);
    const RunSummary forced = run_pipeline(cfg, parse_stages(""), true);
    CHECK(forced.ran == kStages);
    CHECK(forced.tree_digest == run.tree_digest);
  }
  SUBCASE("a copy of the inputs reproduces every output byte") {
    TempDir copy("pipe");
    fs::copy(tmp.path, copy.path, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    fs::remove_all(copy.path / "results");
    const PipelineConfig cfg2 = load_config(copy.path / "config.json");
    CHECK(cfg2.hash == cfg.hash);
    const RunSummary second = run_pipeline(cfg2, parse_stages(""));
    CHECK(second.tree_digest == run.tree_digest);
    CHECK(hash::hash_tree(out, {"timings.json"}) == hash::hash_tree(cfg2.out, {"timings.json"}));
  }
}

TEST_CASE("fit before pair names the missing stage") {
  QuietLog quiet;
  TempDir tmp("pipe");
  const PipelineConfig cfg = load_config(make_dataset(tmp.path, small_spec(1)));
  try {
    run_pipeline(cfg, parse_stages("fit"));
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()).find("pair outputs missing") != std::string::npos);
  }
  run_pipeline(cfg, parse_stages("pair"));
  CHECK_THROWS_AS(run_pipeline(cfg, parse_stages("fit")), StageError);  // ceiling missing
  CHECK_THROWS_AS(run_pipeline(cfg, parse_stages("impact")), StageError);
}

TEST_CASE("planted low-level share is removed by residualization") {
  QuietLog quiet;
  TempDir tmp("pipe");
  synth::SynthSpec s = small_spec(1);
  s.n_trs = 2000;
  s.n_voxels = 100;
  s.lowlevel_share = 1.0;
  s.n_repeats = 10;
  const PipelineConfig cfg = load_config(make_dataset(tmp.path, s));
  run_pipeline(cfg, parse_stages("pair,ceiling,fit,residualize,impact"));
  const auto impact = csv::read(cfg.out / "impact.csv");
  for (std::size_t i = 0; i < impact.rows.size(); ++i) {
    CAPTURE(impact.rows[i][1]);
    CHECK(csv_value(impact, "R", i) >= 80.0);
  }
}

TEST_CASE("layers, baseline comparison and semantic-phonetic index") {
  QuietLog quiet;
  TempDir tmp("pipe");
  const fs::path cfg_path = make_dataset(tmp.path, small_spec(5));
  // Two layer files per story: the original and a noisier copy.
  std::mt19937_64 gen(1);
  for (const auto& entry : fs::directory_iterator(tmp.path / "stimuli")) {
    if (entry.path().extension() != ".npy") continue;
    for (const char* layer : {"1", "2"}) {
      fs::create_directories(tmp.path / "stimuli" / layer);
      FeatureSeries f = io::load_feature_series(entry.path(), 10.0, 0.0);
      if (std::string(layer) == "2") f.data += bt_test::gaussian(f.data.rows(), f.data.cols(), gen);
      io::save_feature_series(tmp.path / "stimuli" / layer / entry.path().filename(), f);
    }
  }
  for (int p = 1; p <= 5; ++p) {
    const fs::path m = tmp.path / ("sub-0" + std::to_string(p)) / "manifest.json";
    json j = json::parse(io::read_text(m));
    for (auto& st : j["stories"])
      st["features"] = "../stimuli/{layer}/" + fs::path(st["features"].get<std::string>()).filename().string();
    io::write_text(m, j.dump(2));
  }
  // Baseline table with lower alignment for every participant.
  csv::Table base{{"participant", "roi", "B"}, {}, {}};
  for (int p = 1; p <= 5; ++p)
    for (const char* roi : {"late_language", "primary_auditory"})
      base.rows.push_back({"sub-0" + std::to_string(p), roi, "0.1"});
  csv::write(tmp / "baseline.csv", base);
  // Semantic-phonetic bundle: semantic neighbours closer than phonetic ones.
  Matrix bundle(6, 3);
  bundle << 1, 0, 0, 0.9, 0.1, 0, 0, 1, 0, 0, 0, 1, 0, 0.95, 0.1, 1, 0, 0;
  io::save_matrix(tmp / "bundle.npy", bundle);
  json idx;
  idx["vectors"] = "bundle.npy";
  idx["triples"] = {{{"word", "a"}, {"layer", 1}, {"word_row", 0}, {"semantic_row", 1}, {"phonetic_row", 2}},
                    {{"word", "b"}, {"layer", 2}, {"word_row", 3}, {"semantic_row", 4}, {"phonetic_row", 5}}};
  io::write_text(tmp / "semphon.json", idx.dump());
  edit_config(cfg_path, [](json& j) {
    j["layers"] = {"1", 2};
    j["stats"]["baseline"] = "baseline.csv";
    j["semphon"] = {{"index", "semphon.json"}};
  });

  const PipelineConfig cfg = load_config(cfg_path);
  CHECK(cfg.layers == std::vector<std::string>{"1", "2"});
  run_pipeline(cfg, parse_stages("all"));
  CHECK(fs::is_regular_file(cfg.out / "sub-01/fit/layer-1/rho.npy"));
  CHECK(fs::is_regular_file(cfg.out / "sub-01/fit/layer-2/rho.npy"));
  const auto by_layer = csv::read(cfg.out / "sub-01/fit/alignment_by_layer.csv");
  CHECK(by_layer.rows.size() == 4);
  const auto impact = csv::read(cfg.out / "impact.csv");
  CHECK(impact.rows.size() == 5 * 2 * 3);  // participants x rois x (2 layers + mean)

  const auto sig = json::parse(io::read_text(cfg.out / "stats/significance.json"));
  int baseline_tests = 0;
  for (const auto& t : sig.at("tests"))
    if (t.at("comparison") == "model_vs_baseline") {
      ++baseline_tests;
      CHECK(t.at("W").get<double>() == 0.0);
      CHECK(t.at("p").get<double>() == doctest::Approx(0.0625));
    }
  CHECK(baseline_tests == 2);

  const auto pref = csv::read(cfg.out / "semphon/preference.csv");
  REQUIRE(pref.rows.size() == 2);
  CHECK(csv_value(pref, "d", 0) < 0.0);
  CHECK(csv_value(pref, "d", 1) < 0.0);
}

TEST_CASE("config validation") {
  TempDir tmp("cfg");
  make_dataset(tmp.path, small_spec(1));
  const fs::path p = tmp / "config.json";
  const std::string original = io::read_text(p);
  auto expect_config_error = [&](const std::function<void(json&)>& edit) {
    io::write_text(p, original);
    edit_config(p, edit);
    CHECK_THROWS_AS(load_config(p), ConfigError);
  };
  expect_config_error([](json& j) { j["typo"] = 1; });
  expect_config_error([](json& j) { j["ridge"]["alpha"] = "1..2:3"; });
  expect_config_error([](json& j) { j["ridge"]["alphas"] = "10..1:3"; });
  expect_config_error([](json& j) { j["ridge"]["folds"] = 1; });
  expect_config_error([](json& j) { j["manifests"] = {"nope/manifest.json"}; });
  expect_config_error([](json& j) { j.erase("manifests"); });
  expect_config_error([](json& j) { j["ceiling"]["threshold"] = 1.5; });
  expect_config_error([](json& j) { j["stats"]["mode"] = "bogus"; });
  expect_config_error([](json& j) { j["semphon"] = {{"index", "missing.json"}}; });
  io::write_text(p, "{not json");
  CHECK_THROWS_AS(load_config(p), ConfigError);
  CHECK_THROWS_AS(load_config(tmp / "absent.json"), ConfigError);

  io::write_text(p, original);
  const auto a = load_config(p);
  edit_config(p, [](json& j) { j["seed"] = 9; });
  CHECK(load_config(p).hash != a.hash);
  CHECK(a.hash.size() == 64);
}

TEST_CASE("alpha grids and stage lists") {
  const auto g = parse_alpha_grid("1e0..1e4:5");
  REQUIRE(g.size() == 5);
  CHECK(g[2] == doctest::Approx(100.0));
  CHECK(parse_alpha_grid("1,10,100") == std::vector<double>{1, 10, 100});
  CHECK(parse_alpha_grid("3.5") == std::vector<double>{3.5});
  CHECK_THROWS_AS(parse_alpha_grid("1..x:3"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("10,1"), ConfigError);
  CHECK(parse_stages("fit,pair,fit") == std::vector<std::string>{"pair", "fit"});
  CHECK(parse_stages("all") == kStages);
  CHECK_THROWS_AS(parse_stages("pair,plot"), ConfigError);
}

TEST_CASE("significance report") {
  csv::Table a{{"participant", "roi", "B"}, {}, {}}, b = a;
  for (int p = 0; p < 8; ++p) {
    a.rows.push_back({"p" + std::to_string(p), "r", csv::format(0.5 + 0.01 * p)});
    b.rows.push_back({"p" + std::to_string(p), "r", "0.1"});
  }
  const auto cmp = pair_alignment_tables(a, "B", b, "B", "x_vs_y");
  REQUIRE(cmp.size() == 1);
  CHECK(cmp[0].a.size() == 8);
  const auto rep = json::parse(significance_report(cmp, stats::WilcoxonMode::Exact, "h"));
  const auto& t = rep.at("tests").at(0);
  CHECK(t.at("p").get<double>() == 0.0078125);
  CHECK(t.at("star").get<bool>());
  CHECK(rep.at("config_hash") == "h");

  auto few = cmp;
  few[0].a.resize(4);
  few[0].b.resize(4);
  few[0].participants.resize(4);
  const auto rep2 = json::parse(significance_report(few, stats::WilcoxonMode::Auto, "h"));
  CHECK_FALSE(rep2.at("tests").at(0).at("emitted").get<bool>());

  auto same = cmp;
  same[0].b = same[0].a;
  const auto rep3 = json::parse(significance_report(same, stats::WilcoxonMode::Auto, "h"));
  CHECK(rep3.at("tests").at(0).at("degenerate").get<bool>());
  CHECK(rep3.at("tests").at(0).at("p").get<double>() == 1.0);
}
