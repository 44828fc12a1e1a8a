#include "synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "errors.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace braintools::synth {

using nlohmann::json;
namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (n_trs < 1 || n_voxels < 1 || n_feature_dims < 1 || n_lowlevel_dims < 1)
    throw InputError("synth: sizes must be positive");
  if (!(snr > 0.0)) throw InputError("synth: snr must be positive");
  if (!(lowlevel_share >= 0.0 && lowlevel_share <= 1.0)) throw InputError("synth: lowlevel_share must be in [0, 1]");
  if (n_repeats < 1) throw InputError("synth: n_repeats must be positive");
  if (n_stories < 2) throw InputError("synth: need at least 2 stories (train + test)");
  if (n_participants < 1) throw InputError("synth: n_participants must be positive");
  if (!(feature_rate_hz > 0.0)) throw InputError("synth: feature_rate_hz must be positive");
  pairing.validate();
  if (n_trs / n_stories <= pairing.fir_delays.back() + 2)
    throw InputError("synth: stories are too short for the FIR delays");
}

SynthSpec spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  SynthSpec s;
  try {
    s.n_trs = j.value("n_trs", s.n_trs);
    s.n_voxels = j.value("n_voxels", s.n_voxels);
    s.n_feature_dims = j.value("n_feature_dims", s.n_feature_dims);
    s.n_lowlevel_dims = j.value("n_lowlevel_dims", s.n_lowlevel_dims);
    s.snr = j.value("snr", s.snr);
    s.lowlevel_share = j.value("lowlevel_share", s.lowlevel_share);
    s.n_repeats = j.value("n_repeats", s.n_repeats);
    s.seed = j.value("seed", s.seed);
    s.n_stories = j.value("n_stories", s.n_stories);
    s.n_participants = j.value("n_participants", s.n_participants);
    s.feature_rate_hz = j.value("feature_rate_hz", s.feature_rate_hz);
    s.pairing.tr_s = j.value("tr_s", s.pairing.tr_s);
    s.pairing.lanczos_lobes = j.value("lanczos_lobes", s.pairing.lanczos_lobes);
    s.pairing.fir_delays = j.value("fir_delays", s.pairing.fir_delays);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string spec_to_json(const SynthSpec& s) {
  json j;
  j["n_trs"] = s.n_trs;
  j["n_voxels"] = s.n_voxels;
  j["n_feature_dims"] = s.n_feature_dims;
  j["n_lowlevel_dims"] = s.n_lowlevel_dims;
  j["snr"] = s.snr;
  j["lowlevel_share"] = s.lowlevel_share;
  j["n_repeats"] = s.n_repeats;
  j["seed"] = s.seed;
  j["n_stories"] = s.n_stories;
  j["n_participants"] = s.n_participants;
  j["feature_rate_hz"] = s.feature_rate_hz;
  j["tr_s"] = s.pairing.tr_s;
  j["lanczos_lobes"] = s.pairing.lanczos_lobes;
  j["fir_delays"] = s.pairing.fir_delays;
  return j.dump(2) + "\n";
}

namespace {

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%02d", prefix, i);
  return buf;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(gen);
  return m;
}

// Piecewise-linear interpolation of TR-centre values onto the sample grid.
Matrix upsample(const Matrix& latent, double tr_s, double rate_hz, Eigen::Index n_samples) {
  Matrix out(n_samples, latent.cols());
  const Eigen::Index n = latent.rows();
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    const double pos = static_cast<double>(i) / rate_hz / tr_s - 0.5;  // in TR-centre units
    if (pos <= 0.0) {
      out.row(i) = latent.row(0);
    } else if (pos >= static_cast<double>(n - 1)) {
      out.row(i) = latent.row(n - 1);
    } else {
      const auto j = static_cast<Eigen::Index>(std::floor(pos));
      const double f = pos - static_cast<double>(j);
      out.row(i) = (1.0 - f) * latent.row(j) + f * latent.row(j + 1);
    }
  }
  return out;
}

Matrix vstack(const std::vector<const Matrix*>& parts) {
  Eigen::Index rows = 0;
  for (const auto* p : parts) rows += p->rows();
  Matrix out(rows, parts.front()->cols());
  Eigen::Index r = 0;
  for (const auto* p : parts) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

Vector column_sd(const Matrix& m) {
  const Vector mean = m.colwise().mean();
  return ((m.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<double>(m.rows() - 1)).sqrt();
}

// Scales each column of `w` so that (design * w) has unit variance per voxel,
// times `gain`. Columns with zero response stay zero.
Matrix unit_variance_weights(const Matrix& design, const Matrix& w, double gain) {
  const Vector sd = column_sd(design * w);
  Matrix out = w;
  for (Eigen::Index v = 0; v < w.cols(); ++v) out.col(v) *= sd[v] > 0.0 ? gain / sd[v] : 0.0;
  return out;
}

}  // namespace

std::size_t SynthDataset::test_story() const { return stories.size() - 1; }

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  SynthDataset data;
  data.spec = spec;
  const double tr = spec.pairing.tr_s;
  const auto& delays = spec.pairing.fir_delays;

  const Matrix mixing = gaussian(spec.n_lowlevel_dims, spec.n_lowlevel_dims, rng::substream(spec.seed, "mixing"));

  for (int k = 0; k < spec.n_stories; ++k) {
    SynthStory story;
    story.story_id = numbered("story", k + 1);
    if (k == spec.n_stories - 1) {
      story.split = io::Split::Test;
    } else if (spec.n_stories >= 3 && k == spec.n_stories - 2) {
      story.split = io::Split::Val;
    } else {
      story.split = io::Split::Train;
    }
    const Eigen::Index len = spec.n_trs / spec.n_stories + (k < spec.n_trs % spec.n_stories ? 1 : 0);
    const Matrix sem_latent = gaussian(len, spec.n_feature_dims, rng::substream(spec.seed, "stimulus/sem/" + story.story_id));
    const Matrix low_latent =
        gaussian(len, spec.n_lowlevel_dims, rng::substream(spec.seed, "stimulus/low/" + story.story_id));

    const auto n_samples = static_cast<Eigen::Index>(std::ceil(static_cast<double>(len) * tr * spec.feature_rate_hz));
    FeatureSeries sem_stream{upsample(sem_latent, tr, spec.feature_rate_hz, n_samples), spec.feature_rate_hz, 0.0,
                             story.story_id + "/sem"};
    FeatureSeries low_stream{upsample(low_latent, tr, spec.feature_rate_hz, n_samples), spec.feature_rate_hz, 0.0,
                             story.story_id + "/low"};

    story.features.data.resize(n_samples, spec.n_feature_dims + spec.n_lowlevel_dims);
    story.features.data << sem_stream.data, low_stream.data * mixing;
    story.features.sample_rate_hz = spec.feature_rate_hz;
    story.features.t0_s = 0.0;
    story.features.name = story.story_id;

    const auto targets = pairing::tr_centers(len, tr);
    const Matrix sem_ds = pairing::lanczos_downsample(sem_stream, targets, spec.pairing);
    const Matrix low_ds = pairing::lanczos_downsample(low_stream, targets, spec.pairing);
    story.lowlevel.data = low_ds;
    story.lowlevel.sample_rate_hz = 1.0 / tr;
    story.lowlevel.t0_s = 0.5 * tr;
    story.lowlevel.name = story.story_id + "/lowlevel";
    story.sem_design = pairing::fir_expand(sem_ds, delays);
    story.low_design = pairing::fir_expand(low_ds, delays);
    data.stories.push_back(std::move(story));
  }

  std::vector<const Matrix*> sem_parts, low_parts;
  for (const auto& s : data.stories) {
    sem_parts.push_back(&s.sem_design);
    low_parts.push_back(&s.low_design);
  }
  const Matrix sem_all = vstack(sem_parts);
  const Matrix low_all = vstack(low_parts);
  const auto& test = data.stories[data.test_story()];

  for (int p = 0; p < spec.n_participants; ++p) {
    SynthParticipant part;
    part.participant_id = numbered("sub", p + 1);
    const std::string base = "participant/" + part.participant_id;
    part.w_sem = unit_variance_weights(
        sem_all, gaussian(sem_all.cols(), spec.n_voxels, rng::substream(spec.seed, base + "/w_sem")),
        std::sqrt(1.0 - spec.lowlevel_share));
    part.w_low = unit_variance_weights(
        low_all, gaussian(low_all.cols(), spec.n_voxels, rng::substream(spec.seed, base + "/w_low")),
        std::sqrt(spec.lowlevel_share));
    const Matrix signal_all = sem_all * part.w_sem + low_all * part.w_low;
    part.noise_sd = column_sd(signal_all) / std::sqrt(spec.snr);
    part.nc_true = Vector::Constant(spec.n_voxels, std::sqrt(spec.snr / (1.0 + spec.snr)));

    auto noisy = [&](const SynthStory& s, const std::string& stream) {
      Matrix y = s.sem_design * part.w_sem + s.low_design * part.w_low;
      const Matrix noise = gaussian(y.rows(), y.cols(), rng::substream(spec.seed, base + "/noise/" + stream));
      y += noise * part.noise_sd.asDiagonal();
      return y;
    };

    for (int r = 0; r < spec.n_repeats; ++r) {
      FmriRun run{noisy(test, test.story_id + "/repeat/" + std::to_string(r)), tr, test.story_id, part.participant_id, r};
      part.repeats.push_back(std::move(run));
    }
    for (const auto& s : data.stories) {
      if (&s == &test) {
        part.runs.push_back(part.repeats.front());
      } else {
        part.runs.push_back(FmriRun{noisy(s, s.story_id), tr, s.story_id, part.participant_id, 0});
      }
    }
    data.participants.push_back(std::move(part));
  }
  return data;
}

std::vector<RoiMask> default_rois(Eigen::Index n_voxels) {
  const auto n = static_cast<std::size_t>(n_voxels);
  const std::size_t split = std::max<std::size_t>(1, (n * 3) / 5);
  RoiMask late{"late_language", {}};
  RoiMask aud{"primary_auditory", {}};
  for (std::size_t v = 0; v < n; ++v) (v < split ? late : aud).voxel_indices.push_back(v);
  std::vector<RoiMask> out{late};
  if (!aud.voxel_indices.empty()) out.push_back(aud);
  return out;
}

void write_dataset(const SynthDataset& data, const fs::path& out) {
  fs::create_directories(out);
  io::write_text(out / "spec.json", spec_to_json(data.spec));
  for (const auto& s : data.stories) {
    io::save_feature_series(out / "stimuli" / (s.story_id + ".npy"), s.features);
    io::save_feature_series(out / "lowlevel" / (s.story_id + ".npy"), s.lowlevel);
  }
  for (const auto& roi : default_rois(data.spec.n_voxels)) io::save_roi(out / "rois" / (roi.label + ".json"), roi);

  json manifests = json::array();
  for (const auto& p : data.participants) {
    const fs::path dir = out / p.participant_id;
    io::DatasetManifest m;
    m.participant_id = p.participant_id;
    m.tr_s = data.spec.pairing.tr_s;
    for (std::size_t k = 0; k < data.stories.size(); ++k) {
      const auto& s = data.stories[k];
      const fs::path fmri = fs::path("fmri") / (s.story_id + ".npy");
      io::save_matrix(dir / fmri, p.runs[k].data);
      m.stories.push_back({s.story_id, fs::path("..") / "stimuli" / (s.story_id + ".npy"), fmri, s.split});
    }
    for (const auto& r : p.repeats) {
      const fs::path rel = fs::path("repeats") / ("rep-" + std::to_string(r.repeat_index) + ".npy");
      io::save_matrix(dir / rel, r.data);
      m.repeats.push_back(rel);
    }
    io::save_manifest(dir / "manifest.json", m);
    io::save_matrix(dir / "truth" / "w_sem.npy", p.w_sem);
    io::save_matrix(dir / "truth" / "w_low.npy", p.w_low);
    io::save_vector(dir / "truth" / "noise_sd.npy", p.noise_sd);
    io::save_vector(dir / "truth" / "nc_true.npy", p.nc_true);
    manifests.push_back((fs::path(p.participant_id) / "manifest.json").generic_string());
  }

  const auto& pc = data.spec.pairing;
  json config;
  config["manifests"] = manifests;
  config["out"] = "results";
  config["seed"] = data.spec.seed;
  config["pairing"] = {{"window_s", pc.window_s},
                       {"stride_s", pc.stride_s},
                       {"tr_s", pc.tr_s},
                       {"lanczos_lobes", pc.lanczos_lobes},
                       {"fir_delays", pc.fir_delays}};
  config["ridge"] = {{"alphas", "1e0..1e4:10"}, {"folds", "story"}, {"standardize", true}};
  config["ceiling"] = {{"threshold", 0.4}};
  config["rois"] = {"rois/*.json"};
  config["lowlevel"] = {{"synthetic", "lowlevel/{story}.npy"}};
  config["stats"] = {{"mode", "auto"}};
  io::write_text(out / "config.json", config.dump(2) + "\n");
}

}  // namespace braintools::synth
