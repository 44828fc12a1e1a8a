#include "braintools/braintools.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "ceiling.hpp"
#include "encoding.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "lowlevel.hpp"
#include "pairing.hpp"
#include "permute.hpp"
#include "pipeline.hpp"
#include "ridge.hpp"
#include "semphon.hpp"
#include "stats.hpp"
#include "tensorio.hpp"
#include "tools.hpp"

struct bt_matrix {
  braintools::Matrix m;
};

namespace {

thread_local std::string g_last_error;

bt_status fail(bt_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
bt_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return BT_OK;
  } catch (const braintools::Error& e) {
    return fail(static_cast<bt_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(BT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BT_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw braintools::InputError(std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bt_matrix* wrap(braintools::Matrix m) { return new bt_matrix{std::move(m)}; }

}  // namespace

extern "C" {

const char* bt_version(void) { return "0.1.0"; }

const char* bt_status_string(bt_status status) {
  switch (status) {
    case BT_OK: return "ok";
    case BT_ERR_INPUT: return "input error";
    case BT_ERR_FORMAT: return "format error";
    case BT_ERR_DATA: return "data error";
    case BT_ERR_MANIFEST: return "manifest error";
    case BT_ERR_COVERAGE: return "coverage error";
    case BT_ERR_DEGENERATE: return "degenerate input";
    case BT_ERR_ROI: return "roi error";
    case BT_ERR_CONFIG: return "config error";
    case BT_ERR_STAGE: return "stage error";
    case BT_ERR_IO: return "i/o error";
    case BT_ERR_NULL_IMPACT: return "null impact";
    case BT_ERR_DEGENERATE_TEST: return "degenerate test";
    case BT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bt_last_error(void) { return g_last_error.c_str(); }

bt_status bt_matrix_create(size_t rows, size_t cols, const double* values, bt_matrix** out) {
  return guarded([&] {
    need(out, "out");
    braintools::Matrix m = braintools::Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (values)
      for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c)
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    *out = wrap(std::move(m));
  });
}

bt_status bt_matrix_load(const char* path, bt_matrix** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = wrap(braintools::io::load_matrix(path));
  });
}

bt_status bt_matrix_save(const bt_matrix* m, const char* path) {
  return guarded([&] {
    need(m, "matrix");
    need(path, "path");
    braintools::io::save_matrix(path, m->m);
  });
}

size_t bt_matrix_rows(const bt_matrix* m) { return m ? static_cast<size_t>(m->m.rows()) : 0; }
size_t bt_matrix_cols(const bt_matrix* m) { return m ? static_cast<size_t>(m->m.cols()) : 0; }

double bt_matrix_get(const bt_matrix* m, size_t row, size_t col) {
  if (!m || row >= static_cast<size_t>(m->m.rows()) || col >= static_cast<size_t>(m->m.cols())) return 0.0;
  return m->m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

bt_status bt_matrix_copy(const bt_matrix* m, double* dst, size_t n) {
  return guarded([&] {
    need(m, "matrix");
    need(dst, "dst");
    const auto rows = static_cast<size_t>(m->m.rows()), cols = static_cast<size_t>(m->m.cols());
    if (n < rows * cols) throw braintools::InputError("destination holds " + std::to_string(n) + " values, need " +
                                                      std::to_string(rows * cols));
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) dst[r * cols + c] = m->m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  });
}

void bt_matrix_free(bt_matrix* m) { delete m; }

bt_status bt_lanczos_downsample(const bt_matrix* series, double rate_hz, double t0_s, const double* targets,
                                size_t n_targets, double tr_s, int lobes, bt_matrix** out) {
  return guarded([&] {
    need(series, "series");
    need(out, "out");
    if (n_targets > 0) need(targets, "targets");
    braintools::FeatureSeries s{series->m, rate_hz, t0_s, "series"};
    s.validate();
    braintools::pairing::PairingConfig cfg;
    cfg.tr_s = tr_s;
    cfg.lanczos_lobes = lobes;
    cfg.validate();
    *out = wrap(braintools::pairing::lanczos_downsample(s, std::span<const double>(targets, n_targets), cfg));
  });
}

bt_status bt_fir_expand(const bt_matrix* x, const int* delays, size_t n_delays, bt_matrix** out) {
  return guarded([&] {
    need(x, "x");
    need(out, "out");
    need(delays, "delays");
    *out = wrap(braintools::pairing::fir_expand(x->m, std::span<const int>(delays, n_delays)));
  });
}

bt_status bt_noise_ceiling(const bt_matrix* const* repeats, size_t n_repeats, double threshold, double* nc_out,
                           unsigned char* keep_out) {
  return guarded([&] {
    need(repeats, "repeats");
    need(nc_out, "nc_out");
    std::vector<braintools::FmriRun> runs;
    for (size_t r = 0; r < n_repeats; ++r) {
      need(repeats[r], "repeat");
      runs.push_back({repeats[r]->m, braintools::kDefaultTr, "repeat", "", static_cast<int>(r)});
    }
    const auto map = braintools::ceiling::estimate_noise_ceiling(runs, threshold);
    for (Eigen::Index v = 0; v < map.nc.size(); ++v) {
      nc_out[v] = map.nc[v];
      if (keep_out) keep_out[v] = map.keep_mask[static_cast<size_t>(v)] ? 1 : 0;
    }
  });
}

bt_status bt_ridge_fit(const bt_matrix* x, const bt_matrix* y, double alpha, bt_matrix** weights_out) {
  return guarded([&] {
    need(x, "x");
    need(y, "y");
    need(weights_out, "weights_out");
    *weights_out = wrap(braintools::ridge::ridge_fit(x->m, y->m, alpha));
  });
}

bt_status bt_pearson(const double* a, const double* b, size_t n, double* r_out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(r_out, "r_out");
    *r_out = braintools::encoding::pearson_r(std::span<const double>(a, n), std::span<const double>(b, n));
  });
}

bt_status bt_normalized_alignment(const double* rho, const double* nc, const unsigned char* keep, size_t n_voxels,
                                  const size_t* roi_voxels, size_t n_roi, double* b_out, size_t* n_used_out) {
  return guarded([&] {
    need(rho, "rho");
    need(nc, "nc");
    need(keep, "keep");
    need(b_out, "b_out");
    if (n_roi > 0) need(roi_voxels, "roi_voxels");
    const auto n = static_cast<Eigen::Index>(n_voxels);
    braintools::ceiling::NoiseCeilingMap map;
    map.nc = Eigen::Map<const braintools::Vector>(nc, n);
    map.keep_mask.assign(n_voxels, false);
    for (size_t v = 0; v < n_voxels; ++v) map.keep_mask[v] = keep[v] != 0;
    braintools::RoiMask roi{"roi", std::vector<std::size_t>(roi_voxels, roi_voxels + n_roi)};
    const auto res =
        braintools::encoding::normalized_alignment(Eigen::Map<const braintools::Vector>(rho, n), map, roi);
    *b_out = res.b;
    if (n_used_out) *n_used_out = res.voxels.size();
  });
}

bt_status bt_low_level_impact(double b_original, double b_residual, double* r_out) {
  return guarded([&] {
    need(r_out, "r_out");
    const auto r = braintools::lowlevel::low_level_impact(b_original, b_residual);
    if (!r) throw braintools::Error(braintools::ErrorKind::NullImpact, "B_o is zero; impact is undefined");
    *r_out = *r;
  });
}

bt_status bt_wilcoxon(const double* a, const double* b, size_t n, bt_wilcoxon_mode mode, bt_wilcoxon_result* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    braintools::stats::WilcoxonMode m = braintools::stats::WilcoxonMode::Auto;
    if (mode == BT_WILCOXON_EXACT) m = braintools::stats::WilcoxonMode::Exact;
    else if (mode == BT_WILCOXON_NORMAL) m = braintools::stats::WilcoxonMode::NormalApprox;
    else if (mode != BT_WILCOXON_AUTO) throw braintools::InputError("unknown Wilcoxon mode");
    const auto r = braintools::stats::wilcoxon_signed_rank(std::span<const double>(a, n), std::span<const double>(b, n), m);
    *out = bt_wilcoxon_result{r.w, r.w_plus, r.w_minus, r.p, r.n, r.n_nonzero, r.exact ? 1 : 0, r.degenerate ? 1 : 0};
    if (r.degenerate) throw braintools::Error(braintools::ErrorKind::DegenerateTest, "all paired differences are zero");
  });
}

bt_status bt_derangement(size_t n_blocks, uint64_t seed, size_t* mapping_out) {
  return guarded([&] {
    need(mapping_out, "mapping_out");
    const auto p = braintools::permute::derangement(n_blocks, seed);
    std::copy(p.begin(), p.end(), mapping_out);
  });
}

bt_status bt_block_permute(const bt_matrix* y, size_t block_len, uint64_t seed, bt_matrix** out) {
  return guarded([&] {
    need(y, "y");
    need(out, "out");
    *out = wrap(braintools::permute::block_permute(y->m, static_cast<Eigen::Index>(block_len), seed));
  });
}

bt_status bt_preference_d(const bt_matrix* words, const bt_matrix* semantic, const bt_matrix* phonetic, bt_metric metric,
                          double* d_out) {
  return guarded([&] {
    need(words, "words");
    need(semantic, "semantic");
    need(phonetic, "phonetic");
    need(d_out, "d_out");
    if (words->m.rows() != semantic->m.rows() || words->m.rows() != phonetic->m.rows())
      throw braintools::InputError("preference_d: word, semantic and phonetic row counts differ");
    std::vector<braintools::semphon::WordTriple> triples;
    for (Eigen::Index i = 0; i < words->m.rows(); ++i)
      triples.push_back({words->m.row(i).transpose(), semantic->m.row(i).transpose(), phonetic->m.row(i).transpose(),
                         std::to_string(i), 0});
    *d_out = braintools::semphon::preference_d(
        triples, metric == BT_METRIC_EUCLIDEAN ? braintools::semphon::Metric::Euclidean : braintools::semphon::Metric::Cosine);
  });
}

bt_status bt_tool_run(const char* tool, const char* options_json, char** result_json) {
  return guarded([&] {
    need(tool, "tool");
    const std::string result = braintools::tools::run_tool(tool, options_json ? options_json : "{}");
    if (result_json) *result_json = dup_string(result);
  });
}

bt_status bt_pipeline_run(const char* config_path, const char* stages_csv, int force, char** summary_json) {
  return guarded([&] {
    need(config_path, "config_path");
    nlohmann::json opts{{"config", config_path}, {"stages", stages_csv ? stages_csv : ""}, {"force", force != 0}};
    const std::string result = braintools::tools::run_tool("run", opts.dump());
    if (summary_json) *summary_json = dup_string(result);
  });
}

void bt_string_free(char* s) { std::free(s); }

}  // extern "C"
