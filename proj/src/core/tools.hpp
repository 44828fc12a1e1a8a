#pragma once

// File-level commands behind the CLI subcommands. Each takes its options as a
// JSON object (keys mirror the CLI flags) and returns a JSON summary.
//
//   pair        features[], fmri[], stories[]?, splits[]?, tr, window, stride,
//               lobes, delays[], layer?, out
//   ceiling     repeats[], threshold, tr?, out, mask_out?
//   fit         paired, nc, mask?, threshold?, roi[], alphas, folds, standardize?, out
//   residualize paired, lowlevel[] (one path per story, or one template with {story}),
//               alphas?, out
//   impact      original, residual (alignment CSVs), feature, layer?, out
//   stats       a, b, column_a?, column_b?, mode?, out
//   semphon     index, metric?, out
//   synth       spec (path) or spec_json, out
//   permute     fmri, block?, seed?, out
//   power       audio, sr, tr, out
//   phones      alignments, order, vocab?, oov?, n_trs, tr, out
//   run         config, stages?, force?

#include <string>
#include <vector>

namespace braintools::tools {

std::string run_tool(const std::string& name, const std::string& options_json);

const std::vector<std::string>& tool_names();

}  // namespace braintools::tools
