#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semshift/config.hpp"
#include "semshift/embed.hpp"
#include "semshift/score.hpp"
#include "semshift/validate.hpp"

namespace semshift {

// End-to-end run settings: ingest -> train x2 -> align -> detect -> score ->
// regress -> plot data. Loaded from a flat key = value file; any key can be
// overridden on the command line.
struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path workdir;
  std::size_t slice_size = 0;  // 0 means half the corpus per slice
  std::int64_t vocab_min_old = 5;
  std::int64_t vocab_min_new = 5;
  TrainConfig train;
  int neighbors = 50;
  int top_k = 1000;
  std::filesystem::path stoplist;  // optional
  double caps_threshold = 0.90;
  std::int64_t min_abbrev_freq = 25;
  int score_window = 0;  // 0 means the training window
  int score_threads = 1;
  std::vector<ModelSpec> models = {ModelSpec::M1, ModelSpec::M2, ModelSpec::M3, ModelSpec::M4};
  int bows_top_terms = 5000;
  double bows_lambda = 1.0;
  double bows_subset = 0.05;
  int bootstrap = 1000;
  std::uint64_t seed = 1;

  static PipelineConfig from_file(const std::filesystem::path& path,
                                  const KeyValueMap& overrides = {});
  static PipelineConfig from_kv(const KeyValueMap& kv);
  void validate() const;

  std::filesystem::path path_in_workdir(const std::string& name) const {
    return workdir / name;
  }
};

// FNV-1a 64-bit digest of the file bytes, as fixed-width hex.
std::string file_hash_hex(const std::filesystem::path& path);

struct RegressOptions {
  std::vector<ModelSpec> models = {ModelSpec::M1, ModelSpec::M2, ModelSpec::M3, ModelSpec::M4};
  int bows_top_terms = 5000;
  double bows_lambda = 1.0;
  double bows_subset = 0.05;
  int bootstrap = 1000;
  std::uint64_t seed = 1;
};

// Serialized JSON report: fitted models, LR tests against M1 and M2, the
// overdispersion test, pairwise KS tests on quartile year distributions, the
// univariate quartile table and a score summary. Key order is sorted and no
// timestamps are embedded, so equal inputs give equal bytes.
std::string regression_report(std::span<const Document> docs, const ScoreTable& scores,
                              std::span<const std::string> innovation_words,
                              std::span<const double> innovation_scores,
                              const RegressOptions& opts);

// Runs every stage, skipping those whose manifest still matches its inputs,
// parameters and outputs. A stage output that no longer matches its manifest
// halts the run naming the stage. Returns the report path.
std::filesystem::path run_pipeline(const PipelineConfig& cfg);

// Quartile table for a citations-by-quartile bar chart; the numbers are
// exactly univariate_table's.
void emit_plot_data(const ScoreTable& scores, std::span<const Document> docs,
                    const std::filesystem::path& out_path, int bootstrap_samples = 1000,
                    std::uint64_t seed = 1);

}  // namespace semshift
