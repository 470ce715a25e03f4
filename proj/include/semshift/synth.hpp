#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semshift/common.hpp"
#include "semshift/corpus.hpp"
#include "semshift/embed.hpp"

namespace semshift {

// A vocabulary word whose inserted context windows switch from one topic's
// unigram distribution to another's at the transition year.
struct PlantedWord {
  std::string word;
  int topic_old = 0;
  int topic_new = 1;
  int transition_year = 0;
};

struct SynthConfig {
  int vocab_size = 2000;
  int n_topics = 4;
  int topic_size = 100;
  int docs_per_slice = 1000;
  int doc_len_min = 20;
  int doc_len_max = 40;
  int year_old_lo = 1990, year_old_hi = 1994;
  int year_new_lo = 2005, year_new_hi = 2009;
  std::vector<PlantedWord> planted;
  // Probability that a document carries a given planted word at all; carried
  // words get 1..windows_max inserted context windows.
  double contain_prob = 0.5;
  int windows_max = 2;
  // Adoption of the new topic follows a logistic in (year - transition year)
  // with this width, plus per-document uniform jitter, clamped to [0, 1].
  double adoption_width = 2.0;
  double adoption_jitter = 0.25;
  // citations ~ Poisson(exp(a + b * true_progressiveness)).
  double citation_a = 1.0;
  double citation_b = 0.7;
  std::uint64_t seed = 1;

  void validate() const;
};

SynthConfig synth_config_from_file(const std::filesystem::path& path);

struct SynthResult {
  std::vector<Document> docs;  // old slice first, then new slice
  // (new - old) window count ratio per document, 0 without planted windows.
  std::vector<double> true_progressiveness;
};

// Deterministic per seed; documents use independent RNG streams so the result
// does not depend on generation order.
SynthResult generate(const SynthConfig& cfg);

// Raw-corpus JSONL (id, year, text, citations, outdegree, n_authors) plus a
// "<path>.truth.tsv" sidecar with the per-document true progressiveness.
void write_synth_corpus(const SynthResult& result, const std::filesystem::path& path);

// Exact conditional distribution P(context | target) by direct softmax over
// the vocabulary. Guarded to small vocabularies; this is a test oracle.
Vec exact_softmax_oracle(const Mat& U, const Mat& V, int target);

// Reference usage score: sum of log P_new(ctx|w*) - log P_old(ctx|w*) over
// all in-vocabulary context positions of w*, with probabilities from
// exact_softmax_oracle. Shares no scoring code with usage_progressiveness.
double brute_force_usage_score(const Document& doc, const std::string& word,
                               const EmbeddingModel& old_model,
                               const EmbeddingModel& new_model, int window);

}  // namespace semshift
