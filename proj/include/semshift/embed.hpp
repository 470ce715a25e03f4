#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semshift/common.hpp"
#include "semshift/corpus.hpp"

namespace semshift {

struct TrainConfig {
  int dim = 300;
  int window = 10;
  int k_negatives = 100;
  int epochs = 50;
  double learning_rate = 0.025;
  // The rate decays linearly to lr_floor_ratio * learning_rate over all pairs.
  double lr_floor_ratio = 1e-4;
  std::uint64_t seed = 1;
  // threads == 1 is the deterministic mode; more threads trade bitwise
  // reproducibility for throughput (unsynchronized row updates).
  int threads = 1;
  // Frequent-word subsampling threshold (word2vec style); 0 disables it.
  double subsample = 0.0;

  void validate() const;
};

// Paired input/output embeddings for one time slice, plus a lazily filled
// cache of exact log-partition values. Models are immutable after training;
// the cache fill is idempotent and safe under concurrent first use.
class EmbeddingModel {
public:
  EmbeddingModel(std::shared_ptr<const Vocabulary> vocab, int dim);
  EmbeddingModel(const EmbeddingModel& other);
  EmbeddingModel& operator=(const EmbeddingModel& other);
  EmbeddingModel(EmbeddingModel&&) noexcept = default;
  EmbeddingModel& operator=(EmbeddingModel&&) noexcept = default;

  Mat U;  // input (target role), one row per vocabulary word
  Mat V;  // output (context role)

  int dim() const { return static_cast<int>(U.cols()); }
  int vocab_size() const { return static_cast<int>(U.rows()); }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }

  // log sum_{w'} exp(v_{w'} . u_target), exact over the vocabulary; computed
  // once per word and cached.
  double log_partition(int target) const;
  double log_partition(const std::string& target) const;
  void warm_log_partitions(std::span<const int> targets) const;
  void invalidate_log_partitions();

  // v_context . u_target - log_partition(target).
  double conditional_logprob(int target, int context) const;
  double conditional_logprob(const std::string& target, const std::string& context) const;

  void save(const std::filesystem::path& prefix, const std::string& slice_id,
            const TrainConfig& cfg,
            const std::filesystem::path& vocab_path) const;
  static EmbeddingModel load(const std::filesystem::path& prefix);
  static EmbeddingModel load(const std::filesystem::path& prefix,
                             std::shared_ptr<const Vocabulary> vocab);

private:
  std::shared_ptr<const Vocabulary> vocab_;
  mutable std::unique_ptr<std::atomic<double>[]> z_values_;
  mutable std::unique_ptr<std::atomic<std::uint8_t>[]> z_ready_;

  void allocate_cache();
  double compute_log_partition(int target) const;
};

// sigma(v_context . u_target - log(k * P_n(context))), the NCE posterior that
// an observed pair came from the data rather than the noise distribution.
double nce_posterior(const EmbeddingModel& model, const std::string& target,
                     const std::string& context, int k);

// NCE objective contribution of one positive pair and its noise draws,
// evaluated at arbitrary parameters; used for gradient checking.
double nce_pair_objective(const Mat& U, const Mat& V, const Vocabulary& vocab,
                          int target, int context, std::span<const int> noise, int k);
// Accumulates the analytic gradient of nce_pair_objective into gU, gV.
void nce_pair_gradient(const Mat& U, const Mat& V, const Vocabulary& vocab,
                       int target, int context, std::span<const int> noise, int k,
                       Mat& gU, Mat& gV);

// Trains skipgram embeddings by stochastic gradient ascent on the NCE
// objective over all (target, context) pairs within +-window, with
// cfg.k_negatives noise draws per pair. Fatal when the corpus yields no pairs.
EmbeddingModel train_nce(std::span<const Document> slice_docs,
                         std::shared_ptr<const Vocabulary> vocab,
                         const TrainConfig& cfg);

// Spearman rank correlation between model cosine similarities and human
// scores over a word-pair benchmark. Pairs with out-of-vocabulary words are
// skipped and counted; fewer than two usable pairs is an error.
struct WordPairBenchmark {
  std::string a, b;
  double score = 0.0;
};
struct SimilarityEval {
  double spearman = 0.0;
  int used = 0;
  int skipped = 0;
};
SimilarityEval eval_similarity(const EmbeddingModel& model,
                               std::span<const WordPairBenchmark> pairs);

// Fraction of a:b :: c:d analogies solved by argmax cosine(w, u_b - u_a + u_c)
// with a, b, c excluded from the candidates.
struct AnalogyQuery {
  std::string a, b, c, d;
};
struct AnalogyEval {
  double accuracy = 0.0;
  int used = 0;
  int skipped = 0;
};
AnalogyEval eval_analogy(const EmbeddingModel& model, std::span<const AnalogyQuery> queries);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace semshift
