#include "semshift/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "semshift/rng.hpp"

namespace semshift {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// RNG stream ids; workers get noise stream 1 + worker_id.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kNoiseStreamBase = 1;
constexpr std::uint64_t kSubsampleStreamBase = 1u << 16;

}  // namespace

void TrainConfig::validate() const {
  if (dim <= 0) throw Error("train config: dim must be positive");
  if (window < 1) throw Error("train config: window must be >= 1");
  if (k_negatives <= 0) throw Error("train config: k_negatives must be positive");
  if (epochs <= 0) throw Error("train config: epochs must be positive");
  if (learning_rate <= 0.0) throw Error("train config: learning_rate must be positive");
  if (lr_floor_ratio <= 0.0 || lr_floor_ratio > 1.0)
    throw Error("train config: lr_floor_ratio must be in (0, 1]");
  if (threads < 1) throw Error("train config: threads must be >= 1");
  if (subsample < 0.0) throw Error("train config: subsample must be >= 0");
}

EmbeddingModel::EmbeddingModel(std::shared_ptr<const Vocabulary> vocab, int dim)
    : vocab_(std::move(vocab)) {
  if (!vocab_ || vocab_->size() == 0) throw Error("embedding model needs a non-empty vocabulary");
  if (dim <= 0) throw Error("embedding dimension must be positive");
  U = Mat::Zero(vocab_->size(), dim);
  V = Mat::Zero(vocab_->size(), dim);
  allocate_cache();
}

EmbeddingModel::EmbeddingModel(const EmbeddingModel& other)
    : U(other.U), V(other.V), vocab_(other.vocab_) {
  allocate_cache();
  for (int w = 0; w < vocab_size(); ++w) {
    if (other.z_ready_[w].load(std::memory_order_acquire)) {
      z_values_[w].store(other.z_values_[w].load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
      z_ready_[w].store(1, std::memory_order_release);
    }
  }
}

EmbeddingModel& EmbeddingModel::operator=(const EmbeddingModel& other) {
  if (this == &other) return *this;
  EmbeddingModel copy(other);
  *this = std::move(copy);
  return *this;
}

void EmbeddingModel::allocate_cache() {
  const int n = vocab_->size();
  z_values_ = std::make_unique<std::atomic<double>[]>(n);
  z_ready_ = std::make_unique<std::atomic<std::uint8_t>[]>(n);
  for (int i = 0; i < n; ++i) z_ready_[i].store(0, std::memory_order_relaxed);
}

void EmbeddingModel::invalidate_log_partitions() {
  for (int i = 0; i < vocab_size(); ++i) z_ready_[i].store(0, std::memory_order_release);
}

double EmbeddingModel::compute_log_partition(int target) const {
  // Max-shifted log-sum-exp over the vocabulary, fixed summation order.
  Vec dots = V * U.row(target).transpose();
  double m = dots.maxCoeff();
  double sum = 0.0;
  for (int i = 0; i < dots.size(); ++i) sum += std::exp(dots[i] - m);
  return m + std::log(sum);
}

double EmbeddingModel::log_partition(int target) const {
  if (target < 0 || target >= vocab_size())
    throw Error("log_partition: word index out of range");
  if (z_ready_[target].load(std::memory_order_acquire))
    return z_values_[target].load(std::memory_order_relaxed);
  double z = compute_log_partition(target);
  z_values_[target].store(z, std::memory_order_relaxed);
  z_ready_[target].store(1, std::memory_order_release);
  return z;
}

double EmbeddingModel::log_partition(const std::string& target) const {
  return log_partition(vocab_->require(target));
}

void EmbeddingModel::warm_log_partitions(std::span<const int> targets) const {
  for (int t : targets) log_partition(t);
}

double EmbeddingModel::conditional_logprob(int target, int context) const {
  if (context < 0 || context >= vocab_size())
    throw Error("conditional_logprob: word index out of range");
  return V.row(context).dot(U.row(target)) - log_partition(target);
}

double EmbeddingModel::conditional_logprob(const std::string& target,
                                           const std::string& context) const {
  return conditional_logprob(vocab_->require(target), vocab_->require(context));
}

double nce_posterior(const EmbeddingModel& model, const std::string& target,
                     const std::string& context, int k) {
  if (k <= 0) throw Error("nce_posterior: k must be positive");
  int t = model.vocab().require(target);
  int c = model.vocab().require(context);
  double s = model.V.row(c).dot(model.U.row(t)) -
             std::log(static_cast<double>(k) * model.vocab().noise_prob(c));
  return sigmoid(s);
}

double nce_pair_objective(const Mat& U, const Mat& V, const Vocabulary& vocab,
                          int target, int context, std::span<const int> noise, int k) {
  auto score = [&](int w) {
    return V.row(w).dot(U.row(target)) -
           std::log(static_cast<double>(k) * vocab.noise_prob(w));
  };
  double obj = log_sigmoid(score(context));
  for (int w : noise) obj += log_sigmoid(-score(w));
  return obj;
}

void nce_pair_gradient(const Mat& U, const Mat& V, const Vocabulary& vocab,
                       int target, int context, std::span<const int> noise, int k,
                       Mat& gU, Mat& gV) {
  auto coeff = [&](int w, double label) {
    double s = V.row(w).dot(U.row(target)) -
               std::log(static_cast<double>(k) * vocab.noise_prob(w));
    return label - sigmoid(s);
  };
  double g = coeff(context, 1.0);
  gU.row(target) += g * V.row(context);
  gV.row(context) += g * U.row(target);
  for (int w : noise) {
    g = coeff(w, 0.0);
    gU.row(target) += g * V.row(w);
    gV.row(w) += g * U.row(target);
  }
}

namespace {

struct TrainState {
  std::vector<std::vector<int>> doc_ids;  // vocab indices, -1 for OOV
  std::vector<std::int64_t> doc_pairs;    // positive pairs per document
  std::vector<double> log_k_noise;        // log(k * P_n(w))
  std::vector<double> keep_prob;          // subsampling keep probability
  const AliasTable* noise_table = nullptr;
};

std::int64_t count_doc_pairs(const std::vector<int>& ids, int window) {
  std::int64_t pairs = 0;
  const int n = static_cast<int>(ids.size());
  for (int t = 0; t < n; ++t) {
    if (ids[t] < 0) continue;
    int lo = std::max(0, t - window);
    int hi = std::min(n - 1, t + window);
    for (int p = lo; p <= hi; ++p)
      if (p != t && ids[p] >= 0) ++pairs;
  }
  return pairs;
}

void train_worker(EmbeddingModel& model, const TrainState& state, const TrainConfig& cfg,
                  std::size_t doc_lo, std::size_t doc_hi, int worker,
                  std::int64_t worker_pairs) {
  const int d = cfg.dim;
  const int window = cfg.window;
  const int k = cfg.k_negatives;
  const double lr0 = cfg.learning_rate;
  const double lr_floor = cfg.learning_rate * cfg.lr_floor_ratio;
  const double total = static_cast<double>(std::max<std::int64_t>(worker_pairs, 1));

  double* u_data = model.U.data();
  double* v_data = model.V.data();
  CounterRng noise_rng(cfg.seed, kNoiseStreamBase + static_cast<std::uint64_t>(worker));
  CounterRng keep_rng(cfg.seed, kSubsampleStreamBase + static_cast<std::uint64_t>(worker));
  std::uint64_t noise_counter = 0;
  std::uint64_t keep_counter = 0;
  std::int64_t pair_idx = 0;

  Vec du(d);
  std::vector<int> kept;  // scratch when subsampling
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t di = doc_lo; di < doc_hi; ++di) {
      const std::vector<int>* ids = &state.doc_ids[di];
      if (cfg.subsample > 0.0) {
        kept.assign(ids->begin(), ids->end());
        for (int& w : kept)
          if (w >= 0 && keep_rng.uniform(keep_counter++) >= state.keep_prob[w]) w = -1;
        ids = &kept;
      }
      const int n = static_cast<int>(ids->size());
      for (int t = 0; t < n; ++t) {
        const int tgt = (*ids)[t];
        if (tgt < 0) continue;
        Eigen::Map<Vec> u(u_data + static_cast<std::ptrdiff_t>(tgt) * d, d);
        const int lo = std::max(0, t - window);
        const int hi = std::min(n - 1, t + window);
        for (int p = lo; p <= hi; ++p) {
          if (p == t) continue;
          const int ctx = (*ids)[p];
          if (ctx < 0) continue;
          double lr = lr0 + (lr_floor - lr0) * (static_cast<double>(pair_idx) / total);
          if (lr < lr_floor) lr = lr_floor;
          du.setZero();
          auto update = [&](int w, double label) {
            Eigen::Map<Vec> v(v_data + static_cast<std::ptrdiff_t>(w) * d, d);
            double s = v.dot(u) - state.log_k_noise[w];
            double g = lr * (label - sigmoid(s));
            du += g * v;
            v += g * u;
          };
          update(ctx, 1.0);
          for (int j = 0; j < k; ++j)
            update(state.noise_table->sample(noise_rng.uniform(noise_counter++)), 0.0);
          u += du;
          ++pair_idx;
        }
      }
    }
  }
}

}  // namespace

EmbeddingModel train_nce(std::span<const Document> slice_docs,
                         std::shared_ptr<const Vocabulary> vocab, const TrainConfig& cfg) {
  cfg.validate();
  if (!vocab) throw Error("train_nce: null vocabulary");

  TrainState state;
  state.doc_ids.reserve(slice_docs.size());
  state.doc_pairs.reserve(slice_docs.size());
  std::int64_t total_pairs = 0;
  for (const Document& doc : slice_docs) {
    std::vector<int> ids(doc.tokens.size());
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) ids[i] = vocab->index(doc.tokens[i]);
    std::int64_t pairs = count_doc_pairs(ids, cfg.window);
    total_pairs += pairs;
    state.doc_pairs.push_back(pairs);
    state.doc_ids.push_back(std::move(ids));
  }
  if (total_pairs == 0)
    throw Error("train_nce: empty training-pair stream (no in-vocabulary pair found)");

  state.log_k_noise.resize(vocab->size());
  for (int w = 0; w < vocab->size(); ++w)
    state.log_k_noise[w] = std::log(static_cast<double>(cfg.k_negatives) * vocab->noise_prob(w));
  if (cfg.subsample > 0.0) {
    double total_tokens = 0.0;
    for (int w = 0; w < vocab->size(); ++w)
      total_tokens += static_cast<double>(vocab->freq_old(w) + vocab->freq_new(w));
    state.keep_prob.resize(vocab->size());
    for (int w = 0; w < vocab->size(); ++w) {
      double f = static_cast<double>(vocab->freq_old(w) + vocab->freq_new(w));
      double ratio = cfg.subsample * total_tokens / f;
      state.keep_prob[w] = std::min(1.0, std::sqrt(ratio) + ratio);
    }
  }
  AliasTable noise_table(vocab->noise());
  state.noise_table = &noise_table;

  EmbeddingModel model(vocab, cfg.dim);
  CounterRng init_rng(cfg.seed, kInitStream);
  double* u_data = model.U.data();
  const std::int64_t n_params = static_cast<std::int64_t>(vocab->size()) * cfg.dim;
  for (std::int64_t i = 0; i < n_params; ++i)
    u_data[i] = (init_rng.uniform(static_cast<std::uint64_t>(i)) - 0.5) / cfg.dim;
  // V starts at zero.

  const int threads = std::min<int>(cfg.threads, static_cast<int>(slice_docs.size()));
  if (threads <= 1) {
    train_worker(model, state, cfg, 0, slice_docs.size(), 0, cfg.epochs * total_pairs);
  } else {
    // Contiguous shards balanced by pair counts; updates are unsynchronized.
    std::vector<std::size_t> bounds{0};
    std::int64_t acc = 0;
    std::size_t next = 1;
    for (std::size_t i = 0; i < state.doc_pairs.size(); ++i) {
      acc += state.doc_pairs[i];
      while (next < static_cast<std::size_t>(threads) &&
             acc >= static_cast<std::int64_t>(next) * total_pairs / threads)
        bounds.push_back(i + 1), ++next;
    }
    while (bounds.size() < static_cast<std::size_t>(threads) + 1)
      bounds.push_back(slice_docs.size());
    bounds.back() = slice_docs.size();

    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      std::int64_t shard_pairs = 0;
      for (std::size_t i = bounds[w]; i < bounds[w + 1]; ++i) shard_pairs += state.doc_pairs[i];
      pool.emplace_back(train_worker, std::ref(model), std::cref(state), std::cref(cfg),
                        bounds[w], bounds[w + 1], w, cfg.epochs * shard_pairs);
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t s = i; s <= j; ++s) ranks[order[s]] = avg;
    i = j + 1;
  }
  return ranks;
}

double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a,
              const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error("spearman: need two equal-length samples of size >= 2");
  std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= ra.size();
  mb /= rb.size();
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) throw Error("spearman: constant ranks");
  return num / std::sqrt(va * vb);
}

SimilarityEval eval_similarity(const EmbeddingModel& model,
                               std::span<const WordPairBenchmark> pairs) {
  std::vector<double> model_sims, human;
  SimilarityEval eval;
  for (const auto& p : pairs) {
    int a = model.vocab().index(p.a);
    int b = model.vocab().index(p.b);
    if (a < 0 || b < 0) {
      ++eval.skipped;
      continue;
    }
    model_sims.push_back(cosine(model.U.row(a), model.U.row(b)));
    human.push_back(p.score);
  }
  if (model_sims.size() < 2)
    throw Error("eval_similarity: fewer than 2 usable benchmark pairs");
  eval.used = static_cast<int>(model_sims.size());
  eval.spearman = spearman(model_sims, human);
  return eval;
}

AnalogyEval eval_analogy(const EmbeddingModel& model, std::span<const AnalogyQuery> queries) {
  AnalogyEval eval;
  int correct = 0;
  for (const auto& q : queries) {
    int a = model.vocab().index(q.a), b = model.vocab().index(q.b);
    int c = model.vocab().index(q.c), d = model.vocab().index(q.d);
    if (a < 0 || b < 0 || c < 0 || d < 0) {
      ++eval.skipped;
      continue;
    }
    ++eval.used;
    Eigen::RowVectorXd query = model.U.row(b) - model.U.row(a) + model.U.row(c);
    int best = -1;
    double best_sim = -2.0;
    for (int w = 0; w < model.vocab_size(); ++w) {
      if (w == a || w == b || w == c) continue;
      double sim = cosine(model.U.row(w), query);
      if (sim > best_sim) {
        best_sim = sim;
        best = w;
      }
    }
    if (best == d) ++correct;
  }
  if (eval.used == 0) throw Error("eval_analogy: no usable analogy tuples");
  eval.accuracy = static_cast<double>(correct) / eval.used;
  return eval;
}

namespace {

void write_matrix(const std::filesystem::path& path, const Mat& m, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding file: " + path.string());
  out << std::setprecision(17);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (int w = 0; w < m.rows(); ++w) {
    out << vocab.word(w);
    for (int i = 0; i < m.cols(); ++i) out << ' ' << m(w, i);
    out << '\n';
  }
}

Mat read_matrix(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embedding file: " + path.string());
  int rows = 0, cols = 0;
  in >> rows >> cols;
  if (rows != vocab.size())
    throw Error("embedding file " + path.string() + " has " + std::to_string(rows) +
                " rows but the vocabulary has " + std::to_string(vocab.size()));
  if (cols <= 0) throw Error("embedding file has invalid dimension: " + path.string());
  Mat m(rows, cols);
  std::string word;
  for (int w = 0; w < rows; ++w) {
    in >> word;
    if (word != vocab.word(w))
      throw Error("embedding file word order mismatch at row " + std::to_string(w) +
                  ": expected '" + vocab.word(w) + "', found '" + word + "'");
    for (int i = 0; i < cols; ++i) in >> m(w, i);
  }
  if (!in) throw Error("truncated embedding file: " + path.string());
  return m;
}

}  // namespace

void EmbeddingModel::save(const std::filesystem::path& prefix, const std::string& slice_id,
                          const TrainConfig& cfg,
                          const std::filesystem::path& vocab_path) const {
  write_matrix(prefix.string() + ".u.vec", U, *vocab_);
  write_matrix(prefix.string() + ".v.vec", V, *vocab_);
  nlohmann::json meta;
  meta["slice"] = slice_id;
  meta["dim"] = dim();
  meta["vocab_file"] = vocab_path.string();
  meta["config"] = {{"dim", cfg.dim},
                    {"window", cfg.window},
                    {"k_negatives", cfg.k_negatives},
                    {"epochs", cfg.epochs},
                    {"learning_rate", cfg.learning_rate},
                    {"lr_floor_ratio", cfg.lr_floor_ratio},
                    {"seed", cfg.seed},
                    {"threads", cfg.threads},
                    {"subsample", cfg.subsample}};
  std::ofstream out(prefix.string() + ".meta.json");
  if (!out) throw Error("cannot write model metadata: " + prefix.string() + ".meta.json");
  out << meta.dump(2) << '\n';
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& prefix) {
  std::ifstream in(prefix.string() + ".meta.json");
  if (!in) throw Error("cannot read model metadata: " + prefix.string() + ".meta.json");
  nlohmann::json meta = nlohmann::json::parse(in);
  auto vocab = std::make_shared<Vocabulary>(
      Vocabulary::load(meta.at("vocab_file").get<std::string>()));
  return load(prefix, std::move(vocab));
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& prefix,
                                    std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab) throw Error("model load: null vocabulary");
  Mat u = read_matrix(prefix.string() + ".u.vec", *vocab);
  Mat v = read_matrix(prefix.string() + ".v.vec", *vocab);
  if (u.cols() != v.cols()) throw Error("model load: U and V dimension mismatch");
  EmbeddingModel model(std::move(vocab), static_cast<int>(u.cols()));
  model.U = std::move(u);
  model.V = std::move(v);
  return model;
}

}  // namespace semshift
