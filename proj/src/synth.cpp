#include "semshift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "semshift/config.hpp"
#include "semshift/rng.hpp"

namespace semshift {

namespace {

constexpr std::uint64_t kDocStreamBase = 1ull << 32;
constexpr std::uint64_t kCiteStreamBase = 1ull << 33;

std::string topic_word(int topic, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%02dw%03d", topic, i);
  return buf;
}

std::string filler_word(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "f%05d", i);
  return buf;
}

std::vector<double> harmonic_weights(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 1.0 / (i + 1.0);
  return w;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void SynthConfig::validate() const {
  if (n_topics < 1) throw Error("synth config: n_topics must be >= 1");
  if (topic_size < 1) throw Error("synth config: topic_size must be >= 1");
  if (docs_per_slice < 1) throw Error("synth config: docs_per_slice must be >= 1");
  if (doc_len_min < 1 || doc_len_max < doc_len_min)
    throw Error("synth config: document length range is invalid");
  if (year_old_hi < year_old_lo || year_new_hi < year_new_lo)
    throw Error("synth config: year ranges are invalid");
  if (contain_prob < 0.0 || contain_prob > 1.0)
    throw Error("synth config: contain_prob must be in [0, 1]");
  if (windows_max < 1) throw Error("synth config: windows_max must be >= 1");
  if (adoption_width <= 0.0) throw Error("synth config: adoption_width must be positive");
  if (adoption_jitter < 0.0) throw Error("synth config: adoption_jitter must be >= 0");
  int reserved = static_cast<int>(planted.size()) + n_topics * topic_size;
  if (vocab_size <= reserved)
    throw Error("synth config: vocab_size must exceed planted words + topic blocks (" +
                std::to_string(reserved) + ")");
  for (const auto& p : planted) {
    if (p.word.empty()) throw Error("synth config: planted word with empty name");
    if (p.topic_old < 0 || p.topic_old >= n_topics || p.topic_new < 0 ||
        p.topic_new >= n_topics)
      throw Error("synth config: planted word '" + p.word + "' references a missing topic");
    if (p.topic_old == p.topic_new)
      throw Error("synth config: planted word '" + p.word + "' does not change topic");
  }
}

SynthConfig synth_config_from_file(const std::filesystem::path& path) {
  KeyValueMap kv = parse_kv_file(path);
  SynthConfig cfg;
  cfg.vocab_size = static_cast<int>(kv_get_int(kv, "vocab_size", cfg.vocab_size));
  cfg.n_topics = static_cast<int>(kv_get_int(kv, "n_topics", cfg.n_topics));
  cfg.topic_size = static_cast<int>(kv_get_int(kv, "topic_size", cfg.topic_size));
  cfg.docs_per_slice = static_cast<int>(kv_get_int(kv, "docs_per_slice", cfg.docs_per_slice));
  cfg.doc_len_min = static_cast<int>(kv_get_int(kv, "doc_len_min", cfg.doc_len_min));
  cfg.doc_len_max = static_cast<int>(kv_get_int(kv, "doc_len_max", cfg.doc_len_max));
  cfg.year_old_lo = static_cast<int>(kv_get_int(kv, "year_old_lo", cfg.year_old_lo));
  cfg.year_old_hi = static_cast<int>(kv_get_int(kv, "year_old_hi", cfg.year_old_hi));
  cfg.year_new_lo = static_cast<int>(kv_get_int(kv, "year_new_lo", cfg.year_new_lo));
  cfg.year_new_hi = static_cast<int>(kv_get_int(kv, "year_new_hi", cfg.year_new_hi));
  cfg.contain_prob = kv_get_real(kv, "contain_prob", cfg.contain_prob);
  cfg.windows_max = static_cast<int>(kv_get_int(kv, "windows_max", cfg.windows_max));
  cfg.adoption_width = kv_get_real(kv, "adoption_width", cfg.adoption_width);
  cfg.adoption_jitter = kv_get_real(kv, "adoption_jitter", cfg.adoption_jitter);
  cfg.citation_a = kv_get_real(kv, "citation_a", cfg.citation_a);
  cfg.citation_b = kv_get_real(kv, "citation_b", cfg.citation_b);
  cfg.seed = static_cast<std::uint64_t>(kv_get_int(kv, "seed", static_cast<std::int64_t>(cfg.seed)));

  // planted = word:topic_old:topic_new:transition_year, comma separated.
  std::string planted = kv_get(kv, "planted", "");
  if (!planted.empty()) {
    cfg.planted.clear();
    std::istringstream list(planted);
    std::string item;
    while (std::getline(list, item, ',')) {
      auto first = item.find_first_not_of(" \t");
      auto last = item.find_last_not_of(" \t");
      if (first == std::string::npos) continue;
      item = item.substr(first, last - first + 1);
      std::istringstream parts(item);
      PlantedWord p;
      std::string field;
      if (!std::getline(parts, p.word, ':') || !std::getline(parts, field, ':'))
        throw Error("synth config: malformed planted entry: " + item);
      p.topic_old = std::stoi(field);
      if (!std::getline(parts, field, ':'))
        throw Error("synth config: malformed planted entry: " + item);
      p.topic_new = std::stoi(field);
      if (!std::getline(parts, field, ':'))
        throw Error("synth config: malformed planted entry: " + item);
      p.transition_year = std::stoi(field);
      cfg.planted.push_back(p);
    }
  }
  cfg.validate();
  return cfg;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const int n_filler = cfg.vocab_size - static_cast<int>(cfg.planted.size()) -
                       cfg.n_topics * cfg.topic_size;
  AliasTable filler_table{harmonic_weights(n_filler)};
  AliasTable topic_table{harmonic_weights(cfg.topic_size)};

  std::vector<std::string> fillers(n_filler);
  for (int i = 0; i < n_filler; ++i) fillers[i] = filler_word(i);
  std::vector<std::vector<std::string>> topics(cfg.n_topics,
                                               std::vector<std::string>(cfg.topic_size));
  for (int t = 0; t < cfg.n_topics; ++t)
    for (int i = 0; i < cfg.topic_size; ++i) topics[t][i] = topic_word(t, i);

  const int n_docs = 2 * cfg.docs_per_slice;
  SynthResult result;
  result.docs.resize(n_docs);
  result.true_progressiveness.resize(n_docs);

  for (int g = 0; g < n_docs; ++g) {
    Rng rng(cfg.seed, kDocStreamBase + static_cast<std::uint64_t>(g));
    const bool old_slice = g < cfg.docs_per_slice;
    const int year_lo = old_slice ? cfg.year_old_lo : cfg.year_new_lo;
    const int year_hi = old_slice ? cfg.year_old_hi : cfg.year_new_hi;

    Document doc;
    char id[24];
    std::snprintf(id, sizeof(id), "synth-%06d", g);
    doc.id = id;
    doc.year = year_lo + static_cast<int>(rng.uniform_int(year_hi - year_lo + 1));

    const int len = cfg.doc_len_min +
                    static_cast<int>(rng.uniform_int(cfg.doc_len_max - cfg.doc_len_min + 1));
    doc.tokens.reserve(len + 5 * cfg.windows_max * cfg.planted.size());
    for (int i = 0; i < len; ++i)
      doc.tokens.push_back(fillers[filler_table.sample(rng.uniform())]);

    int n_old_windows = 0, n_new_windows = 0;
    for (const PlantedWord& p : cfg.planted) {
      if (rng.uniform() >= cfg.contain_prob) continue;
      const int windows = 1 + static_cast<int>(rng.uniform_int(cfg.windows_max));
      double adoption =
          logistic((doc.year - p.transition_year) / cfg.adoption_width) +
          rng.uniform(-cfg.adoption_jitter, cfg.adoption_jitter);
      adoption = std::clamp(adoption, 0.0, 1.0);
      for (int w = 0; w < windows; ++w) {
        const bool use_new = rng.uniform() < adoption;
        use_new ? ++n_new_windows : ++n_old_windows;
        const auto& block = topics[use_new ? p.topic_new : p.topic_old];
        std::vector<std::string> window;
        window.push_back(block[topic_table.sample(rng.uniform())]);
        window.push_back(block[topic_table.sample(rng.uniform())]);
        window.push_back(p.word);
        window.push_back(block[topic_table.sample(rng.uniform())]);
        window.push_back(block[topic_table.sample(rng.uniform())]);
        auto pos = doc.tokens.begin() +
                   rng.uniform_int(static_cast<std::int64_t>(doc.tokens.size()) + 1);
        doc.tokens.insert(pos, window.begin(), window.end());
      }
    }
    const int total_windows = n_old_windows + n_new_windows;
    const double prog =
        total_windows > 0 ? static_cast<double>(n_new_windows - n_old_windows) / total_windows
                          : 0.0;

    Rng cite_rng(cfg.seed, kCiteStreamBase + static_cast<std::uint64_t>(g));
    doc.citations = cite_rng.poisson(std::exp(cfg.citation_a + cfg.citation_b * prog));
    doc.outdegree = cite_rng.poisson(10.0);
    doc.n_authors = 1 + cite_rng.poisson(2.0);
    doc.length = unique_token_count(doc.tokens);

    result.true_progressiveness[g] = prog;
    result.docs[g] = std::move(doc);
  }
  return result;
}

void write_synth_corpus(const SynthResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write synth corpus: " + path.string());
  for (const Document& doc : result.docs) {
    std::string text;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (i) text += ' ';
      text += doc.tokens[i];
    }
    nlohmann::json rec{{"id", doc.id},
                       {"year", doc.year},
                       {"text", text},
                       {"citations", doc.citations},
                       {"outdegree", doc.outdegree},
                       {"n_authors", *doc.n_authors}};
    out << rec.dump() << '\n';
  }
  std::ofstream truth(path.string() + ".truth.tsv");
  if (!truth) throw Error("cannot write synth truth sidecar: " + path.string() + ".truth.tsv");
  truth << std::setprecision(17);
  truth << "id\ttrue_progressiveness\n";
  for (std::size_t i = 0; i < result.docs.size(); ++i)
    truth << result.docs[i].id << '\t' << result.true_progressiveness[i] << '\n';
}

Vec exact_softmax_oracle(const Mat& U, const Mat& V, int target) {
  if (U.rows() != V.rows() || U.cols() != V.cols())
    throw Error("exact_softmax_oracle: U and V shapes differ");
  if (U.rows() > 1024) throw Error("exact_softmax_oracle: vocabulary exceeds the 1024 guard");
  if (target < 0 || target >= U.rows()) throw Error("exact_softmax_oracle: target out of range");
  Vec dots = V * U.row(target).transpose();
  double m = dots.maxCoeff();
  Vec p = (dots.array() - m).exp();
  return p / p.sum();
}

double brute_force_usage_score(const Document& doc, const std::string& word,
                               const EmbeddingModel& old_model,
                               const EmbeddingModel& new_model, int window) {
  if (old_model.vocab_size() > 1024)
    throw Error("brute_force_usage_score: vocabulary exceeds the 1024 guard");
  const Vocabulary& vocab = old_model.vocab();
  const int w = vocab.require(word);
  Vec p_old = exact_softmax_oracle(old_model.U, old_model.V, w);
  Vec p_new = exact_softmax_oracle(new_model.U, new_model.V, w);

  double r = 0.0;
  const int n = static_cast<int>(doc.tokens.size());
  for (int t = 0; t < n; ++t) {
    if (doc.tokens[t] != word) continue;
    for (int j = -window; j <= window; ++j) {
      if (j == 0) continue;
      const int p = t + j;
      if (p < 0 || p >= n) continue;
      const int ctx = vocab.index(doc.tokens[p]);
      if (ctx < 0) continue;
      r += std::log(p_new[ctx]) - std::log(p_old[ctx]);
    }
  }
  return r;
}

}  // namespace semshift
