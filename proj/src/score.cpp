#include "semshift/score.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace semshift {

namespace {

void check_models(const EmbeddingModel& old_model, const EmbeddingModel& new_model) {
  if (!old_model.vocab().same_words(new_model.vocab()))
    throw Error("scoring requires models with a shared vocabulary");
  if (old_model.dim() != new_model.dim())
    throw Error("scoring requires models of equal dimension");
}

std::vector<int> doc_vocab_ids(const Document& doc, const Vocabulary& vocab) {
  std::vector<int> ids(doc.tokens.size());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) ids[i] = vocab.index(doc.tokens[i]);
  return ids;
}

// r for one word given precomputed token ids and cached log partitions.
double usage_r(std::span<const int> ids, int w, const EmbeddingModel& old_model,
               const EmbeddingModel& new_model, int window, double z_old, double z_new,
               int* occurrences = nullptr) {
  double r = 0.0;
  int occ = 0;
  const int n = static_cast<int>(ids.size());
  for (int t = 0; t < n; ++t) {
    if (ids[t] != w) continue;
    ++occ;
    const int lo = std::max(0, t - window);
    const int hi = std::min(n - 1, t + window);
    for (int p = lo; p <= hi; ++p) {
      if (p == t) continue;
      const int ctx = ids[p];
      if (ctx < 0) continue;
      r += (new_model.V.row(ctx).dot(new_model.U.row(w)) - z_new) -
           (old_model.V.row(ctx).dot(old_model.U.row(w)) - z_old);
    }
  }
  if (occurrences) *occurrences = occ;
  return r;
}

}  // namespace

UsageScore usage_progressiveness(const Document& doc, const std::string& word,
                                 const EmbeddingModel& old_model,
                                 const EmbeddingModel& new_model, int window) {
  check_models(old_model, new_model);
  if (window < 1) throw Error("usage_progressiveness: window must be >= 1");
  const int w = old_model.vocab().require(word);
  UsageScore score;
  score.doc_id = doc.id;
  score.word = word;
  std::vector<int> ids = doc_vocab_ids(doc, old_model.vocab());
  score.r = usage_r(ids, w, old_model, new_model, window, old_model.log_partition(w),
                    new_model.log_partition(w), &score.n_occurrences);
  return score;
}

std::optional<double> document_max_score(const Document& doc,
                                         std::span<const std::string> innovations,
                                         const EmbeddingModel& old_model,
                                         const EmbeddingModel& new_model, int window) {
  if (innovations.empty()) throw Error("document_max_score: empty innovation set");
  std::optional<double> m;
  for (const auto& word : innovations) {
    UsageScore s = usage_progressiveness(doc, word, old_model, new_model, window);
    if (s.n_occurrences == 0) continue;
    if (!m || s.r > *m) m = s.r;
  }
  return m;
}

int document_count_score(const Document& doc, std::span<const std::string> innovations,
                         std::span<const double> innovation_medians,
                         const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                         int window) {
  if (innovations.size() != innovation_medians.size())
    throw Error("document_count_score: innovations and medians differ in length");
  int count = 0;
  for (std::size_t i = 0; i < innovations.size(); ++i) {
    UsageScore s = usage_progressiveness(doc, innovations[i], old_model, new_model, window);
    if (s.n_occurrences > 0 && s.r > innovation_medians[i]) ++count;
  }
  return count;
}

void zscore_by_year(ScoreTable& table) {
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < table.size(); ++i) {
    table[i].z = 0.0;
    if (table[i].has_innovations) by_year[table[i].year].push_back(i);
  }
  for (const auto& [year, rows] : by_year) {
    if (rows.size() < 2) continue;
    double mean = 0.0;
    for (std::size_t i : rows) mean += table[i].m;
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t i : rows) var += (table[i].m - mean) * (table[i].m - mean);
    var /= static_cast<double>(rows.size());
    if (var == 0.0) continue;
    double sd = std::sqrt(var);
    for (std::size_t i : rows) table[i].z = (table[i].m - mean) / sd;
  }
}

std::vector<int> quartile_bin(std::span<const double> zs) {
  const std::size_t n = zs.size();
  if (n < 4) throw Error("quartile_bin: need at least 4 scored documents");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return zs[a] != zs[b] ? zs[a] < zs[b] : a < b;
  });
  std::vector<int> labels(n);
  int prev_bin = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    int bin = static_cast<int>(4 * rank / n);
    // Equal values never straddle a cut; they stay in the lower bin.
    if (rank > 0 && zs[order[rank]] == zs[order[rank - 1]]) bin = prev_bin;
    labels[order[rank]] = bin + 1;
    prev_bin = bin;
  }
  return labels;
}

ScoreTable score_documents(std::span<const Document> docs,
                           std::span<const std::string> innovations,
                           const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                           int window, int threads) {
  check_models(old_model, new_model);
  if (innovations.empty()) throw Error("score_documents: empty innovation set");
  if (window < 1) throw Error("score_documents: window must be >= 1");
  const Vocabulary& vocab = old_model.vocab();

  std::vector<int> innov_ids(innovations.size());
  std::unordered_map<int, int> innov_of_vocab;  // vocab index -> innovation index
  for (std::size_t i = 0; i < innovations.size(); ++i) {
    innov_ids[i] = vocab.require(innovations[i]);
    innov_of_vocab.emplace(innov_ids[i], static_cast<int>(i));
  }
  old_model.warm_log_partitions(innov_ids);
  new_model.warm_log_partitions(innov_ids);
  std::vector<double> z_old(innovations.size()), z_new(innovations.size());
  for (std::size_t i = 0; i < innovations.size(); ++i) {
    z_old[i] = old_model.log_partition(innov_ids[i]);
    z_new[i] = new_model.log_partition(innov_ids[i]);
  }

  // Per document: (innovation index, r) for every innovation present.
  std::vector<std::vector<std::pair<int, double>>> doc_scores(docs.size());
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t d = lo; d < hi; ++d) {
      std::vector<int> ids = doc_vocab_ids(docs[d], vocab);
      std::vector<int> present;
      for (int id : ids) {
        auto it = innov_of_vocab.find(id);
        if (it != innov_of_vocab.end()) present.push_back(it->second);
      }
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      for (int i : present) {
        double r = usage_r(ids, innov_ids[i], old_model, new_model, window, z_old[i], z_new[i]);
        doc_scores[d].emplace_back(i, r);
      }
    }
  };
  int n_workers = std::clamp<int>(threads, 1, docs.empty() ? 1 : static_cast<int>(docs.size()));
  if (n_workers <= 1) {
    score_range(0, docs.size());
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t)
      pool.emplace_back(score_range, docs.size() * t / n_workers,
                        docs.size() * (t + 1) / n_workers);
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<double>> per_innovation(innovations.size());
  for (const auto& scores : doc_scores)
    for (const auto& [i, r] : scores) per_innovation[i].push_back(r);
  std::vector<double> medians(innovations.size(), 0.0);
  for (std::size_t i = 0; i < per_innovation.size(); ++i) {
    auto& v = per_innovation[i];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    medians[i] = v.size() % 2 == 1 ? v[v.size() / 2]
                                   : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  }

  ScoreTable table(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    ScoreRow& row = table[d];
    row.id = docs[d].id;
    row.year = docs[d].year;
    row.has_innovations = !doc_scores[d].empty();
    for (const auto& [i, r] : doc_scores[d])
      if (r > medians[i]) ++row.n_count;
    if (row.has_innovations) {
      row.m = doc_scores[d].front().second;
      for (const auto& [i, r] : doc_scores[d]) row.m = std::max(row.m, r);
    }
  }
  zscore_by_year(table);

  std::vector<std::size_t> scored;
  std::vector<double> zs;
  for (std::size_t d = 0; d < table.size(); ++d)
    if (table[d].has_innovations) {
      scored.push_back(d);
      zs.push_back(table[d].z);
    }
  if (scored.size() >= 4) {
    std::vector<int> labels = quartile_bin(zs);
    for (std::size_t j = 0; j < scored.size(); ++j) table[scored[j]].quartile = labels[j];
  }
  return table;
}

void save_scores(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scores file: " + path.string());
  out << std::setprecision(17);
  out << "id\tyear\tm\tn_count\tz\tquartile\thas_innovations\n";
  for (const auto& row : table) {
    out << row.id << '\t' << row.year << '\t' << row.m << '\t' << row.n_count << '\t' << row.z
        << '\t';
    if (row.quartile >= 1)
      out << 'Q' << row.quartile;
    else
      out << "NA";
    out << '\t' << (row.has_innovations ? 1 : 0) << '\n';
  }
}

ScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read scores file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("id\t"))
    throw Error("scores file missing header: " + path.string());
  ScoreTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    ScoreRow r;
    std::string field;
    std::getline(row, r.id, '\t');
    std::getline(row, field, '\t');
    r.year = std::stoi(field);
    std::getline(row, field, '\t');
    r.m = std::stod(field);
    std::getline(row, field, '\t');
    r.n_count = std::stoi(field);
    std::getline(row, field, '\t');
    r.z = std::stod(field);
    std::getline(row, field, '\t');
    r.quartile = field == "NA" ? 0 : std::stoi(field.substr(1));
    std::getline(row, field, '\t');
    r.has_innovations = field == "1";
    table.push_back(std::move(r));
  }
  return table;
}

}  // namespace semshift
