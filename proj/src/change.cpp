#include "semshift/change.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace semshift {

std::string to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::proper_noun: return "proper_noun";
    case FilterReason::abbreviation: return "abbreviation";
    case FilterReason::stoplist: return "stoplist";
  }
  throw Error("unknown filter reason");
}

std::optional<FilterReason> filter_candidate(const std::string& word, double caps_fraction,
                                             std::int64_t freq_old, std::int64_t freq_new,
                                             std::optional<double> propernoun_fraction,
                                             const std::unordered_set<std::string>& stoplist,
                                             double caps_threshold, double propernoun_threshold,
                                             std::int64_t min_abbrev_freq) {
  if (stoplist.contains(word)) return FilterReason::stoplist;
  if (propernoun_fraction && *propernoun_fraction > propernoun_threshold)
    return FilterReason::proper_noun;
  if (caps_fraction >= caps_threshold &&
      (freq_old < min_abbrev_freq || freq_new < min_abbrev_freq))
    return FilterReason::abbreviation;
  return std::nullopt;
}

namespace {

Mat normalize_rows(const Mat& m) {
  Mat out = m;
  for (int i = 0; i < out.rows(); ++i) {
    double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

// Top-n rows of `normed` by dot product with row w (cosine, both normalized),
// excluding w. Ties break toward the smaller index; the vocabulary is sorted,
// so index order is lexicographic order.
std::vector<int> top_neighbors(const Mat& normed, int w, int n) {
  Vec sims = normed * normed.row(w).transpose();
  std::vector<int> idx;
  idx.reserve(normed.rows() - 1);
  for (int i = 0; i < normed.rows(); ++i)
    if (i != w) idx.push_back(i);
  auto better = [&](int a, int b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; };
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), better);
  idx.resize(n);
  return idx;
}

double change_score_at(const Mat& normed_old, const Mat& normed_new, int w, int n,
                       const Vocabulary& vocab, std::vector<int>* nbr_old = nullptr,
                       std::vector<int>* nbr_new = nullptr) {
  if (normed_old.row(w).isZero() || normed_new.row(w).isZero())
    throw Error("change_score: zero embedding for word '" + vocab.word(w) + "'");
  std::vector<int> a = top_neighbors(normed_old, w, n);
  std::vector<int> b = top_neighbors(normed_new, w, n);
  std::vector<int> members;
  members.reserve(a.size() + b.size());
  members.insert(members.end(), a.begin(), a.end());
  members.insert(members.end(), b.begin(), b.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());

  Vec s_old(members.size()), s_new(members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    s_old[j] = normed_old.row(w).dot(normed_old.row(members[j]));
    s_new[j] = normed_new.row(w).dot(normed_new.row(members[j]));
  }
  double norm_old = s_old.norm(), norm_new = s_new.norm();
  if (norm_old == 0.0 || norm_new == 0.0)
    throw Error("change_score: degenerate similarity vector for word '" + vocab.word(w) + "'");
  if (nbr_old) *nbr_old = std::move(a);
  if (nbr_new) *nbr_new = std::move(b);
  return 1.0 - s_old.dot(s_new) / (norm_old * norm_new);
}

void check_same_vocab(const EmbeddingModel& old_model, const EmbeddingModel& new_model) {
  if (!old_model.vocab().same_words(new_model.vocab()))
    throw Error("change scoring requires models trained on the same vocabulary");
}

}  // namespace

std::vector<std::string> near_neighbors(const EmbeddingModel& model, const std::string& word,
                                        int n) {
  int w = model.vocab().require(word);
  if (n <= 0 || n >= model.vocab_size())
    throw Error("near_neighbors: n must be in [1, vocab size)");
  Mat normed = normalize_rows(model.U);
  std::vector<std::string> out;
  for (int i : top_neighbors(normed, w, n)) out.push_back(model.vocab().word(i));
  return out;
}

double change_score(const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                    const std::string& word, int n) {
  check_same_vocab(old_model, new_model);
  int w = old_model.vocab().require(word);
  int n_eff = std::min(n, old_model.vocab_size() - 1);
  if (n_eff <= 0) throw Error("change_score: n must be positive");
  return change_score_at(normalize_rows(old_model.U), normalize_rows(new_model.U), w, n_eff,
                         old_model.vocab());
}

std::vector<InnovationRecord> rank_innovations(const EmbeddingModel& old_model,
                                               const EmbeddingModel& new_model, int n, int top_k,
                                               const CandidateFilters& filters,
                                               std::vector<InnovationRecord>* dropped,
                                               int threads) {
  check_same_vocab(old_model, new_model);
  if (top_k <= 0) throw Error("rank_innovations: top_k must be positive");
  const Vocabulary& vocab = old_model.vocab();
  int n_eff = std::min(n, vocab.size() - 1);
  if (n_eff <= 0) throw Error("rank_innovations: n must be positive");

  std::vector<int> survivors;
  for (int w = 0; w < vocab.size(); ++w) {
    const std::string& word = vocab.word(w);
    double caps = filters.caps ? filters.caps->caps_fraction(word) : 0.0;
    std::optional<double> pn;
    if (filters.propernoun_fraction) {
      auto it = filters.propernoun_fraction->find(word);
      if (it != filters.propernoun_fraction->end()) pn = it->second;
    }
    auto reason = filter_candidate(word, caps, vocab.freq_old(w), vocab.freq_new(w), pn,
                                   filters.stoplist, filters.caps_threshold,
                                   filters.propernoun_threshold, filters.min_abbrev_freq);
    if (reason) {
      if (dropped) dropped->push_back({word, 0.0, {}, {}, reason});
    } else {
      survivors.push_back(w);
    }
  }

  Mat normed_old = normalize_rows(old_model.U);
  Mat normed_new = normalize_rows(new_model.U);
  std::vector<InnovationRecord> records(survivors.size());
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      int w = survivors[i];
      std::vector<int> a, b;
      records[i].word = vocab.word(w);
      records[i].change_score = change_score_at(normed_old, normed_new, w, n_eff, vocab, &a, &b);
      for (int x : a) records[i].neighbors_old.push_back(vocab.word(x));
      for (int x : b) records[i].neighbors_new.push_back(vocab.word(x));
    }
  };
  int n_workers = std::clamp<int>(threads, 1, static_cast<int>(survivors.size()) + 1);
  if (n_workers <= 1) {
    score_range(0, survivors.size());
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t)
      pool.emplace_back(score_range, survivors.size() * t / n_workers,
                        survivors.size() * (t + 1) / n_workers);
    for (auto& th : pool) th.join();
  }

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.change_score != b.change_score ? a.change_score > b.change_score : a.word < b.word;
  });
  if (records.size() > static_cast<std::size_t>(top_k)) records.resize(top_k);
  return records;
}

void save_innovations(std::span<const InnovationRecord> ranked,
                      std::span<const InnovationRecord> dropped,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write innovations file: " + path.string());
  out << std::setprecision(17);
  out << "word\tchange_score\treason\n";
  for (const auto& r : ranked) out << r.word << '\t' << r.change_score << "\t\n";
  for (const auto& r : dropped)
    out << r.word << '\t' << r.change_score << '\t' << to_string(*r.filtered_reason) << '\n';
}

std::vector<InnovationRecord> load_innovations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read innovations file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("word\t"))
    throw Error("innovations file missing header: " + path.string());
  std::vector<InnovationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string word, score, reason;
    std::getline(row, word, '\t');
    std::getline(row, score, '\t');
    std::getline(row, reason, '\t');
    if (!reason.empty()) continue;
    out.push_back({word, std::stod(score), {}, {}, std::nullopt});
  }
  return out;
}

std::unordered_set<std::string> load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read stoplist: " + path.string());
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

}  // namespace semshift
