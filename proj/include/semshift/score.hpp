#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semshift/corpus.hpp"
#include "semshift/embed.hpp"

namespace semshift {

struct UsageScore {
  std::string doc_id;
  std::string word;
  double r = 0.0;  // log-likelihood ratio, nats
  int n_occurrences = 0;
};

struct ScoreRow {
  std::string id;
  int year = 0;
  double m = 0.0;    // max usage score over innovations present
  int n_count = 0;   // innovations scoring above their corpus-wide median
  double z = 0.0;    // per-year standardized m
  int quartile = 0;  // 1..4, or 0 when has_innovations is false
  bool has_innovations = false;
};

using ScoreTable = std::vector<ScoreRow>;

// r_{w*,doc}: sum over occurrences of w* and in-document context positions
// within +-window of the difference in (v_ctx . u_w* - Z_w*) between the new
// and the aligned old model. Out-of-vocabulary contexts are skipped. The Z
// terms come from the models' log-partition caches.
UsageScore usage_progressiveness(const Document& doc, const std::string& word,
                                 const EmbeddingModel& old_model,
                                 const EmbeddingModel& new_model, int window);

// Max usage score over the innovations that occur in the document; empty when
// none occurs.
std::optional<double> document_max_score(const Document& doc,
                                         std::span<const std::string> innovations,
                                         const EmbeddingModel& old_model,
                                         const EmbeddingModel& new_model, int window);

// Innovations in the document whose usage score strictly exceeds that
// innovation's median score over the documents containing it.
int document_count_score(const Document& doc, std::span<const std::string> innovations,
                         std::span<const double> innovation_medians,
                         const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                         int window);

// z_i = (m_i - mean_year) / population std_year over has_innovations rows.
// Years with one scored document or zero spread get z = 0.
void zscore_by_year(ScoreTable& table);

// Rank-based quartile labels (1..4) over the given values; bins differ in
// size by at most one and equal values always land in the same (lower) bin.
std::vector<int> quartile_bin(std::span<const double> zs);

// Full per-document scoring: usage scores for every innovation occurrence,
// max and count aggregation, per-year z, global quartiles. Documents without
// innovations get has_innovations=false, z=0 and quartile 0. Log partitions
// are pre-warmed; the per-document phase is read-only on the models.
ScoreTable score_documents(std::span<const Document> docs,
                           std::span<const std::string> innovations,
                           const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                           int window, int threads = 1);

// TSV with header: id, year, m, n_count, z, quartile, has_innovations.
// Quartile is Q1..Q4 or NA; has_innovations is 0/1.
void save_scores(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable load_scores(const std::filesystem::path& path);

}  // namespace semshift
