#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "semshift/corpus.hpp"
#include "semshift/embed.hpp"

namespace semshift {

enum class FilterReason { proper_noun, abbreviation, stoplist };

std::string to_string(FilterReason reason);

struct InnovationRecord {
  std::string word;
  double change_score = 0.0;
  std::vector<std::string> neighbors_old;
  std::vector<std::string> neighbors_new;
  std::optional<FilterReason> filtered_reason;
};

// Candidate filters applied before change scoring. The caps fraction comes
// from ingestion (pre-lowercasing); the proper-noun fraction is an optional
// externally tagged column; the stoplist doubles as the manual exclusion
// list.
struct CandidateFilters {
  std::unordered_set<std::string> stoplist;
  const CapsStats* caps = nullptr;
  const std::unordered_map<std::string, double>* propernoun_fraction = nullptr;
  double caps_threshold = 0.90;
  double propernoun_threshold = 0.90;
  std::int64_t min_abbrev_freq = 25;
};

// keep -> nullopt; drop -> the reason.
std::optional<FilterReason> filter_candidate(const std::string& word, double caps_fraction,
                                             std::int64_t freq_old, std::int64_t freq_new,
                                             std::optional<double> propernoun_fraction,
                                             const std::unordered_set<std::string>& stoplist,
                                             double caps_threshold = 0.90,
                                             double propernoun_threshold = 0.90,
                                             std::int64_t min_abbrev_freq = 25);

// Top-n vocabulary words by cosine over U rows, excluding the word itself.
// Ties break lexicographically. Requires n < |vocab|.
std::vector<std::string> near_neighbors(const EmbeddingModel& model, const std::string& word,
                                        int n);

// Second-order change: cosine distance between the word's similarity vectors
// to the union of its old and new neighbor sets (union in lexicographic
// order). Range [0, 2].
double change_score(const EmbeddingModel& old_model, const EmbeddingModel& new_model,
                    const std::string& word, int n);

// Scores every vocabulary word that survives the filters, sorts by descending
// change_score (ties lexicographic) and truncates to top_k. When `dropped` is
// given, filtered words are appended to it with their reason and score 0.
std::vector<InnovationRecord> rank_innovations(const EmbeddingModel& old_model,
                                               const EmbeddingModel& new_model, int n, int top_k,
                                               const CandidateFilters& filters,
                                               std::vector<InnovationRecord>* dropped = nullptr,
                                               int threads = 1);

// TSV: word, change_score, reason (empty for ranked words), one header line.
void save_innovations(std::span<const InnovationRecord> ranked,
                      std::span<const InnovationRecord> dropped,
                      const std::filesystem::path& path);
// Loads ranked words only (rows with an empty reason column).
std::vector<InnovationRecord> load_innovations(const std::filesystem::path& path);

std::unordered_set<std::string> load_stoplist(const std::filesystem::path& path);

}  // namespace semshift
