#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semshift/common.hpp"

namespace semshift {

struct Document {
  std::string id;
  int year = 0;
  std::vector<std::string> tokens;
  std::int64_t citations = 0;
  std::int64_t outdegree = 0;
  std::optional<std::int64_t> n_authors;
  int length = 0;  // number of unique token types
};

// Lowercases, splits on whitespace, peels leading/trailing ASCII punctuation
// into single-character tokens, keeps internal punctuation (hyphens,
// apostrophes, decimal points) intact.
std::vector<std::string> tokenize(std::string_view text);

int unique_token_count(std::span<const std::string> tokens);

// Per-word capitalization statistics, accumulated over raw (pre-lowercasing)
// tokens and keyed by the lowercased form.
class CapsStats {
public:
  void add(const std::string& lowered, bool all_caps);
  // Fraction of occurrences written in all capital letters; 0 for unseen words.
  double caps_fraction(const std::string& word) const;

  void save(const std::filesystem::path& path) const;
  static CapsStats load(const std::filesystem::path& path);

private:
  struct Counts {
    std::int64_t total = 0;
    std::int64_t all_caps = 0;
  };
  std::unordered_map<std::string, Counts> counts_;
};

struct IngestResult {
  std::vector<Document> docs;
  std::size_t skipped = 0;
  CapsStats caps;
};

// Record layouts understood by ingest(). Only line-delimited JSON is
// implemented; the id exists so the reader can grow without an interface
// change.
enum class RecordFormat { jsonl };

RecordFormat record_format_from_string(const std::string& name);

// Reads one record per line: fields id (string), year (int), text (string),
// citations (int), outdegree (int), n_authors (int, optional). Malformed
// records are skipped and counted; an unreadable file is fatal.
IngestResult ingest(const std::filesystem::path& path,
                    RecordFormat format = RecordFormat::jsonl);

struct CorpusSlices {
  // All documents, sorted by (year, id); slices are the head and tail.
  std::vector<Document> docs;
  std::size_t slice_size = 0;

  std::span<const Document> old_docs() const {
    return {docs.data(), slice_size};
  }
  std::span<const Document> new_docs() const {
    return {docs.data() + (docs.size() - slice_size), slice_size};
  }
};

// Sorts by (year, id) and takes the oldest/newest n_slice documents. Fatal if
// the corpus holds fewer than 2 * n_slice documents.
CorpusSlices slice(std::vector<Document> corpus, std::size_t n_slice);

// Word <-> index map shared by both time slices, with per-slice frequencies
// and the unigram noise distribution over pooled counts.
class Vocabulary {
public:
  static Vocabulary build(const CorpusSlices& slices, std::int64_t min_count_old,
                          std::int64_t min_count_new, double noise_exponent = 1.0);

  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int i) const { return words_[i]; }
  const std::vector<std::string>& words() const { return words_; }
  // -1 when the word is not in the vocabulary.
  int index(const std::string& word) const;
  int require(const std::string& word) const;  // throws Error naming the word

  std::int64_t freq_old(int i) const { return freq_old_[i]; }
  std::int64_t freq_new(int i) const { return freq_new_[i]; }
  double noise_prob(int i) const { return noise_[i]; }
  const std::vector<double>& noise() const { return noise_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool same_words(const Vocabulary& other) const { return words_ == other.words_; }

private:
  std::vector<std::string> words_;  // sorted lexicographically
  std::unordered_map<std::string, int> index_;
  std::vector<std::int64_t> freq_old_, freq_new_;
  std::vector<double> noise_;

  void rebuild_index();
};

// Tokenized-corpus sidecar files written by the ingest stage.
void save_documents(std::span<const Document> docs, const std::filesystem::path& path);
std::vector<Document> load_documents(const std::filesystem::path& path);

}  // namespace semshift
