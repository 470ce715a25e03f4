#include "semshift/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include <json.hpp>

namespace semshift {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

bool is_all_caps(std::string_view token) {
  bool has_letter = false;
  for (unsigned char c : token) {
    if (c >= 128) return false;  // non-ASCII letters are not classified
    if (std::isalpha(c)) {
      has_letter = true;
      if (!std::isupper(c)) return false;
    }
  }
  return has_letter;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

// Splits one whitespace-delimited chunk into leading punctuation tokens, the
// core (internal punctuation kept), and trailing punctuation tokens.
template <typename Emit>
void split_chunk(std::string_view chunk, Emit&& emit) {
  std::size_t begin = 0;
  std::size_t end = chunk.size();
  std::vector<std::string_view> lead, trail;
  while (begin < end && is_ascii_punct(chunk[begin])) {
    lead.push_back(chunk.substr(begin, 1));
    ++begin;
  }
  while (end > begin && is_ascii_punct(chunk[end - 1])) {
    trail.push_back(chunk.substr(end - 1, 1));
    --end;
  }
  for (auto t : lead) emit(t);
  if (end > begin) emit(chunk.substr(begin, end - begin));
  for (auto it = trail.rbegin(); it != trail.rend(); ++it) emit(*it);
}

template <typename Emit>
void tokenize_raw(std::string_view text, Emit&& emit) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) split_chunk(text.substr(start, i - start), emit);
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  tokenize_raw(text, [&](std::string_view raw) { tokens.push_back(to_lower(raw)); });
  return tokens;
}

int unique_token_count(std::span<const std::string> tokens) {
  std::unordered_set<std::string_view> types(tokens.begin(), tokens.end());
  return static_cast<int>(types.size());
}

void CapsStats::add(const std::string& lowered, bool all_caps) {
  Counts& c = counts_[lowered];
  ++c.total;
  if (all_caps) ++c.all_caps;
}

double CapsStats::caps_fraction(const std::string& word) const {
  auto it = counts_.find(word);
  if (it == counts_.end() || it->second.total == 0) return 0.0;
  return static_cast<double>(it->second.all_caps) / static_cast<double>(it->second.total);
}

void CapsStats::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write caps stats file: " + path.string());
  std::vector<std::pair<std::string, Counts>> sorted(counts_.begin(), counts_.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [word, c] : sorted)
    out << word << '\t' << c.total << '\t' << c.all_caps << '\n';
}

CapsStats CapsStats::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read caps stats file: " + path.string());
  CapsStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw Error("malformed caps stats line: " + line);
    Counts c;
    c.total = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
    c.all_caps = std::stoll(line.substr(t2 + 1));
    stats.counts_[line.substr(0, t1)] = c;
  }
  return stats;
}

RecordFormat record_format_from_string(const std::string& name) {
  if (name == "jsonl") return RecordFormat::jsonl;
  throw Error("unknown record format: " + name);
}

IngestResult ingest(const std::filesystem::path& path, RecordFormat format) {
  if (format != RecordFormat::jsonl) throw Error("unsupported record format");
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus file: " + path.string());

  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") ||
        !rec.contains("text") || !rec.contains("year") ||
        !rec["year"].is_number_integer() || !rec.contains("citations") ||
        !rec.contains("outdegree")) {
      std::cerr << "warning: skipping malformed record at line " << lineno << "\n";
      ++result.skipped;
      continue;
    }
    Document doc;
    try {
      doc.id = rec["id"].get<std::string>();
      doc.year = rec["year"].get<int>();
      doc.citations = rec["citations"].get<std::int64_t>();
      doc.outdegree = rec["outdegree"].get<std::int64_t>();
      if (rec.contains("n_authors") && !rec["n_authors"].is_null())
        doc.n_authors = rec["n_authors"].get<std::int64_t>();
      const std::string text = rec["text"].get<std::string>();
      tokenize_raw(text, [&](std::string_view raw) {
        std::string lowered = to_lower(raw);
        result.caps.add(lowered, is_all_caps(raw));
        doc.tokens.push_back(std::move(lowered));
      });
    } catch (const nlohmann::json::exception&) {
      std::cerr << "warning: skipping malformed record at line " << lineno << "\n";
      ++result.skipped;
      continue;
    }
    doc.length = unique_token_count(doc.tokens);
    result.docs.push_back(std::move(doc));
  }
  return result;
}

CorpusSlices slice(std::vector<Document> corpus, std::size_t n_slice) {
  if (n_slice == 0) throw Error("slice: n_slice must be positive");
  if (corpus.size() < 2 * n_slice)
    throw Error("slice: corpus has " + std::to_string(corpus.size()) +
                " documents but 2 * n_slice = " + std::to_string(2 * n_slice) +
                " are required");
  std::sort(corpus.begin(), corpus.end(), [](const Document& a, const Document& b) {
    if (a.year != b.year) return a.year < b.year;
    return a.id < b.id;
  });
  return CorpusSlices{std::move(corpus), n_slice};
}

Vocabulary Vocabulary::build(const CorpusSlices& slices, std::int64_t min_count_old,
                             std::int64_t min_count_new, double noise_exponent) {
  std::unordered_map<std::string, std::pair<std::int64_t, std::int64_t>> counts;
  for (const Document& doc : slices.old_docs())
    for (const std::string& tok : doc.tokens) counts[tok].first++;
  for (const Document& doc : slices.new_docs())
    for (const std::string& tok : doc.tokens) counts[tok].second++;

  Vocabulary vocab;
  for (const auto& [word, c] : counts)
    if (c.first >= min_count_old && c.second >= min_count_new) vocab.words_.push_back(word);
  if (vocab.words_.empty())
    throw Error("vocabulary is empty: no word meets min_count_old=" +
                std::to_string(min_count_old) + " and min_count_new=" +
                std::to_string(min_count_new));
  std::sort(vocab.words_.begin(), vocab.words_.end());

  vocab.freq_old_.reserve(vocab.words_.size());
  vocab.freq_new_.reserve(vocab.words_.size());
  double total = 0.0;
  std::vector<double> weights;
  weights.reserve(vocab.words_.size());
  for (const std::string& w : vocab.words_) {
    const auto& c = counts.at(w);
    vocab.freq_old_.push_back(c.first);
    vocab.freq_new_.push_back(c.second);
    double pooled = static_cast<double>(c.first + c.second);
    double weight = noise_exponent == 1.0 ? pooled : std::pow(pooled, noise_exponent);
    weights.push_back(weight);
    total += weight;
  }
  vocab.noise_.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) vocab.noise_[i] = weights[i] / total;
  vocab.rebuild_index();
  return vocab;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(words_.size());
  for (int i = 0; i < size(); ++i) index_[words_[i]] = i;
}

int Vocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

int Vocabulary::require(const std::string& word) const {
  int i = index(word);
  if (i < 0) throw Error("word not in vocabulary: " + word);
  return i;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary file: " + path.string());
  for (int i = 0; i < size(); ++i)
    out << words_[i] << '\t' << freq_old_[i] << '\t' << freq_new_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read vocabulary file: " + path.string());
  Vocabulary vocab;
  std::string line;
  double total = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw Error("malformed vocabulary line: " + line);
    vocab.words_.push_back(line.substr(0, t1));
    vocab.freq_old_.push_back(std::stoll(line.substr(t1 + 1, t2 - t1 - 1)));
    vocab.freq_new_.push_back(std::stoll(line.substr(t2 + 1)));
    total += static_cast<double>(vocab.freq_old_.back() + vocab.freq_new_.back());
  }
  if (vocab.words_.empty()) throw Error("empty vocabulary file: " + path.string());
  vocab.noise_.resize(vocab.words_.size());
  for (std::size_t i = 0; i < vocab.words_.size(); ++i)
    vocab.noise_[i] =
        static_cast<double>(vocab.freq_old_[i] + vocab.freq_new_[i]) / total;
  vocab.rebuild_index();
  return vocab;
}

void save_documents(std::span<const Document> docs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write document file: " + path.string());
  for (const Document& doc : docs) {
    nlohmann::json rec;
    rec["id"] = doc.id;
    rec["year"] = doc.year;
    rec["tokens"] = doc.tokens;
    rec["citations"] = doc.citations;
    rec["outdegree"] = doc.outdegree;
    if (doc.n_authors) rec["n_authors"] = *doc.n_authors;
    out << rec.dump() << '\n';
  }
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read document file: " + path.string());
  std::vector<Document> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    Document doc;
    doc.id = rec.at("id").get<std::string>();
    doc.year = rec.at("year").get<int>();
    doc.tokens = rec.at("tokens").get<std::vector<std::string>>();
    doc.citations = rec.at("citations").get<std::int64_t>();
    doc.outdegree = rec.at("outdegree").get<std::int64_t>();
    if (rec.contains("n_authors")) doc.n_authors = rec["n_authors"].get<std::int64_t>();
    doc.length = unique_token_count(doc.tokens);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace semshift
