#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "semshift/change.hpp"
#include "semshift/config.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/rng.hpp"
#include "semshift/score.hpp"
#include "semshift/synth.hpp"
#include "semshift/validate.hpp"
#include "temp_dir.hpp"

using namespace semshift;

namespace {

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Small synthetic corpus plus a matching pipeline config file.
std::filesystem::path prepare_corpus(const TempDir& tmp) {
  SynthConfig synth;
  synth.vocab_size = 70;
  synth.n_topics = 2;
  synth.topic_size = 15;
  synth.docs_per_slice = 150;
  synth.doc_len_min = 10;
  synth.doc_len_max = 16;
  synth.planted.push_back({"planted", 0, 1, 2000});
  synth.contain_prob = 0.6;
  synth.seed = 21;
  auto corpus = tmp.file("corpus.jsonl");
  write_synth_corpus(generate(synth), corpus);
  return corpus;
}

std::filesystem::path prepare_config(const TempDir& tmp, const std::filesystem::path& corpus,
                                     const std::string& workdir_name) {
  auto config = tmp.file(workdir_name + ".cfg");
  write_file(config, "corpus = " + corpus.string() + "\n" +
                         "workdir = " + (tmp.path() / workdir_name).string() + "\n" +
                         "vocab_min_old = 2\n"
                         "vocab_min_new = 2\n"
                         "dim = 8\n"
                         "window = 2\n"
                         "k_negatives = 4\n"
                         "epochs = 3\n"
                         "learning_rate = 0.05\n"
                         "neighbors = 5\n"
                         "top_k = 20\n"
                         "bows_top_terms = 30\n"
                         "bows_subset = 0.3\n"
                         "bootstrap = 100\n"
                         "seed = 5\n");
  return config;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("key-value parser handles comments, blanks and errors") {
  auto kv = parse_kv_text("# header\n"
                          "alpha = 1\n"
                          "\n"
                          "beta = two words # trailing comment\n"
                          "gamma=0.5\n");
  CHECK(kv.size() == 3);
  CHECK(kv_get(kv, "alpha", "") == "1");
  CHECK(kv_get(kv, "beta", "") == "two words");
  CHECK(kv_get_real(kv, "gamma", 0.0) == doctest::Approx(0.5));
  CHECK(kv_get(kv, "missing", "fallback") == "fallback");
  CHECK(kv_get_int(kv, "alpha", 0) == 1);
  CHECK(kv_has(kv, "alpha"));
  CHECK_FALSE(kv_has(kv, "missing"));

  CHECK_THROWS_WITH_AS(parse_kv_text("novalue\n"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(kv_get_int(kv, "beta", 0), doctest::Contains("beta"), Error);
  CHECK_THROWS_WITH_AS(kv_get_real(kv, "beta", 0.0), doctest::Contains("beta"), Error);
}

TEST_CASE("pipeline config loads from file with overrides") {
  TempDir tmp("cfg");
  write_file(tmp.file("p.cfg"),
             "corpus = /data/c.jsonl\n"
             "workdir = /tmp/w\n"
             "dim = 16\n"
             "models = M1,M3\n"
             "seed = 9\n");
  auto cfg = PipelineConfig::from_file(tmp.file("p.cfg"));
  CHECK(cfg.corpus == "/data/c.jsonl");
  CHECK(cfg.train.dim == 16);
  CHECK(cfg.train.seed == 9);
  REQUIRE(cfg.models.size() == 2);
  CHECK(cfg.models[0] == ModelSpec::M1);
  CHECK(cfg.models[1] == ModelSpec::M3);

  auto overridden = PipelineConfig::from_file(tmp.file("p.cfg"), {{"dim", "4"}});
  CHECK(overridden.train.dim == 4);

  write_file(tmp.file("bad.cfg"), "workdir = /tmp/w\n");
  CHECK_THROWS_WITH_AS(PipelineConfig::from_file(tmp.file("bad.cfg")),
                       doctest::Contains("corpus"), Error);
}

TEST_CASE("file hashes are content hashes") {
  TempDir tmp("hash");
  write_file(tmp.file("a"), "same bytes");
  write_file(tmp.file("b"), "same bytes");
  write_file(tmp.file("c"), "other bytes");
  CHECK(file_hash_hex(tmp.file("a")) == file_hash_hex(tmp.file("b")));
  CHECK(file_hash_hex(tmp.file("a")) != file_hash_hex(tmp.file("c")));
  CHECK(file_hash_hex(tmp.file("a")).size() == 16);
  CHECK_THROWS_AS(file_hash_hex(tmp.file("missing")), Error);
}

TEST_CASE("pipeline end to end, resumption and determinism") {
  TempDir tmp("pipe");
  auto corpus = prepare_corpus(tmp);
  auto config = prepare_config(tmp, corpus, "work");
  auto cfg = PipelineConfig::from_file(config);

  auto report_path = run_pipeline(cfg);
  REQUIRE(std::filesystem::exists(report_path));
  std::string report = read_all(report_path);
  CHECK(report.find("regressions") != std::string::npos);
  CHECK(report.find("overdispersion") != std::string::npos);
  CHECK(report.find("univariate") != std::string::npos);
  REQUIRE(std::filesystem::exists(cfg.path_in_workdir("plot.tsv")));
  REQUIRE(std::filesystem::exists(cfg.path_in_workdir("scores.tsv")));
  REQUIRE(std::filesystem::exists(cfg.path_in_workdir("innovations.tsv")));

  // Rerun: every stage skips, nothing is rewritten.
  auto mtime = std::filesystem::last_write_time(report_path);
  auto scores_mtime = std::filesystem::last_write_time(cfg.path_in_workdir("scores.tsv"));
  auto report_path2 = run_pipeline(cfg);
  CHECK(report_path2 == report_path);
  CHECK(std::filesystem::last_write_time(report_path) == mtime);
  CHECK(std::filesystem::last_write_time(cfg.path_in_workdir("scores.tsv")) == scores_mtime);
  CHECK(read_all(report_path) == report);

  // The same inputs in a fresh workdir give a byte-identical report.
  auto config_b = prepare_config(tmp, corpus, "work_b");
  auto cfg_b = PipelineConfig::from_file(config_b);
  auto report_b = run_pipeline(cfg_b);
  CHECK(read_all(report_b) == report);

  // The plot data is exactly the univariate table.
  ScoreTable scores = load_scores(cfg.path_in_workdir("scores.tsv"));
  std::vector<Document> docs = load_documents(cfg.path_in_workdir("corpus.tokens.jsonl"));
  auto stats = univariate_table(scores, docs, cfg.bootstrap, cfg.seed);
  std::ifstream plot(cfg.path_in_workdir("plot.tsv"));
  std::string header;
  std::getline(plot, header);
  CHECK(header == "quartile\tmean_citations\tci_low\tci_high\tn");
  for (const auto& s : stats) {
    std::string line;
    REQUIRE(std::getline(plot, line));
    std::ostringstream expect;
    expect << std::setprecision(17) << 'Q' << s.quartile << '\t' << s.mean_citations << '\t'
           << s.ci_low << '\t' << s.ci_high << '\t' << s.n;
    CHECK(line == expect.str());
  }

  // A parameter change reruns the affected stage and its dependents.
  auto cfg_k = PipelineConfig::from_file(config, {{"top_k", "10"}});
  auto report_k = run_pipeline(cfg_k);
  CHECK(std::filesystem::exists(report_k));
  std::vector<InnovationRecord> ranked =
      load_innovations(cfg.path_in_workdir("innovations.tsv"));
  CHECK(ranked.size() == 10);
}

TEST_CASE("corrupted stage output halts and names the stage") {
  TempDir tmp("corrupt");
  auto corpus = prepare_corpus(tmp);
  auto config = prepare_config(tmp, corpus, "work");
  auto cfg = PipelineConfig::from_file(config);
  run_pipeline(cfg);

  write_file(cfg.path_in_workdir("innovations.tsv"), "word\tchange_score\treason\njunk\t0.1\t\n");
  CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("detect"), Error);
}

TEST_CASE("regression reports are deterministic and complete") {
  SynthConfig synth;
  synth.vocab_size = 50;
  synth.n_topics = 2;
  synth.topic_size = 10;
  synth.docs_per_slice = 120;
  synth.planted.push_back({"planted", 0, 1, 2000});
  synth.seed = 33;
  auto result = generate(synth);

  ScoreTable scores;
  Rng rng(2);
  for (std::size_t i = 0; i < result.docs.size(); ++i) {
    ScoreRow row;
    row.id = result.docs[i].id;
    row.year = result.docs[i].year;
    row.has_innovations = rng.uniform() < 0.7;
    if (row.has_innovations) {
      row.m = rng.normal();
      row.n_count = static_cast<int>(rng.uniform_int(3));
    }
    scores.push_back(row);
  }
  zscore_by_year(scores);
  std::vector<double> zs;
  for (const auto& r : scores)
    if (r.has_innovations) zs.push_back(r.z);
  auto bins = quartile_bin(zs);
  std::size_t next = 0;
  for (auto& r : scores)
    if (r.has_innovations) r.quartile = bins[next++];

  std::vector<std::string> words{"planted", "t00w000"};
  std::vector<double> change_scores{1.2, 0.4};
  RegressOptions opts;
  opts.bows_top_terms = 20;
  opts.bows_subset = 0.25;
  opts.bootstrap = 50;
  auto report1 = regression_report(result.docs, scores, words, change_scores, opts);
  auto report2 = regression_report(result.docs, scores, words, change_scores, opts);
  CHECK(report1 == report2);
  for (const char* key : {"\"regressions\"", "\"lr_tests\"", "\"overdispersion\"",
                          "\"ks_year_tests\"", "\"univariate\"", "\"innovations\"", "\"M4\""})
    CHECK(report1.find(key) != std::string::npos);
}

TEST_SUITE_END();
