#include "semshift/pipeline.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "semshift/align.hpp"
#include "semshift/change.hpp"
#include "semshift/rng.hpp"

namespace semshift {

namespace {

constexpr std::uint64_t kBowsStream = 1ull << 40;

std::string join_models(const std::vector<ModelSpec>& models) {
  std::string out;
  for (const auto& m : models) {
    if (!out.empty()) out += ',';
    out += to_string(m);
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const KeyValueMap& kv) {
  PipelineConfig cfg;
  cfg.corpus = kv_get(kv, "corpus", "");
  cfg.workdir = kv_get(kv, "workdir", "");
  cfg.slice_size = static_cast<std::size_t>(kv_get_int(kv, "slice_size", 0));
  cfg.vocab_min_old = kv_get_int(kv, "vocab_min_old", cfg.vocab_min_old);
  cfg.vocab_min_new = kv_get_int(kv, "vocab_min_new", cfg.vocab_min_new);
  cfg.train.dim = static_cast<int>(kv_get_int(kv, "dim", cfg.train.dim));
  cfg.train.window = static_cast<int>(kv_get_int(kv, "window", cfg.train.window));
  cfg.train.k_negatives =
      static_cast<int>(kv_get_int(kv, "k_negatives", cfg.train.k_negatives));
  cfg.train.epochs = static_cast<int>(kv_get_int(kv, "epochs", cfg.train.epochs));
  cfg.train.learning_rate = kv_get_real(kv, "learning_rate", cfg.train.learning_rate);
  cfg.train.lr_floor_ratio = kv_get_real(kv, "lr_floor_ratio", cfg.train.lr_floor_ratio);
  cfg.train.subsample = kv_get_real(kv, "subsample", cfg.train.subsample);
  cfg.train.threads = static_cast<int>(kv_get_int(kv, "threads", cfg.train.threads));
  cfg.neighbors = static_cast<int>(kv_get_int(kv, "neighbors", cfg.neighbors));
  cfg.top_k = static_cast<int>(kv_get_int(kv, "top_k", cfg.top_k));
  cfg.stoplist = kv_get(kv, "stoplist", "");
  cfg.caps_threshold = kv_get_real(kv, "caps_threshold", cfg.caps_threshold);
  cfg.min_abbrev_freq = kv_get_int(kv, "min_abbrev_freq", cfg.min_abbrev_freq);
  cfg.score_window = static_cast<int>(kv_get_int(kv, "score_window", cfg.score_window));
  cfg.score_threads = static_cast<int>(kv_get_int(kv, "score_threads", cfg.score_threads));
  std::string models = kv_get(kv, "models", join_models(cfg.models));
  cfg.models.clear();
  std::istringstream list(models);
  std::string item;
  while (std::getline(list, item, ',')) cfg.models.push_back(model_spec_from_string(item));
  cfg.bows_top_terms = static_cast<int>(kv_get_int(kv, "bows_top_terms", cfg.bows_top_terms));
  cfg.bows_lambda = kv_get_real(kv, "bows_lambda", cfg.bows_lambda);
  cfg.bows_subset = kv_get_real(kv, "bows_subset", cfg.bows_subset);
  cfg.bootstrap = static_cast<int>(kv_get_int(kv, "bootstrap", cfg.bootstrap));
  cfg.seed = static_cast<std::uint64_t>(kv_get_int(kv, "seed", 1));
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path,
                                         const KeyValueMap& overrides) {
  KeyValueMap kv = parse_kv_file(path);
  for (const auto& [key, value] : overrides) kv[key] = value;
  return from_kv(kv);
}

void PipelineConfig::validate() const {
  if (corpus.empty()) throw Error("pipeline config: corpus path is required");
  if (workdir.empty()) throw Error("pipeline config: workdir is required");
  train.validate();
  if (vocab_min_old < 1 || vocab_min_new < 1)
    throw Error("pipeline config: vocabulary thresholds must be >= 1");
  if (neighbors < 1) throw Error("pipeline config: neighbors must be >= 1");
  if (top_k < 1) throw Error("pipeline config: top_k must be >= 1");
  if (caps_threshold < 0.0 || caps_threshold > 1.0)
    throw Error("pipeline config: caps_threshold must be in [0, 1]");
  if (score_window < 0) throw Error("pipeline config: score_window must be >= 0");
  if (score_threads < 1) throw Error("pipeline config: score_threads must be >= 1");
  if (models.empty()) throw Error("pipeline config: at least one regression model");
  if (bows_top_terms < 1) throw Error("pipeline config: bows_top_terms must be >= 1");
  if (bows_lambda < 0.0) throw Error("pipeline config: bows_lambda must be >= 0");
  if (bows_subset <= 0.0 || bows_subset > 1.0)
    throw Error("pipeline config: bows_subset must be in (0, 1]");
  if (bootstrap < 1) throw Error("pipeline config: bootstrap must be >= 1");
}

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot hash missing file: " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  return hex.str();
}

namespace {

using Paths = std::vector<std::filesystem::path>;

class StageRunner {
public:
  explicit StageRunner(std::filesystem::path workdir) : dir_(std::move(workdir) / "manifests") {
    std::filesystem::create_directories(dir_);
  }

  // Runs fn unless the stage manifest proves the outputs are current. Output
  // files that disagree with a current manifest are treated as corruption.
  template <typename Fn>
  void run(const std::string& stage, const KeyValueMap& params, const Paths& inputs,
           const Paths& outputs, Fn&& fn) {
    nlohmann::json want;
    want["stage"] = stage;
    for (const auto& [k, v] : params) want["params"][k] = v;
    for (const auto& p : inputs) {
      if (!std::filesystem::exists(p))
        throw Error("stage " + stage + ": missing input " + p.string());
      want["inputs"][p.string()] = file_hash_hex(p);
    }

    std::filesystem::path manifest = dir_ / (stage + ".json");
    if (std::filesystem::exists(manifest)) {
      std::ifstream in(manifest);
      nlohmann::json have = nlohmann::json::parse(in, nullptr, false);
      if (!have.is_discarded() && have["stage"] == want["stage"] &&
          have["params"] == want["params"] && have["inputs"] == want["inputs"] &&
          have.contains("outputs")) {
        bool all_exist = true;
        for (const auto& p : outputs) all_exist = all_exist && std::filesystem::exists(p);
        if (all_exist) {
          for (const auto& p : outputs) {
            auto it = have["outputs"].find(p.string());
            if (it == have["outputs"].end() || *it != file_hash_hex(p))
              throw Error("stage " + stage + ": output " + p.string() +
                          " does not match its manifest; the file is corrupt or was " +
                          "modified (delete " + manifest.string() + " to force a rebuild)");
          }
          std::cerr << "[" << stage << "] up to date, skipping\n";
          return;
        }
      }
      std::filesystem::remove(manifest);
    }

    std::cerr << "[" << stage << "] running\n";
    try {
      fn();
    } catch (const std::exception& e) {
      throw Error("stage " + stage + " failed: " + e.what());
    }
    for (const auto& p : outputs) {
      if (!std::filesystem::exists(p))
        throw Error("stage " + stage + " did not produce " + p.string());
      want["outputs"][p.string()] = file_hash_hex(p);
    }
    std::ofstream out(manifest);
    out << want.dump(2) << '\n';
  }

private:
  std::filesystem::path dir_;
};

KeyValueMap train_params(const PipelineConfig& cfg) {
  return {{"dim", std::to_string(cfg.train.dim)},
          {"window", std::to_string(cfg.train.window)},
          {"k_negatives", std::to_string(cfg.train.k_negatives)},
          {"epochs", std::to_string(cfg.train.epochs)},
          {"learning_rate", std::to_string(cfg.train.learning_rate)},
          {"lr_floor_ratio", std::to_string(cfg.train.lr_floor_ratio)},
          {"subsample", std::to_string(cfg.train.subsample)},
          {"seed", std::to_string(cfg.seed)}};
}

void write_rotation(const AlignmentMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write rotation file: " + path.string());
  out << std::setprecision(17);
  out << map.rotation.rows() << ' ' << map.rotation.cols() << ' ' << map.residual << '\n';
  for (Eigen::Index i = 0; i < map.rotation.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.rotation.cols(); ++j)
      out << (j ? " " : "") << map.rotation(i, j);
    out << '\n';
  }
}

nlohmann::json regression_json(const RegressionResult& fit) {
  nlohmann::json j;
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    j["coefficients"][fit.names[i]] = fit.coefficients[static_cast<Eigen::Index>(i)];
    j["standard_errors"][fit.names[i]] = fit.standard_errors[static_cast<Eigen::Index>(i)];
  }
  j["loglik"] = fit.loglik;
  j["n_obs"] = fit.n_obs;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  return j;
}

std::vector<std::size_t> bows_training_indices(std::size_t n, double fraction,
                                               std::uint64_t seed) {
  std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * n + 0.5));
  k = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed, kBowsStream);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::string regression_report(std::span<const Document> docs, const ScoreTable& scores,
                              std::span<const std::string> innovation_words,
                              std::span<const double> innovation_scores,
                              const RegressOptions& opts) {
  if (opts.models.empty()) throw Error("regression_report: no models requested");
  std::vector<std::size_t> train_idx =
      bows_training_indices(docs.size(), opts.bows_subset, opts.seed);
  std::vector<double> bows =
      bows_covariate(docs, train_idx, opts.bows_top_terms, opts.bows_lambda);
  std::vector<int> n_innovs = count_innovations(docs, innovation_words);
  std::vector<double> y(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) y[i] = static_cast<double>(docs[i].citations);

  nlohmann::json report;
  report["config"] = {{"models", join_models(opts.models)},
                      {"bows_top_terms", opts.bows_top_terms},
                      {"bows_lambda", opts.bows_lambda},
                      {"bows_subset", opts.bows_subset},
                      {"bootstrap", opts.bootstrap},
                      {"seed", opts.seed}};
  report["bows"] = {{"n_train_docs", train_idx.size()},
                    {"note",
                     "the BoWs training subset is not held out of the regression sample"}};

  report["innovations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < innovation_words.size(); ++i)
    report["innovations"].push_back({{"word", innovation_words[i]},
                                     {"change_score", i < innovation_scores.size()
                                                          ? innovation_scores[i]
                                                          : 0.0}});

  int n_scored = 0;
  std::array<int, 4> quartile_counts{};
  for (const auto& row : scores)
    if (row.has_innovations) {
      ++n_scored;
      if (row.quartile >= 1) ++quartile_counts[row.quartile - 1];
    }
  report["scores"] = {{"n_docs", scores.size()},
                      {"n_scored", n_scored},
                      {"quartile_counts", quartile_counts}};

  std::map<std::string, RegressionResult> fits;
  for (ModelSpec spec : opts.models) {
    DesignMatrix design = build_design(docs, scores, bows, n_innovs, spec);
    RegressionResult fit = fit_poisson(design, y);
    report["regressions"][to_string(spec)] = regression_json(fit);
    fits.emplace(to_string(spec), std::move(fit));
  }
  auto add_lr = [&](const std::string& restricted, const std::string& full) {
    auto r = fits.find(restricted);
    auto f = fits.find(full);
    if (r == fits.end() || f == fits.end()) return;
    int df = static_cast<int>(f->second.names.size() - r->second.names.size());
    TestResult lr = lr_test(r->second.loglik, f->second.loglik, df);
    report["lr_tests"][full + "_vs_" + restricted] = {
        {"statistic", lr.statistic}, {"df", df}, {"p_value", lr.p_value}};
  };
  add_lr("M1", "M2");
  add_lr("M1", "M3");
  add_lr("M1", "M4");
  add_lr("M2", "M3");
  add_lr("M2", "M4");

  for (const std::string name : {"M4", "M3", "M2", "M1"}) {
    auto it = fits.find(name);
    if (it == fits.end()) continue;
    DesignMatrix design =
        build_design(docs, scores, bows, n_innovs, model_spec_from_string(name));
    Vec eta = design.X * it->second.coefficients;
    std::vector<double> mu(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) mu[i] = std::exp(eta[i]);
    TestResult ct = cameron_trivedi(y, mu);
    report["overdispersion"] = {
        {"model", name}, {"statistic", ct.statistic}, {"p_value", ct.p_value}};
    break;
  }

  std::array<std::vector<double>, 4> years;
  for (const auto& row : scores)
    if (row.has_innovations && row.quartile >= 1)
      years[row.quartile - 1].push_back(static_cast<double>(row.year));
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      if (years[a].empty() || years[b].empty()) continue;
      TestResult ks = ks_two_sample(years[a], years[b]);
      report["ks_year_tests"]["Q" + std::to_string(a + 1) + "_vs_Q" + std::to_string(b + 1)] = {
          {"statistic", ks.statistic}, {"p_value", ks.p_value}};
    }

  for (const auto& s : univariate_table(scores, docs, opts.bootstrap, opts.seed))
    report["univariate"].push_back({{"quartile", s.quartile},
                                    {"mean_citations", s.mean_citations},
                                    {"ci_low", s.ci_low},
                                    {"ci_high", s.ci_high},
                                    {"n", s.n}});

  return report.dump(2) + "\n";
}

void emit_plot_data(const ScoreTable& scores, std::span<const Document> docs,
                    const std::filesystem::path& out_path, int bootstrap_samples,
                    std::uint64_t seed) {
  std::vector<QuartileStat> stats = univariate_table(scores, docs, bootstrap_samples, seed);
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write plot data: " + out_path.string());
  out << std::setprecision(17);
  out << "quartile\tmean_citations\tci_low\tci_high\tn\n";
  for (const auto& s : stats)
    out << 'Q' << s.quartile << '\t' << s.mean_citations << '\t' << s.ci_low << '\t'
        << s.ci_high << '\t' << s.n << '\n';
}

std::filesystem::path run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.workdir);
  StageRunner stages(cfg.workdir);

  const auto tokenized = cfg.path_in_workdir("corpus.tokens.jsonl");
  const auto old_docs_path = cfg.path_in_workdir("old.tokens.jsonl");
  const auto new_docs_path = cfg.path_in_workdir("new.tokens.jsonl");
  const auto vocab_path = cfg.path_in_workdir("vocab.tsv");
  const auto caps_path = cfg.path_in_workdir("caps.tsv");
  const auto model_old = cfg.path_in_workdir("model_old");
  const auto model_new = cfg.path_in_workdir("model_new");
  const auto model_aligned = cfg.path_in_workdir("model_old_aligned");
  const auto rotation_path = cfg.path_in_workdir("rotation.tsv");
  const auto innovations_path = cfg.path_in_workdir("innovations.tsv");
  const auto scores_path = cfg.path_in_workdir("scores.tsv");
  const auto report_path = cfg.path_in_workdir("report.json");
  const auto plot_path = cfg.path_in_workdir("plot.tsv");

  auto model_files = [](const std::filesystem::path& prefix) {
    return Paths{prefix.string() + ".u.vec", prefix.string() + ".v.vec",
                 prefix.string() + ".meta.json"};
  };

  stages.run(
      "ingest",
      {{"slice_size", std::to_string(cfg.slice_size)},
       {"vocab_min_old", std::to_string(cfg.vocab_min_old)},
       {"vocab_min_new", std::to_string(cfg.vocab_min_new)}},
      {cfg.corpus}, {tokenized, old_docs_path, new_docs_path, vocab_path, caps_path}, [&] {
        IngestResult ingested = ingest(cfg.corpus);
        std::size_t n_slice = cfg.slice_size > 0 ? cfg.slice_size : ingested.docs.size() / 2;
        CorpusSlices slices = slice(std::move(ingested.docs), n_slice);
        Vocabulary vocab =
            Vocabulary::build(slices, cfg.vocab_min_old, cfg.vocab_min_new);
        save_documents(slices.docs, tokenized);
        save_documents(std::vector<Document>(slices.old_docs().begin(),
                                             slices.old_docs().end()),
                       old_docs_path);
        save_documents(std::vector<Document>(slices.new_docs().begin(),
                                             slices.new_docs().end()),
                       new_docs_path);
        vocab.save(vocab_path);
        ingested.caps.save(caps_path);
      });

  auto train_stage = [&](const std::string& name, const std::filesystem::path& docs_path,
                         const std::filesystem::path& prefix, const std::string& slice_id) {
    stages.run(name, train_params(cfg), {docs_path, vocab_path}, model_files(prefix), [&] {
      auto vocab = std::make_shared<Vocabulary>(Vocabulary::load(vocab_path));
      std::vector<Document> docs = load_documents(docs_path);
      TrainConfig train_cfg = cfg.train;
      train_cfg.seed = cfg.seed;
      EmbeddingModel model = train_nce(docs, vocab, train_cfg);
      model.save(prefix, slice_id, train_cfg, vocab_path);
    });
  };
  train_stage("train_old", old_docs_path, model_old, "old");
  train_stage("train_new", new_docs_path, model_new, "new");

  Paths align_inputs = model_files(model_old);
  for (const auto& p : model_files(model_new)) align_inputs.push_back(p);
  Paths align_outputs = model_files(model_aligned);
  align_outputs.push_back(rotation_path);
  stages.run("align", {}, align_inputs, align_outputs, [&] {
    auto vocab = std::make_shared<Vocabulary>(Vocabulary::load(vocab_path));
    EmbeddingModel old_m = EmbeddingModel::load(model_old, vocab);
    EmbeddingModel new_m = EmbeddingModel::load(model_new, vocab);
    AlignmentMap map = procrustes_align(old_m, new_m);
    EmbeddingModel aligned = apply_alignment(old_m, map);
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = cfg.seed;
    aligned.save(model_aligned, "old_aligned", train_cfg, vocab_path);
    write_rotation(map, rotation_path);
  });

  Paths detect_inputs = model_files(model_aligned);
  for (const auto& p : model_files(model_new)) detect_inputs.push_back(p);
  detect_inputs.push_back(vocab_path);
  detect_inputs.push_back(caps_path);
  if (!cfg.stoplist.empty()) detect_inputs.push_back(cfg.stoplist);
  stages.run("detect",
             {{"neighbors", std::to_string(cfg.neighbors)},
              {"top_k", std::to_string(cfg.top_k)},
              {"caps_threshold", std::to_string(cfg.caps_threshold)},
              {"min_abbrev_freq", std::to_string(cfg.min_abbrev_freq)}},
             detect_inputs, {innovations_path}, [&] {
               auto vocab = std::make_shared<Vocabulary>(Vocabulary::load(vocab_path));
               EmbeddingModel old_m = EmbeddingModel::load(model_aligned, vocab);
               EmbeddingModel new_m = EmbeddingModel::load(model_new, vocab);
               CapsStats caps = CapsStats::load(caps_path);
               CandidateFilters filters;
               filters.caps = &caps;
               filters.caps_threshold = cfg.caps_threshold;
               filters.min_abbrev_freq = cfg.min_abbrev_freq;
               if (!cfg.stoplist.empty()) filters.stoplist = load_stoplist(cfg.stoplist);
               std::vector<InnovationRecord> dropped;
               std::vector<InnovationRecord> ranked = rank_innovations(
                   old_m, new_m, cfg.neighbors, cfg.top_k, filters, &dropped);
               save_innovations(ranked, dropped, innovations_path);
             });

  Paths score_inputs = {tokenized, innovations_path};
  for (const auto& p : model_files(model_aligned)) score_inputs.push_back(p);
  for (const auto& p : model_files(model_new)) score_inputs.push_back(p);
  stages.run("score", {{"score_window", std::to_string(cfg.score_window)}}, score_inputs,
             {scores_path}, [&] {
               auto vocab = std::make_shared<Vocabulary>(Vocabulary::load(vocab_path));
               EmbeddingModel old_m = EmbeddingModel::load(model_aligned, vocab);
               EmbeddingModel new_m = EmbeddingModel::load(model_new, vocab);
               std::vector<Document> docs = load_documents(tokenized);
               std::vector<InnovationRecord> ranked = load_innovations(innovations_path);
               std::vector<std::string> words;
               for (const auto& r : ranked) words.push_back(r.word);
               int window = cfg.score_window > 0 ? cfg.score_window : cfg.train.window;
               ScoreTable table =
                   score_documents(docs, words, old_m, new_m, window, cfg.score_threads);
               save_scores(table, scores_path);
             });

  stages.run(
      "regress",
      {{"models", join_models(cfg.models)},
       {"bows_top_terms", std::to_string(cfg.bows_top_terms)},
       {"bows_lambda", std::to_string(cfg.bows_lambda)},
       {"bows_subset", std::to_string(cfg.bows_subset)},
       {"bootstrap", std::to_string(cfg.bootstrap)},
       {"seed", std::to_string(cfg.seed)}},
      {scores_path, tokenized, innovations_path}, {report_path}, [&] {
        std::vector<Document> docs = load_documents(tokenized);
        ScoreTable scores = load_scores(scores_path);
        std::vector<InnovationRecord> ranked = load_innovations(innovations_path);
        std::vector<std::string> words;
        std::vector<double> change_scores;
        for (const auto& r : ranked) {
          words.push_back(r.word);
          change_scores.push_back(r.change_score);
        }
        RegressOptions opts{cfg.models,       cfg.bows_top_terms, cfg.bows_lambda,
                            cfg.bows_subset,  cfg.bootstrap,      cfg.seed};
        std::string report = regression_report(docs, scores, words, change_scores, opts);
        std::ofstream out(report_path);
        if (!out) throw Error("cannot write report: " + report_path.string());
        out << report;
      });

  stages.run("plot-data",
             {{"bootstrap", std::to_string(cfg.bootstrap)}, {"seed", std::to_string(cfg.seed)}},
             {scores_path, tokenized}, {plot_path}, [&] {
               ScoreTable scores = load_scores(scores_path);
               std::vector<Document> docs = load_documents(tokenized);
               emit_plot_data(scores, docs, plot_path, cfg.bootstrap, cfg.seed);
             });

  return report_path;
}

}  // namespace semshift
