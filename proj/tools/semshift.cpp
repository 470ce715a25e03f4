#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semshift/align.hpp"
#include "semshift/change.hpp"
#include "semshift/corpus.hpp"
#include "semshift/embed.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/score.hpp"
#include "semshift/synth.hpp"
#include "semshift/validate.hpp"

namespace ss = semshift;

namespace {

std::shared_ptr<ss::Vocabulary> shared_vocab(const std::filesystem::path& path) {
  return std::make_shared<ss::Vocabulary>(ss::Vocabulary::load(path));
}

void add_ingest(CLI::App& app) {
  auto cmd = app.add_subcommand("ingest", "Tokenize a raw corpus and build the slice files");
  auto input = std::make_shared<std::string>();
  auto outdir = std::make_shared<std::string>();
  auto slice_size = std::make_shared<std::size_t>(0);
  auto min_old = std::make_shared<std::int64_t>(5);
  auto min_new = std::make_shared<std::int64_t>(5);
  cmd->add_option("--input", *input, "Raw JSONL corpus")->required();
  cmd->add_option("--outdir", *outdir, "Output directory")->required();
  cmd->add_option("--slice-size", *slice_size, "Documents per slice (default: half)");
  cmd->add_option("--min-count-old", *min_old, "Vocabulary threshold in the old slice");
  cmd->add_option("--min-count-new", *min_new, "Vocabulary threshold in the new slice");
  cmd->callback([=] {
    std::filesystem::create_directories(*outdir);
    ss::IngestResult ingested = ss::ingest(*input);
    std::size_t n = *slice_size > 0 ? *slice_size : ingested.docs.size() / 2;
    ss::CorpusSlices slices = ss::slice(std::move(ingested.docs), n);
    ss::Vocabulary vocab = ss::Vocabulary::build(slices, *min_old, *min_new);
    std::filesystem::path dir(*outdir);
    ss::save_documents(slices.docs, dir / "corpus.tokens.jsonl");
    std::vector<ss::Document> part(slices.old_docs().begin(), slices.old_docs().end());
    ss::save_documents(part, dir / "old.tokens.jsonl");
    part.assign(slices.new_docs().begin(), slices.new_docs().end());
    ss::save_documents(part, dir / "new.tokens.jsonl");
    vocab.save(dir / "vocab.tsv");
    ingested.caps.save(dir / "caps.tsv");
    std::cout << "ingested " << slices.docs.size() << " documents (" << ingested.skipped
              << " skipped), vocabulary " << vocab.size() << " words\n";
  });
}

void add_train(CLI::App& app) {
  auto cmd = app.add_subcommand("train", "Train NCE skipgram embeddings on one slice");
  auto docs_path = std::make_shared<std::string>();
  auto vocab_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto slice_id = std::make_shared<std::string>("old");
  auto cfg = std::make_shared<ss::TrainConfig>();
  auto seed = std::make_shared<std::uint64_t>();
  cmd->add_option("--docs", *docs_path, "Tokenized slice JSONL")->required();
  cmd->add_option("--vocab", *vocab_path, "Vocabulary TSV")->required();
  cmd->add_option("--out", *out, "Model file prefix")->required();
  cmd->add_option("--slice", *slice_id, "Slice label stored in the metadata");
  cmd->add_option("--seed", *seed, "Training seed")->required();
  cmd->add_option("--dim", cfg->dim, "Embedding dimension");
  cmd->add_option("--window", cfg->window, "Context window");
  cmd->add_option("--negatives", cfg->k_negatives, "Noise samples per pair");
  cmd->add_option("--epochs", cfg->epochs, "Training epochs");
  cmd->add_option("--lr", cfg->learning_rate, "Initial learning rate");
  cmd->add_option("--threads", cfg->threads, "Worker threads (1 = deterministic)");
  cmd->add_option("--subsample", cfg->subsample, "Frequent-word subsampling threshold");
  cmd->callback([=] {
    cfg->seed = *seed;
    auto vocab = shared_vocab(*vocab_path);
    std::vector<ss::Document> docs = ss::load_documents(*docs_path);
    ss::EmbeddingModel model = ss::train_nce(docs, vocab, *cfg);
    model.save(*out, *slice_id, *cfg, *vocab_path);
    std::cout << "trained " << vocab->size() << " x " << cfg->dim << " model -> " << *out
              << ".{u,v}.vec\n";
  });
}

void add_align(CLI::App& app) {
  auto cmd = app.add_subcommand("align", "Rotate the old model into the new model's space");
  auto old_prefix = std::make_shared<std::string>();
  auto new_prefix = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--old", *old_prefix, "Old model prefix")->required();
  cmd->add_option("--new", *new_prefix, "New model prefix")->required();
  cmd->add_option("--out", *out, "Aligned old model prefix")->required();
  cmd->callback([=] {
    std::ifstream meta_in(*old_prefix + std::string(".meta.json"));
    if (!meta_in) throw ss::Error("cannot read model metadata: " + *old_prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    std::string vocab_file = meta.at("vocab_file").get<std::string>();
    ss::EmbeddingModel old_m = ss::EmbeddingModel::load(*old_prefix);
    ss::EmbeddingModel new_m =
        ss::EmbeddingModel::load(*new_prefix, old_m.vocab_ptr());
    ss::AlignmentMap map = ss::procrustes_align(old_m, new_m);
    ss::EmbeddingModel aligned = ss::apply_alignment(old_m, map);
    ss::TrainConfig cfg;
    const nlohmann::json& c = meta.at("config");
    cfg.dim = c.at("dim").get<int>();
    cfg.window = c.at("window").get<int>();
    cfg.k_negatives = c.at("k_negatives").get<int>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.lr_floor_ratio = c.at("lr_floor_ratio").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.subsample = c.at("subsample").get<double>();
    aligned.save(*out, "old_aligned", cfg, vocab_file);
    std::cout << "aligned with residual " << map.residual << " -> " << *out << "\n";
  });
}

void add_detect(CLI::App& app) {
  auto cmd = app.add_subcommand("detect", "Rank words by second-order change");
  auto old_prefix = std::make_shared<std::string>();
  auto new_prefix = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto stoplist = std::make_shared<std::string>();
  auto caps_stats = std::make_shared<std::string>();
  auto neighbors = std::make_shared<int>(50);
  auto top = std::make_shared<int>(1000);
  auto caps_threshold = std::make_shared<double>(0.90);
  auto min_freq = std::make_shared<std::int64_t>(25);
  auto threads = std::make_shared<int>(1);
  cmd->add_option("--old", *old_prefix, "Aligned old model prefix")->required();
  cmd->add_option("--new", *new_prefix, "New model prefix")->required();
  cmd->add_option("--neighbors", *neighbors, "Near neighbors per word");
  cmd->add_option("--top", *top, "Ranked words to keep");
  cmd->add_option("--stoplist", *stoplist, "Exclusion list, one word per line");
  cmd->add_option("--caps-stats", *caps_stats, "Capitalization stats TSV from ingest");
  cmd->add_option("--caps-threshold", *caps_threshold, "All-caps fraction cutoff");
  cmd->add_option("--min-freq", *min_freq, "Abbreviation frequency floor");
  cmd->add_option("--threads", *threads, "Scoring threads");
  cmd->add_option("--out", *out, "Output TSV")->required();
  cmd->callback([=] {
    ss::EmbeddingModel old_m = ss::EmbeddingModel::load(*old_prefix);
    ss::EmbeddingModel new_m = ss::EmbeddingModel::load(*new_prefix, old_m.vocab_ptr());
    ss::CandidateFilters filters;
    filters.caps_threshold = *caps_threshold;
    filters.min_abbrev_freq = *min_freq;
    ss::CapsStats caps;
    if (!caps_stats->empty()) {
      caps = ss::CapsStats::load(*caps_stats);
      filters.caps = &caps;
    }
    if (!stoplist->empty()) filters.stoplist = ss::load_stoplist(*stoplist);
    std::vector<ss::InnovationRecord> dropped;
    std::vector<ss::InnovationRecord> ranked =
        ss::rank_innovations(old_m, new_m, *neighbors, *top, filters, &dropped, *threads);
    ss::save_innovations(ranked, dropped, *out);
    std::cout << "ranked " << ranked.size() << " innovations (" << dropped.size()
              << " filtered) -> " << *out << "\n";
  });
}

void add_score(CLI::App& app) {
  auto cmd = app.add_subcommand("score", "Score documents against the innovation set");
  auto docs_path = std::make_shared<std::string>();
  auto innovations = std::make_shared<std::string>();
  auto old_prefix = std::make_shared<std::string>();
  auto new_prefix = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto window = std::make_shared<int>(10);
  auto threads = std::make_shared<int>(1);
  cmd->add_option("--docs", *docs_path, "Tokenized corpus JSONL")->required();
  cmd->add_option("--innovations", *innovations, "Innovations TSV from detect")->required();
  cmd->add_option("--old", *old_prefix, "Aligned old model prefix")->required();
  cmd->add_option("--new", *new_prefix, "New model prefix")->required();
  cmd->add_option("--window", *window, "Scoring context window");
  cmd->add_option("--threads", *threads, "Scoring threads");
  cmd->add_option("--out", *out, "Output scores TSV")->required();
  cmd->callback([=] {
    ss::EmbeddingModel old_m = ss::EmbeddingModel::load(*old_prefix);
    ss::EmbeddingModel new_m = ss::EmbeddingModel::load(*new_prefix, old_m.vocab_ptr());
    std::vector<ss::Document> docs = ss::load_documents(*docs_path);
    std::vector<ss::InnovationRecord> ranked = ss::load_innovations(*innovations);
    std::vector<std::string> words;
    for (const auto& r : ranked) words.push_back(r.word);
    ss::ScoreTable table = ss::score_documents(docs, words, old_m, new_m, *window, *threads);
    ss::save_scores(table, *out);
    int scored = 0;
    for (const auto& row : table) scored += row.has_innovations ? 1 : 0;
    std::cout << "scored " << table.size() << " documents (" << scored
              << " with innovations) -> " << *out << "\n";
  });
}

void add_regress(CLI::App& app) {
  auto cmd = app.add_subcommand("regress", "Fit the citation regression ladder");
  auto scores_path = std::make_shared<std::string>();
  auto docs_path = std::make_shared<std::string>();
  auto innovations = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto model = std::make_shared<std::string>("all");
  auto opts = std::make_shared<ss::RegressOptions>();
  cmd->add_option("--scores", *scores_path, "Scores TSV")->required();
  cmd->add_option("--docs", *docs_path, "Tokenized corpus JSONL")->required();
  cmd->add_option("--innovations", *innovations, "Innovations TSV")->required();
  cmd->add_option("--model", *model, "M1, M2, M3, M4 or all");
  cmd->add_option("--bows-top-terms", opts->bows_top_terms, "BoWs vocabulary size");
  cmd->add_option("--bows-lambda", opts->bows_lambda, "BoWs ridge strength");
  cmd->add_option("--bows-subset", opts->bows_subset, "BoWs training fraction");
  cmd->add_option("--bootstrap", opts->bootstrap, "Bootstrap resamples");
  cmd->add_option("--seed", opts->seed, "Subsampling and bootstrap seed");
  cmd->add_option("--out", *out, "Report JSON path")->required();
  cmd->callback([=] {
    if (*model != "all") opts->models = {ss::model_spec_from_string(*model)};
    std::vector<ss::Document> docs = ss::load_documents(*docs_path);
    ss::ScoreTable scores = ss::load_scores(*scores_path);
    std::vector<ss::InnovationRecord> ranked = ss::load_innovations(*innovations);
    std::vector<std::string> words;
    std::vector<double> change_scores;
    for (const auto& r : ranked) {
      words.push_back(r.word);
      change_scores.push_back(r.change_score);
    }
    std::string report = ss::regression_report(docs, scores, words, change_scores, *opts);
    std::ofstream file(*out);
    if (!file) throw ss::Error("cannot write report: " + *out);
    file << report;
    std::cout << "report -> " << *out << "\n";
  });
}

void add_synth(CLI::App& app) {
  auto cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted changes");
  auto config = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>();
  cmd->add_option("--config", *config, "Synth config (key = value lines)")->required();
  cmd->add_option("--out", *out, "Corpus JSONL path")->required();
  cmd->add_option("--seed", *seed, "Generator seed")->required();
  cmd->callback([=] {
    ss::SynthConfig cfg = ss::synth_config_from_file(*config);
    cfg.seed = *seed;
    ss::SynthResult result = ss::generate(cfg);
    ss::write_synth_corpus(result, *out);
    std::cout << "generated " << result.docs.size() << " documents -> " << *out << "\n";
  });
}

void add_run(CLI::App& app) {
  auto cmd = app.add_subcommand("run", "Run the full pipeline from a config file");
  auto config = std::make_shared<std::string>();
  auto sets = std::make_shared<std::vector<std::string>>();
  cmd->add_option("--config", *config, "Pipeline config (key = value lines)")->required();
  cmd->add_option("--set", *sets, "Override a config key, e.g. --set seed=7")
      ->take_all();
  cmd->callback([=] {
    ss::KeyValueMap overrides;
    for (const std::string& kv : *sets) {
      std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ss::Error("--set expects key=value, got: " + kv);
      overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    ss::PipelineConfig cfg = ss::PipelineConfig::from_file(*config, overrides);
    std::filesystem::path report = ss::run_pipeline(cfg);
    std::cout << "report -> " << report.string() << "\n";
  });
}

void add_plot_data(CLI::App& app) {
  auto cmd = app.add_subcommand("plot-data", "Emit the quartile bar-chart table");
  auto scores_path = std::make_shared<std::string>();
  auto docs_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto bootstrap = std::make_shared<int>(1000);
  auto seed = std::make_shared<std::uint64_t>(1);
  cmd->add_option("--scores", *scores_path, "Scores TSV")->required();
  cmd->add_option("--docs", *docs_path, "Tokenized corpus JSONL")->required();
  cmd->add_option("--out", *out, "Output TSV")->required();
  cmd->add_option("--bootstrap", *bootstrap, "Bootstrap resamples");
  cmd->add_option("--seed", *seed, "Bootstrap seed");
  cmd->callback([=] {
    ss::ScoreTable scores = ss::load_scores(*scores_path);
    std::vector<ss::Document> docs = ss::load_documents(*docs_path);
    ss::emit_plot_data(scores, docs, *out, *bootstrap, *seed);
    std::cout << "plot data -> " << *out << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semshift: diachronic embedding training, change detection and "
               "document progressiveness scoring"};
  app.require_subcommand(1);
  add_ingest(app);
  add_train(app);
  add_align(app);
  add_detect(app);
  add_score(app);
  add_regress(app);
  add_synth(app);
  add_run(app);
  add_plot_data(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
