#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "semshift/align.hpp"
#include "semshift/change.hpp"
#include "semshift/corpus.hpp"
#include "semshift/embed.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/score.hpp"
#include "semshift/synth.hpp"
#include "semshift/validate.hpp"

namespace py = pybind11;
using namespace semshift;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diachronic embedding training, change detection and document scoring";

  py::register_exception<Error>(m, "SemshiftError");

  py::class_<Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("id", &Document::id)
      .def_readwrite("year", &Document::year)
      .def_readwrite("tokens", &Document::tokens)
      .def_readwrite("citations", &Document::citations)
      .def_readwrite("outdegree", &Document::outdegree)
      .def_readwrite("n_authors", &Document::n_authors)
      .def_readwrite("length", &Document::length);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("unique_token_count",
        [](const std::vector<std::string>& tokens) { return unique_token_count(tokens); },
        py::arg("tokens"));

  py::class_<CorpusSlices>(m, "CorpusSlices")
      .def_readonly("docs", &CorpusSlices::docs)
      .def_readonly("slice_size", &CorpusSlices::slice_size)
      .def("old_docs",
           [](const CorpusSlices& s) {
             return std::vector<Document>(s.old_docs().begin(), s.old_docs().end());
           })
      .def("new_docs", [](const CorpusSlices& s) {
        return std::vector<Document>(s.new_docs().begin(), s.new_docs().end());
      });
  m.def("slice", &slice, py::arg("docs"), py::arg("n_slice"));

  py::class_<Vocabulary, std::shared_ptr<Vocabulary>>(m, "Vocabulary")
      .def_static("build", &Vocabulary::build, py::arg("slices"), py::arg("min_count_old"),
                  py::arg("min_count_new"), py::arg("noise_exponent") = 1.0)
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("__len__", &Vocabulary::size)
      .def("word", &Vocabulary::word, py::arg("index"))
      .def("words", &Vocabulary::words)
      .def("index", &Vocabulary::index, py::arg("word"))
      .def("freq_old", &Vocabulary::freq_old, py::arg("index"))
      .def("freq_new", &Vocabulary::freq_new, py::arg("index"))
      .def("noise_prob", &Vocabulary::noise_prob, py::arg("index"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("window", &TrainConfig::window)
      .def_readwrite("k_negatives", &TrainConfig::k_negatives)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lr_floor_ratio", &TrainConfig::lr_floor_ratio)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_readwrite("subsample", &TrainConfig::subsample);

  py::class_<EmbeddingModel>(m, "EmbeddingModel")
      .def(py::init([](std::shared_ptr<Vocabulary> vocab, int dim) {
             return EmbeddingModel(std::move(vocab), dim);
           }),
           py::arg("vocab"), py::arg("dim"))
      .def_property(
          "U", [](const EmbeddingModel& m) { return m.U; },
          [](EmbeddingModel& m, const Mat& u) {
            if (u.rows() != m.U.rows() || u.cols() != m.U.cols())
              throw Error("U shape mismatch");
            m.U = u;
            m.invalidate_log_partitions();
          })
      .def_property(
          "V", [](const EmbeddingModel& m) { return m.V; },
          [](EmbeddingModel& m, const Mat& v) {
            if (v.rows() != m.V.rows() || v.cols() != m.V.cols())
              throw Error("V shape mismatch");
            m.V = v;
            m.invalidate_log_partitions();
          })
      .def_property_readonly("dim", &EmbeddingModel::dim)
      .def_property_readonly("vocab", &EmbeddingModel::vocab_ptr)
      .def("log_partition",
           py::overload_cast<const std::string&>(&EmbeddingModel::log_partition, py::const_),
           py::arg("target"))
      .def("conditional_logprob",
           py::overload_cast<const std::string&, const std::string&>(
               &EmbeddingModel::conditional_logprob, py::const_),
           py::arg("target"), py::arg("context"))
      .def("save", &EmbeddingModel::save, py::arg("prefix"), py::arg("slice_id"),
           py::arg("config"), py::arg("vocab_path"))
      .def_static("load",
                  py::overload_cast<const std::filesystem::path&>(&EmbeddingModel::load),
                  py::arg("prefix"));

  m.def(
      "train_nce",
      [](const std::vector<Document>& docs, std::shared_ptr<Vocabulary> vocab,
         const TrainConfig& cfg) { return train_nce(docs, std::move(vocab), cfg); },
      py::arg("docs"), py::arg("vocab"), py::arg("config"));
  m.def("nce_posterior", &nce_posterior, py::arg("model"), py::arg("target"),
        py::arg("context"), py::arg("k"));

  py::class_<AlignmentMap>(m, "AlignmentMap")
      .def_readonly("rotation", &AlignmentMap::rotation)
      .def_readonly("residual", &AlignmentMap::residual)
      .def("is_orthogonal", &AlignmentMap::is_orthogonal, py::arg("tol") = 1e-8);
  m.def("procrustes_align", &procrustes_align, py::arg("old_model"), py::arg("new_model"));
  m.def("apply_alignment", &apply_alignment, py::arg("model"), py::arg("alignment"));

  m.def("near_neighbors", &near_neighbors, py::arg("model"), py::arg("word"), py::arg("n"));
  m.def("change_score", &change_score, py::arg("old_model"), py::arg("new_model"),
        py::arg("word"), py::arg("n"));

  py::class_<InnovationRecord>(m, "InnovationRecord")
      .def_readonly("word", &InnovationRecord::word)
      .def_readonly("change_score", &InnovationRecord::change_score)
      .def_readonly("neighbors_old", &InnovationRecord::neighbors_old)
      .def_readonly("neighbors_new", &InnovationRecord::neighbors_new);
  m.def(
      "rank_innovations",
      [](const EmbeddingModel& old_m, const EmbeddingModel& new_m, int n, int top_k,
         const std::unordered_set<std::string>& stoplist, int threads) {
        CandidateFilters filters;
        filters.stoplist = stoplist;
        return rank_innovations(old_m, new_m, n, top_k, filters, nullptr, threads);
      },
      py::arg("old_model"), py::arg("new_model"), py::arg("n"), py::arg("top_k"),
      py::arg("stoplist") = std::unordered_set<std::string>{}, py::arg("threads") = 1);
  m.def(
      "filter_candidate",
      [](const std::string& word, double caps_fraction, std::int64_t freq_old,
         std::int64_t freq_new, std::optional<double> propernoun_fraction,
         const std::unordered_set<std::string>& stoplist) -> std::optional<std::string> {
        auto reason = filter_candidate(word, caps_fraction, freq_old, freq_new,
                                       propernoun_fraction, stoplist);
        if (!reason) return std::nullopt;
        return to_string(*reason);
      },
      py::arg("word"), py::arg("caps_fraction"), py::arg("freq_old"), py::arg("freq_new"),
      py::arg("propernoun_fraction") = std::nullopt,
      py::arg("stoplist") = std::unordered_set<std::string>{});

  py::class_<UsageScore>(m, "UsageScore")
      .def_readonly("doc_id", &UsageScore::doc_id)
      .def_readonly("word", &UsageScore::word)
      .def_readonly("r", &UsageScore::r)
      .def_readonly("n_occurrences", &UsageScore::n_occurrences);
  m.def("usage_progressiveness", &usage_progressiveness, py::arg("doc"), py::arg("word"),
        py::arg("old_model"), py::arg("new_model"), py::arg("window"));

  py::class_<ScoreRow>(m, "ScoreRow")
      .def_readonly("id", &ScoreRow::id)
      .def_readonly("year", &ScoreRow::year)
      .def_readonly("m", &ScoreRow::m)
      .def_readonly("n_count", &ScoreRow::n_count)
      .def_readonly("z", &ScoreRow::z)
      .def_readonly("quartile", &ScoreRow::quartile)
      .def_readonly("has_innovations", &ScoreRow::has_innovations);
  m.def(
      "score_documents",
      [](const std::vector<Document>& docs, const std::vector<std::string>& innovations,
         const EmbeddingModel& old_m, const EmbeddingModel& new_m, int window, int threads) {
        return score_documents(docs, innovations, old_m, new_m, window, threads);
      },
      py::arg("docs"), py::arg("innovations"), py::arg("old_model"), py::arg("new_model"),
      py::arg("window"), py::arg("threads") = 1);
  m.def("quartile_bin",
        [](const std::vector<double>& zs) { return quartile_bin(zs); }, py::arg("zs"));

  py::class_<RegressionResult>(m, "RegressionResult")
      .def_readonly("names", &RegressionResult::names)
      .def_readonly("coefficients", &RegressionResult::coefficients)
      .def_readonly("standard_errors", &RegressionResult::standard_errors)
      .def_readonly("loglik", &RegressionResult::loglik)
      .def_readonly("n_obs", &RegressionResult::n_obs)
      .def_readonly("converged", &RegressionResult::converged)
      .def_readonly("iterations", &RegressionResult::iterations);
  m.def(
      "fit_poisson",
      [](const std::vector<std::string>& names, const Mat& x, const std::vector<double>& y) {
        return fit_poisson(DesignMatrix{names, x}, y);
      },
      py::arg("names"), py::arg("X"), py::arg("y"));

  py::class_<TestResult>(m, "TestResult")
      .def_readonly("statistic", &TestResult::statistic)
      .def_readonly("p_value", &TestResult::p_value);
  m.def("lr_test", &lr_test, py::arg("loglik_restricted"), py::arg("loglik_full"),
        py::arg("df"));
  m.def(
      "cameron_trivedi",
      [](const std::vector<double>& y, const std::vector<double>& mu) {
        return cameron_trivedi(y, mu);
      },
      py::arg("y"), py::arg("mu"));
  m.def(
      "ks_two_sample",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return ks_two_sample(a, b);
      },
      py::arg("a"), py::arg("b"));

  py::class_<PlantedWord>(m, "PlantedWord")
      .def(py::init<>())
      .def_readwrite("word", &PlantedWord::word)
      .def_readwrite("topic_old", &PlantedWord::topic_old)
      .def_readwrite("topic_new", &PlantedWord::topic_new)
      .def_readwrite("transition_year", &PlantedWord::transition_year);
  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &SynthConfig::vocab_size)
      .def_readwrite("n_topics", &SynthConfig::n_topics)
      .def_readwrite("topic_size", &SynthConfig::topic_size)
      .def_readwrite("docs_per_slice", &SynthConfig::docs_per_slice)
      .def_readwrite("doc_len_min", &SynthConfig::doc_len_min)
      .def_readwrite("doc_len_max", &SynthConfig::doc_len_max)
      .def_readwrite("year_old_lo", &SynthConfig::year_old_lo)
      .def_readwrite("year_old_hi", &SynthConfig::year_old_hi)
      .def_readwrite("year_new_lo", &SynthConfig::year_new_lo)
      .def_readwrite("year_new_hi", &SynthConfig::year_new_hi)
      .def_readwrite("planted", &SynthConfig::planted)
      .def_readwrite("contain_prob", &SynthConfig::contain_prob)
      .def_readwrite("windows_max", &SynthConfig::windows_max)
      .def_readwrite("adoption_width", &SynthConfig::adoption_width)
      .def_readwrite("adoption_jitter", &SynthConfig::adoption_jitter)
      .def_readwrite("citation_a", &SynthConfig::citation_a)
      .def_readwrite("citation_b", &SynthConfig::citation_b)
      .def_readwrite("seed", &SynthConfig::seed);
  py::class_<SynthResult>(m, "SynthResult")
      .def_readonly("docs", &SynthResult::docs)
      .def_readonly("true_progressiveness", &SynthResult::true_progressiveness);
  m.def("generate", &generate, py::arg("config"));

  m.def("exact_softmax_oracle", &exact_softmax_oracle, py::arg("U"), py::arg("V"),
        py::arg("target"));
  m.def("brute_force_usage_score", &brute_force_usage_score, py::arg("doc"), py::arg("word"),
        py::arg("old_model"), py::arg("new_model"), py::arg("window"));

  m.def("run_pipeline", [](const std::filesystem::path& config_path) {
    return run_pipeline(PipelineConfig::from_file(config_path));
  });
}
