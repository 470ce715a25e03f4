#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semshift/common.hpp"
#include "semshift/corpus.hpp"
#include "semshift/score.hpp"

namespace semshift {

struct DesignMatrix {
  std::vector<std::string> names;  // one per column
  Mat X;                           // rows = documents
};

struct RegressionResult {
  std::vector<std::string> names;
  Vec coefficients;
  Vec standard_errors;
  double loglik = 0.0;  // nats
  int n_obs = 0;
  bool converged = false;
  int iterations = 0;
};

// Poisson GLM with log link, fit by iteratively reweighted least squares.
// Standard errors come from the inverse Fisher information. Converges when
// the largest coefficient step falls below 1e-8; gives up after 100
// iterations with converged=false. Rank-deficient designs are an error that
// names the collinear columns.
RegressionResult fit_poisson(const DesignMatrix& design, std::span<const double> y);

double poisson_loglik(const DesignMatrix& design, std::span<const double> y, const Vec& beta);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Likelihood-ratio test of nested Poisson fits: 2(ll_full - ll_restricted)
// against chi-square with df degrees of freedom.
TestResult lr_test(double loglik_restricted, double loglik_full, int df);

// Cameron-Trivedi overdispersion test: regress ((y-mu)^2 - y)/mu on mu with
// no intercept; two-sided t-test on the slope.
TestResult cameron_trivedi(std::span<const double> y, std::span<const double> mu);

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// Ridge regression of log(1 + citations) on counts of the top most frequent
// terms in the training subset; the intercept is unpenalized.
struct BowsModel {
  std::vector<std::string> terms;
  double intercept = 0.0;
  Vec weights;

  double predict(const Document& doc) const;
};

BowsModel fit_bows(std::span<const Document> docs, std::span<const std::size_t> train_idx,
                   int top_terms, double ridge_lambda);

// Fits on a subset and predicts for every document.
std::vector<double> bows_covariate(std::span<const Document> docs,
                                   std::span<const std::size_t> train_idx, int top_terms,
                                   double ridge_lambda);

// Number of distinct innovation words present per document.
std::vector<int> count_innovations(std::span<const Document> docs,
                                   std::span<const std::string> innovations);

enum class ModelSpec { M1, M2, M3, M4 };

ModelSpec model_spec_from_string(const std::string& name);
std::string to_string(ModelSpec spec);

// Columns: intercept, outdegree, n_authors (only when every document has
// one), age (max corpus year - year), length (unique types), bows, then per
// model: M2/M3/M4 add n_innovs; M3 adds prog (raw z); M4 adds prog_q2/q3/q4
// dummies with Q1 as the all-zero reference. Rows follow `docs`; scores are
// matched by document id. Documents without innovations carry z=0 and zero
// dummies.
DesignMatrix build_design(std::span<const Document> docs, const ScoreTable& scores,
                          std::span<const double> bows, std::span<const int> n_innovs,
                          ModelSpec spec);

struct QuartileStat {
  int quartile = 0;
  double mean_citations = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

// Mean citations per progressiveness quartile over has_innovations documents,
// with percentile bootstrap confidence intervals. An empty quartile is an
// error.
std::vector<QuartileStat> univariate_table(const ScoreTable& scores,
                                           std::span<const Document> docs,
                                           int bootstrap_samples = 1000,
                                           std::uint64_t seed = 1);

}  // namespace semshift
