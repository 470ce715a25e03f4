#include "semshift/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "semshift/rng.hpp"
#include "semshift/special.hpp"

namespace semshift {

double poisson_loglik(const DesignMatrix& design, std::span<const double> y, const Vec& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
    double eta = design.X.row(i).dot(beta);
    ll += y[i] * eta - std::exp(eta) - std::lgamma(y[i] + 1.0);
  }
  return ll;
}

namespace {

void check_full_rank(const DesignMatrix& design) {
  Eigen::ColPivHouseholderQR<Mat> qr(design.X);
  Eigen::Index rank = qr.rank();
  if (rank == design.X.cols()) return;
  // The trailing pivots are the columns that add no new direction.
  auto perm = qr.colsPermutation().indices();
  std::vector<std::string> bad;
  for (Eigen::Index i = rank; i < design.X.cols(); ++i)
    bad.push_back(design.names[perm[i]]);
  std::sort(bad.begin(), bad.end());
  std::string msg = "design matrix is rank deficient; collinear columns:";
  for (const auto& name : bad) msg += " " + name;
  throw Error(msg);
}

}  // namespace

RegressionResult fit_poisson(const DesignMatrix& design, std::span<const double> y) {
  const Eigen::Index n = design.X.rows();
  const Eigen::Index p = design.X.cols();
  if (n == 0 || p == 0) throw Error("fit_poisson: empty design matrix");
  if (static_cast<std::size_t>(n) != y.size())
    throw Error("fit_poisson: row count does not match response length");
  if (design.names.size() != static_cast<std::size_t>(p))
    throw Error("fit_poisson: column names do not match design width");
  double y_mean = 0.0;
  for (double v : y) {
    if (v < 0.0 || v != std::floor(v)) throw Error("fit_poisson: y must be non-negative counts");
    y_mean += v;
  }
  y_mean /= static_cast<double>(n);
  check_full_rank(design);

  Vec beta = Vec::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (design.names[j] == "intercept") beta[j] = std::log(std::max(y_mean, 0.1));

  RegressionResult result;
  result.names = design.names;
  result.n_obs = static_cast<int>(n);
  double ll = poisson_loglik(design, y, beta);

  Vec mu(n);
  Mat fisher(p, p);
  for (int iter = 1; iter <= 100; ++iter) {
    result.iterations = iter;
    Vec eta = design.X * beta;
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = std::exp(std::min(eta[i], 300.0));
    Vec score = design.X.transpose() * (Eigen::Map<const Vec>(y.data(), n) - mu);
    fisher = design.X.transpose() * mu.asDiagonal() * design.X;
    Vec delta = fisher.ldlt().solve(score);

    // Halve the step until the likelihood stops decreasing.
    double new_ll = ll;
    Vec candidate = beta;
    for (int half = 0; half < 40; ++half) {
      candidate = beta + delta;
      new_ll = poisson_loglik(design, y, candidate);
      if (std::isfinite(new_ll) && new_ll >= ll - 1e-12) break;
      delta *= 0.5;
    }
    beta = candidate;
    ll = new_ll;
    if (delta.cwiseAbs().maxCoeff() < 1e-8) {
      result.converged = true;
      break;
    }
  }

  Vec eta = design.X * beta;
  for (Eigen::Index i = 0; i < n; ++i) mu[i] = std::exp(std::min(eta[i], 300.0));
  fisher = design.X.transpose() * mu.asDiagonal() * design.X;
  Mat cov = fisher.ldlt().solve(Mat::Identity(p, p));
  result.coefficients = beta;
  result.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  result.loglik = ll;
  return result;
}

TestResult lr_test(double loglik_restricted, double loglik_full, int df) {
  if (df <= 0) throw Error("lr_test: df must be positive");
  double statistic = 2.0 * (loglik_full - loglik_restricted);
  if (statistic < -1e-6)
    throw Error("lr_test: full model has lower likelihood; fits are not nested");
  statistic = std::max(statistic, 0.0);
  return {statistic, chi2_sf(statistic, df)};
}

TestResult cameron_trivedi(std::span<const double> y, std::span<const double> mu) {
  if (y.size() != mu.size() || y.size() < 3)
    throw Error("cameron_trivedi: need matching y and mu with at least 3 observations");
  const std::size_t n = y.size();
  double sxx = 0.0, sxy = 0.0;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mu[i] > 0.0)) throw Error("cameron_trivedi: fitted means must be positive");
    g[i] = ((y[i] - mu[i]) * (y[i] - mu[i]) - y[i]) / mu[i];
    sxx += mu[i] * mu[i];
    sxy += mu[i] * g[i];
  }
  if (sxx == 0.0) throw Error("cameron_trivedi: degenerate fitted means");
  double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double resid = g[i] - slope * mu[i];
    rss += resid * resid;
  }
  double se = std::sqrt(rss / static_cast<double>(n - 1) / sxx);
  if (se == 0.0) return {0.0, 1.0};
  double t = slope / se;
  return {t, 2.0 * student_t_sf(std::abs(t), static_cast<double>(n - 1))};
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  double ne = std::sqrt(na * nb / (na + nb));
  double lambda = (ne + 0.12 + 0.11 / ne) * d;
  return {d, kolmogorov_sf(lambda)};
}

double BowsModel::predict(const Document& doc) const {
  std::unordered_map<std::string, int> counts;
  for (const auto& tok : doc.tokens) ++counts[tok];
  double pred = intercept;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    auto it = counts.find(terms[j]);
    if (it != counts.end()) pred += weights[j] * it->second;
  }
  return pred;
}

BowsModel fit_bows(std::span<const Document> docs, std::span<const std::size_t> train_idx,
                   int top_terms, double ridge_lambda) {
  if (train_idx.empty()) throw Error("fit_bows: empty training subset");
  if (top_terms < 1) throw Error("fit_bows: top_terms must be >= 1");
  if (ridge_lambda < 0.0) throw Error("fit_bows: ridge_lambda must be >= 0");

  std::unordered_map<std::string, std::int64_t> freq;
  for (std::size_t i : train_idx) {
    if (i >= docs.size()) throw Error("fit_bows: training index out of range");
    for (const auto& tok : docs[i].tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::int64_t>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (by_freq.size() > static_cast<std::size_t>(top_terms)) by_freq.resize(top_terms);

  BowsModel model;
  std::unordered_map<std::string, int> term_index;
  for (const auto& [term, count] : by_freq) {
    term_index.emplace(term, static_cast<int>(model.terms.size()));
    model.terms.push_back(term);
  }

  const Eigen::Index p = static_cast<Eigen::Index>(model.terms.size()) + 1;
  Mat xtx = Mat::Zero(p, p);
  Vec xty = Vec::Zero(p);
  Vec row = Vec::Zero(p);
  for (std::size_t i : train_idx) {
    row.setZero();
    row[0] = 1.0;
    for (const auto& tok : docs[i].tokens) {
      auto it = term_index.find(tok);
      if (it != term_index.end()) row[1 + it->second] += 1.0;
    }
    double target = std::log1p(static_cast<double>(docs[i].citations));
    xtx.noalias() += row * row.transpose();
    xty.noalias() += target * row;
  }
  for (Eigen::Index j = 1; j < p; ++j) xtx(j, j) += ridge_lambda;  // intercept unpenalized
  Vec w = xtx.ldlt().solve(xty);
  model.intercept = w[0];
  model.weights = w.tail(p - 1);
  return model;
}

std::vector<double> bows_covariate(std::span<const Document> docs,
                                   std::span<const std::size_t> train_idx, int top_terms,
                                   double ridge_lambda) {
  BowsModel model = fit_bows(docs, train_idx, top_terms, ridge_lambda);
  std::vector<double> out(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out[i] = model.predict(docs[i]);
  return out;
}

std::vector<int> count_innovations(std::span<const Document> docs,
                                   std::span<const std::string> innovations) {
  std::unordered_map<std::string, int> innov;
  for (const auto& w : innovations) innov.emplace(w, 0);
  std::vector<int> out(docs.size(), 0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto& [w, mark] : innov) mark = 0;
    int count = 0;
    for (const auto& tok : docs[d].tokens) {
      auto it = innov.find(tok);
      if (it != innov.end() && it->second == 0) {
        it->second = 1;
        ++count;
      }
    }
    out[d] = count;
  }
  return out;
}

ModelSpec model_spec_from_string(const std::string& name) {
  if (name == "M1") return ModelSpec::M1;
  if (name == "M2") return ModelSpec::M2;
  if (name == "M3") return ModelSpec::M3;
  if (name == "M4") return ModelSpec::M4;
  throw Error("unknown regression model '" + name + "' (expected M1, M2, M3 or M4)");
}

std::string to_string(ModelSpec spec) {
  switch (spec) {
    case ModelSpec::M1: return "M1";
    case ModelSpec::M2: return "M2";
    case ModelSpec::M3: return "M3";
    case ModelSpec::M4: return "M4";
  }
  throw Error("unknown model spec");
}

DesignMatrix build_design(std::span<const Document> docs, const ScoreTable& scores,
                          std::span<const double> bows, std::span<const int> n_innovs,
                          ModelSpec spec) {
  if (docs.empty()) throw Error("build_design: no documents");
  if (bows.size() != docs.size() || n_innovs.size() != docs.size())
    throw Error("build_design: covariate lengths do not match document count");
  std::unordered_map<std::string, const ScoreRow*> score_of;
  for (const auto& row : scores) score_of.emplace(row.id, &row);

  bool have_authors = std::all_of(docs.begin(), docs.end(),
                                  [](const Document& d) { return d.n_authors.has_value(); });
  int max_year = docs[0].year;
  for (const auto& d : docs) max_year = std::max(max_year, d.year);

  DesignMatrix design;
  design.names = {"intercept", "outdegree"};
  if (have_authors) design.names.push_back("n_authors");
  design.names.push_back("age");
  design.names.push_back("length");
  design.names.push_back("bows");
  if (spec != ModelSpec::M1) design.names.push_back("n_innovs");
  if (spec == ModelSpec::M3) design.names.push_back("prog");
  if (spec == ModelSpec::M4) {
    design.names.push_back("prog_q2");
    design.names.push_back("prog_q3");
    design.names.push_back("prog_q4");
  }

  design.X = Mat::Zero(docs.size(), design.names.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Document& doc = docs[i];
    auto it = score_of.find(doc.id);
    if (it == score_of.end())
      throw Error("build_design: no score row for document '" + doc.id + "'");
    const ScoreRow& score = *it->second;
    Eigen::Index col = 0;
    design.X(i, col++) = 1.0;
    design.X(i, col++) = static_cast<double>(doc.outdegree);
    if (have_authors) design.X(i, col++) = static_cast<double>(*doc.n_authors);
    design.X(i, col++) = static_cast<double>(max_year - doc.year);
    design.X(i, col++) = static_cast<double>(doc.length);
    design.X(i, col++) = bows[i];
    if (spec != ModelSpec::M1) design.X(i, col++) = static_cast<double>(n_innovs[i]);
    if (spec == ModelSpec::M3) design.X(i, col++) = score.z;
    if (spec == ModelSpec::M4) {
      design.X(i, col++) = score.quartile == 2 ? 1.0 : 0.0;
      design.X(i, col++) = score.quartile == 3 ? 1.0 : 0.0;
      design.X(i, col++) = score.quartile == 4 ? 1.0 : 0.0;
    }
  }
  return design;
}

std::vector<QuartileStat> univariate_table(const ScoreTable& scores,
                                           std::span<const Document> docs,
                                           int bootstrap_samples, std::uint64_t seed) {
  std::unordered_map<std::string, double> citations;
  for (const auto& doc : docs) citations.emplace(doc.id, static_cast<double>(doc.citations));
  std::array<std::vector<double>, 4> groups;
  for (const auto& row : scores) {
    if (!row.has_innovations || row.quartile < 1) continue;
    auto it = citations.find(row.id);
    if (it == citations.end())
      throw Error("univariate_table: no document for score row '" + row.id + "'");
    groups[row.quartile - 1].push_back(it->second);
  }

  std::vector<QuartileStat> out;
  for (int q = 0; q < 4; ++q) {
    const auto& g = groups[q];
    if (g.empty())
      throw Error("univariate_table: quartile Q" + std::to_string(q + 1) + " is empty");
    QuartileStat stat;
    stat.quartile = q + 1;
    stat.n = static_cast<int>(g.size());
    stat.mean_citations = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
    Rng rng(seed, static_cast<std::uint64_t>(q));
    std::vector<double> means(bootstrap_samples);
    for (int b = 0; b < bootstrap_samples; ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        sum += g[rng.uniform_int(static_cast<std::int64_t>(g.size()))];
      means[b] = sum / g.size();
    }
    std::sort(means.begin(), means.end());
    auto pick = [&](double pct) {
      double pos = pct * (means.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      double frac = pos - static_cast<double>(lo);
      return lo + 1 < means.size() ? means[lo] * (1.0 - frac) + means[lo + 1] * frac
                                   : means[lo];
    };
    stat.ci_low = pick(0.025);
    stat.ci_high = pick(0.975);
    out.push_back(stat);
  }
  return out;
}

}  // namespace semshift
