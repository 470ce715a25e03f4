#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "semshift/rng.hpp"
#include "semshift/validate.hpp"

using namespace semshift;

namespace {

Document doc(std::string id, int year, std::vector<std::string> tokens,
             std::int64_t citations = 0) {
  Document d;
  d.id = std::move(id);
  d.year = year;
  d.length = unique_token_count(tokens);
  d.tokens = std::move(tokens);
  d.citations = citations;
  return d;
}

DesignMatrix intercept_only(int n) {
  DesignMatrix design;
  design.names = {"intercept"};
  design.X = Mat::Ones(n, 1);
  return design;
}

}  // namespace

TEST_SUITE_BEGIN("validate");

TEST_CASE("intercept-only poisson has the analytic mle") {
  // y identically 7 over 13 observations: beta0 = log 7 and the
  // log-likelihood evaluates to 13 (7 log 7 - 7 - log 7!).
  std::vector<double> y(13, 7.0);
  auto fit = fit_poisson(intercept_only(13), y);
  REQUIRE(fit.converged);
  CHECK(fit.coefficients[0] == doctest::Approx(1.9459101490553132).epsilon(1e-10));
  CHECK(fit.loglik == doctest::Approx(-24.74927412981689).epsilon(1e-10));
  CHECK(fit.n_obs == 13);
  // SE of the intercept MLE is 1/sqrt(sum y).
  CHECK(fit.standard_errors[0] == doctest::Approx(1.0 / std::sqrt(91.0)).epsilon(1e-8));
}

TEST_CASE("poisson loglik is self-consistent at the fitted coefficients") {
  Rng rng(1);
  const int n = 400;
  DesignMatrix design;
  design.names = {"intercept", "x"};
  design.X = Mat::Ones(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    design.X(i, 1) = rng.normal();
    y[i] = static_cast<double>(rng.poisson(std::exp(0.5 + 0.3 * design.X(i, 1))));
  }
  auto fit = fit_poisson(design, y);
  REQUIRE(fit.converged);
  CHECK(fit.loglik ==
        doctest::Approx(poisson_loglik(design, y, fit.coefficients)).epsilon(1e-8));
}

TEST_CASE("poisson regression recovers simulated coefficients within 3 se") {
  Rng rng(2);
  const int n = 50000;
  DesignMatrix design;
  design.names = {"intercept", "x"};
  design.X = Mat::Ones(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    design.X(i, 1) = rng.normal();
    y[i] = static_cast<double>(rng.poisson(std::exp(0.5 + 0.3 * design.X(i, 1))));
  }
  auto fit = fit_poisson(design, y);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.coefficients[0] - 0.5) < 3.0 * fit.standard_errors[0]);
  CHECK(std::abs(fit.coefficients[1] - 0.3) < 3.0 * fit.standard_errors[1]);
}

TEST_CASE("irls matches a fine newton grid on a two-parameter problem") {
  Rng rng(3);
  const int n = 200;
  DesignMatrix design;
  design.names = {"intercept", "x"};
  design.X = Mat::Ones(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    design.X(i, 1) = rng.uniform(-1.0, 1.0);
    y[i] = static_cast<double>(rng.poisson(std::exp(0.2 + 0.8 * design.X(i, 1))));
  }
  auto fit = fit_poisson(design, y);
  REQUIRE(fit.converged);
  // Local grid around the optimum: no nearby point should beat it by more
  // than the stated slack.
  double best = fit.loglik;
  for (double d0 = -0.02; d0 <= 0.02; d0 += 0.004) {
    for (double d1 = -0.02; d1 <= 0.02; d1 += 0.004) {
      Vec beta = fit.coefficients;
      beta[0] += d0;
      beta[1] += d1;
      CHECK(poisson_loglik(design, y, beta) <= best + 1e-6);
    }
  }
}

TEST_CASE("rank-deficient designs name the collinear columns") {
  DesignMatrix design;
  design.names = {"intercept", "dup_a", "dup_b"};
  design.X = Mat::Ones(6, 3);
  for (int i = 0; i < 6; ++i) {
    design.X(i, 1) = i;
    design.X(i, 2) = 2.0 * i;  // collinear with dup_a; larger norm, pivoted first
  }
  std::vector<double> y{1, 2, 1, 3, 2, 4};
  CHECK_THROWS_WITH_AS(fit_poisson(design, y), doctest::Contains("dup_a"), Error);
}

TEST_CASE("poisson rejects invalid input shapes and values") {
  std::vector<double> y{1.0, 2.0};
  CHECK_THROWS_AS(fit_poisson(intercept_only(3), y), Error);
  std::vector<double> neg{1.0, -2.0, 0.0};
  CHECK_THROWS_AS(fit_poisson(intercept_only(3), neg), Error);
}

TEST_CASE("lr test basics") {
  auto equal = lr_test(-10.0, -10.0, 1);
  CHECK(equal.statistic == doctest::Approx(0.0));
  CHECK(equal.p_value == doctest::Approx(1.0));

  auto at_05 = lr_test(-10.0, -10.0 + 3.8415 / 2.0, 1);
  CHECK(at_05.statistic == doctest::Approx(3.8415).epsilon(1e-12));
  CHECK(at_05.p_value == doctest::Approx(0.049998772071222324).epsilon(1e-9));

  CHECK_THROWS_AS(lr_test(-5.0, -6.0, 1), Error);       // full worse than restricted
  CHECK_NOTHROW(lr_test(-5.0, -5.0 - 1e-9, 1));         // fp slack tolerated
  CHECK_THROWS_AS(lr_test(-5.0, -5.0, 0), Error);       // df must be positive
}

TEST_CASE("lr test p-values are roughly uniform under the null") {
  // Null model Poisson(exp(0.3)); the full model adds a useless covariate.
  Rng rng(4);
  const int sims = 200, n = 120;
  int below_half = 0, below_tenth = 0;
  for (int s = 0; s < sims; ++s) {
    DesignMatrix full;
    full.names = {"intercept", "junk"};
    full.X = Mat::Ones(n, 2);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
      full.X(i, 1) = rng.normal();
      y[i] = static_cast<double>(rng.poisson(std::exp(0.3)));
    }
    DesignMatrix restricted;
    restricted.names = {"intercept"};
    restricted.X = Mat::Ones(n, 1);
    auto fr = fit_poisson(restricted, y);
    auto ff = fit_poisson(full, y);
    auto test = lr_test(fr.loglik, ff.loglik, 1);
    if (test.p_value < 0.5) ++below_half;
    if (test.p_value < 0.1) ++below_tenth;
  }
  CHECK(below_half > sims * 0.5 - 3.0 * std::sqrt(sims * 0.25));
  CHECK(below_half < sims * 0.5 + 3.0 * std::sqrt(sims * 0.25));
  CHECK(below_tenth > sims * 0.1 - 3.0 * std::sqrt(sims * 0.09));
  CHECK(below_tenth < sims * 0.1 + 3.0 * std::sqrt(sims * 0.09));
}

TEST_CASE("cameron-trivedi flags overdispersion and not its absence") {
  Rng rng(5);
  const int n = 2000;
  std::vector<double> mu(n), y_pois(n), y_nb(n);
  for (int i = 0; i < n; ++i) {
    mu[i] = std::exp(rng.uniform(0.0, 2.0));
    y_pois[i] = static_cast<double>(rng.poisson(mu[i]));
    // Poisson-exponential mixture: Var = mu + mu^2, strongly overdispersed.
    double lambda = mu[i] * -std::log(1.0 - rng.uniform());
    y_nb[i] = static_cast<double>(rng.poisson(lambda));
  }
  auto dispersed = cameron_trivedi(y_nb, mu);
  CHECK(dispersed.statistic > 0.0);
  CHECK(dispersed.p_value < 0.01);

  // Under the null the rejection rate stays near the nominal level.
  const int sims = 200;
  int rejections = 0;
  for (int s = 0; s < sims; ++s) {
    std::vector<double> ys(500), mus(500);
    for (int i = 0; i < 500; ++i) {
      mus[i] = std::exp(rng.uniform(0.0, 2.0));
      ys[i] = static_cast<double>(rng.poisson(mus[i]));
    }
    if (cameron_trivedi(ys, mus).p_value < 0.05) ++rejections;
  }
  CHECK(rejections < sims * 0.15);
}

TEST_CASE("cameron-trivedi on y equal to mu exactly shows no signal") {
  std::vector<double> y{1.0, 2.0, 3.0, 4.0, 5.0};
  auto result = cameron_trivedi(y, y);
  CHECK(result.statistic <= 0.0);

  std::vector<double> bad_mu{1.0, 0.0, 3.0, 4.0, 5.0};
  CHECK_THROWS_AS(cameron_trivedi(y, bad_mu), Error);
}

TEST_CASE("ks two-sample statistic and p-value") {
  std::vector<double> same{1.0, 2.0, 3.0, 4.0, 5.0};
  auto equal = ks_two_sample(same, same);
  CHECK(equal.statistic == doctest::Approx(0.0));
  CHECK(equal.p_value == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> a(1000), b(1000);
  for (int i = 0; i < 1000; ++i) {
    a[i] = 1.0 + i;
    b[i] = 501.0 + i;
  }
  auto shifted = ks_two_sample(a, b);
  CHECK(shifted.statistic == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(shifted.p_value == doctest::Approx(3.242755446918219e-110).epsilon(1e-6));

  std::vector<double> lo{1.0, 2.0, 3.0}, hi{10.0, 11.0};
  auto disjoint = ks_two_sample(lo, hi);
  CHECK(disjoint.statistic == doctest::Approx(1.0));

  std::vector<double> empty;
  CHECK_THROWS_AS(ks_two_sample(empty, same), Error);
}

TEST_CASE("ks same-distribution draws rarely reject") {
  Rng rng(6);
  const int sims = 100;
  int accepted = 0;
  for (int s = 0; s < sims; ++s) {
    std::vector<double> a(500), b(500);
    for (int i = 0; i < 500; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    if (ks_two_sample(a, b).p_value > 0.05) ++accepted;
  }
  CHECK(accepted >= 90);
}

TEST_CASE("bows regression learns a deterministic citation rule") {
  // citations = 3 * count("signal"): near-perfect held-out fit.
  Rng rng(7);
  std::vector<Document> docs;
  std::vector<std::size_t> train_idx;
  for (int i = 0; i < 200; ++i) {
    int k = static_cast<int>(rng.uniform_int(5));
    std::vector<std::string> tokens{"base", "base"};
    for (int j = 0; j < k; ++j) tokens.push_back("signal");
    for (int j = 0; j < 3; ++j) tokens.push_back("filler" + std::to_string(rng.uniform_int(4)));
    std::int64_t cites =
        static_cast<std::int64_t>(std::llround(std::expm1(0.7 * k)));  // log1p-linear in k
    docs.push_back(doc("d" + std::to_string(i), 2000, tokens, cites));
    if (i < 100) train_idx.push_back(static_cast<std::size_t>(i));
  }
  auto model = fit_bows(docs, train_idx, 10, 1e-6);
  double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
  for (int i = 100; i < 200; ++i) mean += std::log1p(static_cast<double>(docs[i].citations));
  mean /= 100.0;
  for (int i = 100; i < 200; ++i) {
    double target = std::log1p(static_cast<double>(docs[i].citations));
    double pred = model.predict(docs[i]);
    ss_res += (target - pred) * (target - pred);
    ss_tot += (target - mean) * (target - mean);
  }
  CHECK(1.0 - ss_res / ss_tot > 0.95);

  // A document sharing no top term predicts the intercept alone.
  Document alien = doc("alien", 2000, {"unrelated", "words"});
  CHECK(model.predict(alien) == doctest::Approx(model.intercept).epsilon(1e-12));
}

TEST_CASE("huge ridge collapses bows predictions to the intercept") {
  Rng rng(8);
  std::vector<Document> docs;
  std::vector<std::size_t> train_idx;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::string> tokens{"alpha", "beta"};
    if (i % 2 == 0) tokens.push_back("gamma");
    docs.push_back(doc("d" + std::to_string(i), 2000, tokens, rng.uniform_int(20)));
    train_idx.push_back(static_cast<std::size_t>(i));
  }
  auto model = fit_bows(docs, train_idx, 5, 1e12);
  for (const auto& d : docs)
    CHECK(model.predict(d) == doctest::Approx(model.intercept).epsilon(1e-4));

  auto preds = bows_covariate(docs, train_idx, 5, 1.0);
  CHECK(preds.size() == docs.size());

  std::vector<std::size_t> empty_idx;
  CHECK_THROWS_AS(fit_bows(docs, empty_idx, 5, 1.0), Error);
}

TEST_CASE("innovation counts are per-document distinct matches") {
  std::vector<std::string> innovations{"net", "web"};
  std::vector<Document> docs{doc("a", 2000, {"net", "net", "web", "x"}),
                             doc("b", 2000, {"x", "web"}), doc("c", 2000, {"x", "y"})};
  auto counts = count_innovations(docs, innovations);
  CHECK(counts == std::vector<int>{2, 1, 0});
}

TEST_CASE("model specs parse and print") {
  CHECK(model_spec_from_string("M1") == ModelSpec::M1);
  CHECK(model_spec_from_string("M4") == ModelSpec::M4);
  CHECK(to_string(ModelSpec::M3) == "M3");
  CHECK_THROWS_AS(model_spec_from_string("M9"), Error);
}

TEST_CASE("design matrices follow the model ladder") {
  std::vector<Document> docs;
  for (int i = 0; i < 8; ++i) {
    auto d = doc("d" + std::to_string(i), 2000 + i % 3, {"alpha", "beta"}, 5 + i);
    d.outdegree = i;
    docs.push_back(d);
  }
  ScoreTable scores(8);
  for (int i = 0; i < 8; ++i) {
    scores[i].id = "d" + std::to_string(i);
    scores[i].year = docs[i].year;
    scores[i].m = 0.1 * i;
    scores[i].z = 0.2 * i - 0.8;
    scores[i].quartile = 1 + i % 4;
    scores[i].has_innovations = i != 5;  // one unscored doc
    scores[i].n_count = i % 2;
  }
  scores[5].z = 0.0;
  scores[5].quartile = 0;
  std::vector<double> bows(8, 0.5);
  std::vector<int> n_innovs{0, 1, 2, 0, 1, 0, 2, 1};

  auto m1 = build_design(docs, scores, bows, n_innovs, ModelSpec::M1);
  CHECK(m1.names == std::vector<std::string>{"intercept", "outdegree", "age", "length", "bows"});
  CHECK(m1.X.rows() == 8);
  // Age is max corpus year minus the document year.
  CHECK(m1.X(0, 2) == doctest::Approx(2.0));  // doc year 2000, max 2002
  CHECK(m1.X(2, 2) == doctest::Approx(0.0));

  auto m2 = build_design(docs, scores, bows, n_innovs, ModelSpec::M2);
  CHECK(m2.names.back() == "n_innovs");
  CHECK(m2.X(6, m2.X.cols() - 1) == doctest::Approx(2.0));

  auto m3 = build_design(docs, scores, bows, n_innovs, ModelSpec::M3);
  CHECK(m3.names.back() == "prog");
  CHECK(m3.X(0, m3.X.cols() - 1) == doctest::Approx(-0.8));
  CHECK(m3.X(5, m3.X.cols() - 1) == doctest::Approx(0.0));  // unscored doc

  auto m4 = build_design(docs, scores, bows, n_innovs, ModelSpec::M4);
  auto& names = m4.names;
  REQUIRE(names.size() >= 3);
  CHECK(names[names.size() - 3] == "prog_q2");
  CHECK(names[names.size() - 2] == "prog_q3");
  CHECK(names[names.size() - 1] == "prog_q4");
  for (int i = 0; i < 8; ++i) {
    double dummies = m4.X(i, m4.X.cols() - 3) + m4.X(i, m4.X.cols() - 2) +
                     m4.X(i, m4.X.cols() - 1);
    if (scores[i].quartile <= 1) {
      CHECK(dummies == 0.0);  // Q1 and unscored docs share the zero reference
    } else {
      CHECK(dummies == 1.0);
      CHECK(m4.X(i, m4.X.cols() - 4 + scores[i].quartile - 1) == 1.0);
    }
  }

  // n_authors joins the design only when every document carries it.
  for (auto& d : docs) d.n_authors = 2;
  auto with_authors = build_design(docs, scores, bows, n_innovs, ModelSpec::M1);
  CHECK(std::find(with_authors.names.begin(), with_authors.names.end(), "n_authors") !=
        with_authors.names.end());
  docs[3].n_authors.reset();
  auto without = build_design(docs, scores, bows, n_innovs, ModelSpec::M1);
  CHECK(std::find(without.names.begin(), without.names.end(), "n_authors") == without.names.end());

  // A document missing from the score table is an error.
  scores.pop_back();
  CHECK_THROWS_AS(build_design(docs, scores, bows, n_innovs, ModelSpec::M3), Error);
}

TEST_CASE("the model ladder log-likelihoods are nested") {
  Rng rng(9);
  std::vector<Document> docs;
  ScoreTable scores;
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> tokens{"x"};
    for (int t = 0; t < i % 7; ++t) tokens.push_back("y" + std::to_string(t));
    auto d = doc("d" + std::to_string(i), 2000 + i % 5, tokens,
                 rng.poisson(3.0 + (i % 4)));
    d.outdegree = rng.uniform_int(10);
    docs.push_back(d);
    ScoreRow row;
    row.id = d.id;
    row.year = d.year;
    row.m = rng.normal();
    row.z = rng.normal();
    row.quartile = 1 + static_cast<int>(rng.uniform_int(4));
    row.has_innovations = rng.uniform() < 0.8;
    if (!row.has_innovations) {
      row.z = 0.0;
      row.quartile = 0;
    }
    scores.push_back(row);
  }
  std::vector<double> bows(docs.size());
  std::vector<int> n_innovs(docs.size());
  std::vector<double> y(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    bows[i] = rng.normal() * 0.1;
    n_innovs[i] = static_cast<int>(rng.uniform_int(3));
    y[i] = static_cast<double>(docs[i].citations);
  }
  auto ll = [&](ModelSpec spec) {
    return fit_poisson(build_design(docs, scores, bows, n_innovs, spec), y).loglik;
  };
  double l1 = ll(ModelSpec::M1), l2 = ll(ModelSpec::M2), l3 = ll(ModelSpec::M3),
         l4 = ll(ModelSpec::M4);
  CHECK(l2 >= l1 - 1e-7);
  CHECK(l3 >= l2 - 1e-7);
  CHECK(l4 >= l2 - 1e-7);
}

TEST_CASE("univariate quartile table means, counts and cis") {
  std::vector<Document> docs;
  ScoreTable scores;
  // 40 scored docs, 10 per quartile, citations increasing with quartile.
  Rng rng(10);
  for (int q = 1; q <= 4; ++q) {
    for (int i = 0; i < 10; ++i) {
      std::string id = "q" + std::to_string(q) + "_" + std::to_string(i);
      docs.push_back(doc(id, 2000, {"x"}, 10 * q + static_cast<int>(rng.uniform_int(3))));
      ScoreRow row;
      row.id = id;
      row.year = 2000;
      row.quartile = q;
      row.has_innovations = true;
      scores.push_back(row);
    }
  }
  // Unscored docs never enter the table.
  docs.push_back(doc("skip", 2000, {"x"}, 1000));
  ScoreRow skip;
  skip.id = "skip";
  skip.year = 2000;
  skip.has_innovations = false;
  scores.push_back(skip);

  auto table = univariate_table(scores, docs, 500, 3);
  REQUIRE(table.size() == 4);
  int total = 0;
  for (int q = 0; q < 4; ++q) {
    CHECK(table[q].quartile == q + 1);
    CHECK(table[q].n == 10);
    total += table[q].n;
    CHECK(table[q].mean_citations == doctest::Approx(10.0 * (q + 1)).epsilon(0.2));
    CHECK(table[q].ci_low <= table[q].mean_citations);
    CHECK(table[q].ci_high >= table[q].mean_citations);
    if (q > 0) CHECK(table[q].mean_citations > table[q - 1].mean_citations);
  }
  CHECK(total == 40);

  auto again = univariate_table(scores, docs, 500, 3);
  for (int q = 0; q < 4; ++q) {
    CHECK(again[q].ci_low == table[q].ci_low);
    CHECK(again[q].ci_high == table[q].ci_high);
  }

  // Identical citations give four equal means.
  for (auto& d : docs) d.citations = 6;
  auto flat = univariate_table(scores, docs, 100, 1);
  for (const auto& row : flat) CHECK(row.mean_citations == doctest::Approx(6.0));

  // An empty quartile is an error.
  for (auto& s : scores)
    if (s.quartile == 2) s.quartile = 3;
  CHECK_THROWS_AS(univariate_table(scores, docs, 100, 1), Error);
}

TEST_SUITE_END();
