#pragma once

namespace semshift {

// Tail probabilities used by the regression analysis. All are computed from
// the regularized incomplete gamma/beta functions (plus erfc), accurate to
// well below 1e-10 over the ranges exercised here.

// Lower regularized incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);
// Regularized incomplete beta I_x(a, b).
double regularized_beta(double a, double b, double x);

// Upper tail of the chi-squared distribution with df degrees of freedom.
double chi2_sf(double x, double df);
// Upper tail of the standard normal.
double normal_sf(double x);
// Upper tail of Student's t with df degrees of freedom.
double student_t_sf(double t, double df);
// Kolmogorov limiting distribution Q_KS(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_sf(double lambda);

}  // namespace semshift
