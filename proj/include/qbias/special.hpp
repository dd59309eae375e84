#pragma once

// Survival functions used by the hypothesis tests. Double precision, no
// external dependencies.

namespace qbias::special {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the far tail.
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
double incomplete_beta(double x, double a, double b);

/// P(X > x) for X ~ chi^2 with `dof` degrees of freedom.
double chi_squared_sf(double x, double dof);

/// P(|Z| >= |z|) for a standard normal Z.
double normal_two_tailed(double z);

/// P(|T| >= |t|) for Student's t with `dof` (possibly fractional) degrees of freedom.
double student_t_two_tailed(double t, double dof);

}  // namespace qbias::special
