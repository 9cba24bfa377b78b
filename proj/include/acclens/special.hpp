#pragma once

namespace acclens::special {

/// Upper tail of the standard normal, P(Z > z).
double normal_upper_tail(double z);

/// Inverse of the standard normal CDF, p in (0,1).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student t statistic with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

}  // namespace acclens::special
