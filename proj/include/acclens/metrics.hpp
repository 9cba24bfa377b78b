#pragma once

#include <optional>
#include <span>
#include <string>

#include "acclens/expr.hpp"
#include "acclens/types.hpp"

namespace acclens {

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// True when the sample spread is zero up to 1e-12 relative to its magnitude.
bool is_degenerate(std::span<const double> x);

/// Throws NumericError when either input is degenerate (correlation undefined).
double pearson(std::span<const double> x, std::span<const double> y);

/// Non-throwing variant for hot loops: nullopt where pearson() would throw.
std::optional<double> pearson_if_defined(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of r under the null of zero correlation, n - 2 dof.
double pearson_p(double r, std::size_t n);

double r2_score(std::span<const double> y_true, std::span<const double> y_pred);

struct Calibration {
  double a = 1.0;
  double b = 0.0;

  [[nodiscard]] double apply(double p) const { return a * p + b; }
  [[nodiscard]] Vector apply(const Vector& p) const { return (a * p.array() + b).matrix(); }
  bool operator==(const Calibration&) const = default;
};

/// Least-squares line alpha ~ a * p + b.
Calibration fit_calibration(std::span<const double> p, std::span<const double> alpha);

struct WelchResult {
  double t = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

WelchResult welch_t(std::span<const double> x, std::span<const double> y);

double cosine_sim(std::span<const double> u, std::span<const double> v);

struct EvalReport {
  double pearson_r = 0.0;
  double p_value = 1.0;
  double r2 = 0.0;
  Calibration calibration;
  std::size_t n = 0;

  bool operator==(const EvalReport&) const = default;
};

struct CalibrationMode {
  enum class Kind { fit_on_train, fixed, oracle } kind = Kind::fit_on_train;
  Calibration fixed;

  static CalibrationMode fit_on_train() { return {}; }
  static CalibrationMode oracle() { return {Kind::oracle, {}}; }
  static CalibrationMode with(Calibration c) { return {Kind::fixed, c}; }
};

/// Calibrates raw predictions per `mode` and scores them against the test targets.
EvalReport evaluate_predictions(const Vector& train_pred, const Vector& train_alpha, const Vector& test_pred,
                                const Vector& test_alpha, const CalibrationMode& mode);

/// As evaluate_predictions, except a constant predictor (train or test) yields
/// pearson 0, p 1 and the train-mean calibration instead of throwing. `defined`
/// reports whether the strict evaluation succeeded.
EvalReport evaluate_predictions_lenient(const Vector& train_pred, const Vector& train_alpha,
                                        const Vector& test_pred, const Vector& test_alpha,
                                        const CalibrationMode& mode, bool* defined = nullptr);

/// Throws NumericError listing dataset ids if any prediction is non-finite.
EvalReport evaluate_formula(const Expr& expr, const MetaDataset& train, const MetaDataset& test,
                            const CalibrationMode& mode);

}  // namespace acclens
