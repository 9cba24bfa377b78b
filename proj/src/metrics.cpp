#include "acclens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acclens/special.hpp"

namespace acclens {

namespace {

void require_same_size(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                       const char* what) {
  if (x.size() != y.size())
    throw NumericError(std::string(what) + ": inputs differ in length");
  if (x.size() < min_n)
    throw NumericError(std::string(what) + ": need at least " + std::to_string(min_n) + " values");
}

// Shifted, rescaled copy: centred statistics are unchanged, constant inputs become
// exact zeros, and squares cannot overflow.
std::vector<double> normalized_copy(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (out.empty()) return out;
  const double anchor = out.front();
  double scale = 0.0;
  for (double& v : out) {
    v -= anchor;
    scale = std::max(scale, std::abs(v));
  }
  if (scale > 0.0 && std::isfinite(scale))
    for (double& v : out) v /= scale;
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

bool is_degenerate(std::span<const double> x) {
  if (x.empty()) return true;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double spread = *hi - *lo;
  const double magnitude = std::max(std::abs(*lo), std::abs(*hi));
  return !(spread > 1e-12 * magnitude) || spread == 0.0;
}

std::optional<double> pearson_if_defined(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2 || is_degenerate(x) || is_degenerate(y)) return std::nullopt;
  const auto xs = normalized_copy(x);
  const auto ys = normalized_copy(y);
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0 && syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, 2, "pearson");
  if (auto r = pearson_if_defined(x, y)) return *r;
  throw NumericError("pearson: zero variance, correlation undefined");
}

double pearson_p(double r, std::size_t n) {
  if (n < 3) throw NumericError("pearson_p: need n >= 3");
  const double ar = std::abs(r);
  if (ar >= 1.0) return 0.0;
  if (ar == 0.0) return 1.0;
  const double dof = static_cast<double>(n - 2);
  // t^2 / (dof + t^2) = r^2, so the t-tail reduces to I_{1 - r^2}(dof/2, 1/2).
  return std::clamp(special::incomplete_beta(0.5 * dof, 0.5, 1.0 - ar * ar), 0.0, 1.0);
}

double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  require_same_size(y_true, y_pred, 2, "r2_score");
  if (is_degenerate(y_true)) throw NumericError("r2_score: target has zero variance");
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

Calibration fit_calibration(std::span<const double> p, std::span<const double> alpha) {
  require_same_size(p, alpha, 2, "fit_calibration");
  if (is_degenerate(p)) throw NumericError("fit_calibration: predictions are constant");
  // Shift both series by their first element; the slope is shift invariant.
  const double p0 = p.front();
  const double a0 = alpha.front();
  double mp = 0.0, ma = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i] - p0;
    ma += alpha[i] - a0;
  }
  mp /= static_cast<double>(p.size());
  ma /= static_cast<double>(p.size());
  double spp = 0.0, spa = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = (p[i] - p0) - mp;
    spp += dp * dp;
    spa += dp * ((alpha[i] - a0) - ma);
  }
  Calibration c;
  c.a = spa / spp;
  c.b = (a0 + ma) - c.a * (p0 + mp);
  if (!std::isfinite(c.a) || !std::isfinite(c.b)) throw NumericError("fit_calibration: non-finite coefficients");
  return c;
}

WelchResult welch_t(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) throw NumericError("welch_t: each sample needs at least 2 values");
  const auto moments = [](std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - m) * (v - m);
    return std::pair{m, var / static_cast<double>(s.size() - 1)};
  };
  const auto [mx, vx] = moments(x);
  const auto [my, vy] = moments(y);
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double qx = vx / nx;
  const double qy = vy / ny;
  const double se2 = qx + qy;
  WelchResult out;
  if (!(se2 > 0.0)) {
    if (mx == my) return {0.0, 1.0, nx + ny - 2.0};
    const double inf = std::numeric_limits<double>::infinity();
    return {mx > my ? inf : -inf, 0.0, nx + ny - 2.0};
  }
  out.t = (mx - my) / std::sqrt(se2);
  out.dof = se2 * se2 / (qx * qx / (nx - 1.0) + qy * qy / (ny - 1.0));
  out.p_value = std::clamp(special::student_t_two_sided(out.t, out.dof), 0.0, 1.0);
  return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw NumericError("cosine_sim: vectors differ in length");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (!(uu > 0.0 && vv > 0.0)) throw NumericError("cosine_sim: zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

EvalReport evaluate_predictions(const Vector& train_pred, const Vector& train_alpha, const Vector& test_pred,
                                const Vector& test_alpha, const CalibrationMode& mode) {
  EvalReport report;
  switch (mode.kind) {
    case CalibrationMode::Kind::fit_on_train:
      report.calibration = fit_calibration(as_span(train_pred), as_span(train_alpha));
      break;
    case CalibrationMode::Kind::fixed:
      report.calibration = mode.fixed;
      break;
    case CalibrationMode::Kind::oracle:
      report.calibration = fit_calibration(as_span(test_pred), as_span(test_alpha));
      break;
  }
  const Vector calibrated = report.calibration.apply(test_pred);
  report.n = static_cast<std::size_t>(test_alpha.size());
  report.pearson_r = pearson(as_span(calibrated), as_span(test_alpha));
  report.p_value = pearson_p(report.pearson_r, report.n);
  report.r2 = r2_score(as_span(test_alpha), as_span(calibrated));
  return report;
}

EvalReport evaluate_predictions_lenient(const Vector& train_pred, const Vector& train_alpha,
                                        const Vector& test_pred, const Vector& test_alpha,
                                        const CalibrationMode& mode, bool* defined) {
  try {
    EvalReport report = evaluate_predictions(train_pred, train_alpha, test_pred, test_alpha, mode);
    if (defined) *defined = true;
    return report;
  } catch (const NumericError&) {
    if (defined) *defined = false;
  }
  EvalReport report;
  const Vector& fit_pred = mode.kind == CalibrationMode::Kind::oracle ? test_pred : train_pred;
  const Vector& fit_alpha = mode.kind == CalibrationMode::Kind::oracle ? test_alpha : train_alpha;
  if (mode.kind == CalibrationMode::Kind::fixed) {
    report.calibration = mode.fixed;
  } else if (is_degenerate(as_span(fit_pred))) {
    report.calibration = {0.0, fit_alpha.mean()};
  } else {
    report.calibration = fit_calibration(as_span(fit_pred), as_span(fit_alpha));
  }
  const Vector calibrated = report.calibration.apply(test_pred);
  report.n = static_cast<std::size_t>(test_alpha.size());
  report.pearson_r = pearson_if_defined(as_span(calibrated), as_span(test_alpha)).value_or(0.0);
  report.p_value = report.n >= 3 ? pearson_p(report.pearson_r, report.n) : 1.0;
  report.r2 = is_degenerate(as_span(test_alpha)) ? 0.0 : r2_score(as_span(test_alpha), as_span(calibrated));
  return report;
}

EvalReport evaluate_formula(const Expr& expr, const MetaDataset& train, const MetaDataset& test,
                            const CalibrationMode& mode) {
  const auto predict = [&](const MetaDataset& meta) {
    Vector p = evaluate_batch(expr, meta);
    std::string bad;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (!std::isfinite(p[i])) bad += (bad.empty() ? "" : ", ") + meta.records[static_cast<std::size_t>(i)].dataset_id;
    if (!bad.empty()) throw NumericError("non-finite prediction for: " + bad);
    return p;
  };
  const Vector test_pred = predict(test);
  const Vector train_pred = mode.kind == CalibrationMode::Kind::fit_on_train ? predict(train) : Vector();
  return evaluate_predictions(train_pred, train.accuracies(), test_pred, test.accuracies(), mode);
}

}  // namespace acclens
