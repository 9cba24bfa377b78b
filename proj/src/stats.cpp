#include "acclens/stats.hpp"

#include <numeric>
#include <random>

#include "acclens/probe.hpp"
#include "acclens/special.hpp"

namespace acclens {

namespace {

// Polynomial with c[0] as the constant term.
double poly(const double* c, int nord, double x) {
  double result = c[0];
  if (nord == 1) return result;
  double p = x * c[nord - 1];
  for (int j = nord - 2; j > 0; --j) p = (p + c[j]) * x;
  return result + p;
}

// Coefficients a[0..n/2) of AS R94; the full vector is antisymmetric.
std::vector<double> royston_coefficients(std::size_t n) {
  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  const double an = static_cast<double>(n);
  const double an25 = an + 0.25;
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = special::normal_quantile((static_cast<double>(i + 1) - 0.375) / an25);
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;

  std::size_t first_scaled = 0;
  double fac = 0.0;
  if (n > 5) {
    first_scaled = 2;
    const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[0] = a1;
    a[1] = a2;
  } else {
    first_scaled = 1;
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    a[0] = a1;
  }
  for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

double royston_p_value(double w, std::size_t n) {
  static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};
  const double an = static_cast<double>(n);
  if (n == 3) {
    constexpr double kSixOverPi = 1.90985931710274;
    constexpr double kPiOverThree = 1.04719755119660;
    return std::clamp(kSixOverPi * (std::asin(std::sqrt(w)) - kPiOverThree), 0.0, 1.0);
  }
  const double w1 = 1.0 - w;
  if (!(w1 > 0.0)) return 1.0;
  double y = std::log(w1);
  double mean = 0.0;
  double sd = 1.0;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) return 1e-99;
    y = -std::log(gamma - y);
    mean = poly(c3, 4, an);
    sd = std::exp(poly(c4, 4, an));
  } else {
    const double ln = std::log(an);
    mean = poly(c5, 4, ln);
    sd = std::exp(poly(c6, 3, ln));
  }
  return special::normal_upper_tail((y - mean) / sd);
}

}  // namespace

ShapiroResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) throw DataError("shapiro_wilk needs at least 3 samples");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0)) return {};

  const auto half_coeffs = royston_coefficients(n);
  std::vector<double> coeff(n, 0.0);
  for (std::size_t i = 0; i < half_coeffs.size(); ++i) {
    coeff[i] = -half_coeffs[i];
    coeff[n - 1 - i] = half_coeffs[i];
  }

  // Squared correlation between range-scaled data and coefficients; 1 - W is
  // formed directly to keep precision for W close to 1.
  double sx = 0.0;
  double sa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i] / range;
    sa += coeff[i];
  }
  sx /= static_cast<double>(n);
  sa /= static_cast<double>(n);
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coeff[i] - sa;
    const double xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  ShapiroResult out;
  out.w = std::clamp(1.0 - w1, 0.0, 1.0);
  out.p_value = royston_p_value(out.w, n);
  return out;
}

double shapiro_avg(const Matrix& x, std::uint64_t seed) {
  constexpr Eigen::Index kMaxRows = 5000;
  if (x.rows() < 3) throw DataError("shapiro needs at least 3 samples");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (x.rows() > kMaxRows) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(kMaxRows));
    std::sort(rows.begin(), rows.end());
  }
  std::vector<double> column(rows.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = x(rows[i], j);
    total += shapiro_wilk(column).w;
  }
  return total / static_cast<double>(x.cols());
}

StatsVector compute_stats(const EmbeddingDataset& ds, std::uint64_t seed) {
  ds.validate();
  if (ds.dim() < 2) throw DataError(ds.dataset_id + ": dim < 2, pairwise statistics undefined");
  const int k = ds.n_classes();
  if (k < 2) throw DataError(ds.dataset_id + ": need at least 2 classes");

  const Matrix x = l2_normalize(ds.train_x);
  const auto traces = scatter_traces(x, ds.train_y);
  const auto pca = pca_fractions(x);
  const auto moments = moment_stats(x);
  const Matrix protos = prototypes(x, ds.train_y);

  StatsVector s;
  s[Stat::dim] = static_cast<double>(ds.dim());
  s[Stat::n_classes] = static_cast<double>(k);
  s[Stat::n_train] = static_cast<double>(ds.train_x.rows());
  s[Stat::n_test] = static_cast<double>(ds.test_x.rows());
  s[Stat::sb_trace] = traces.sb_trace;
  s[Stat::sw_trace] = traces.sw_trace;
  s[Stat::st_trace] = traces.st_trace;
  s[Stat::feats_corr] = corr_msd(x);
  s[Stat::feats_cos_sim] = mean_pairwise_cos(x);
  s[Stat::pca_50] = pca.pca_50;
  s[Stat::pca_75] = pca.pca_75;
  s[Stat::pca_99] = pca.pca_99;
  s[Stat::train_mean] = moments.train_mean;
  s[Stat::train_std] = moments.train_std;
  s[Stat::kurtosis_avg] = moments.kurtosis_avg;
  s[Stat::kurtosis_std] = moments.kurtosis_std;
  s[Stat::shapiro] = shapiro_avg(x, seed);
  // Prototypes become columns so correlations and cosines are taken between classes.
  const Matrix proto_cols = protos.transpose();
  s[Stat::prototypes_corr] = corr_msd(proto_cols);
  s[Stat::prototypes_cos_sim] = mean_pairwise_cos(proto_cols);
  return s;
}

MetaRecord stats_record(const EmbeddingDataset& ds, std::uint64_t seed) {
  MetaRecord r;
  r.dataset_id = ds.dataset_id;
  r.subset_tag = ds.subset_tag;
  r.stats = compute_stats(ds, seed);
  return r;
}

}  // namespace acclens
