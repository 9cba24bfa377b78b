#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acclens/types.hpp"

namespace acclens {

template <typename Scalar>
struct ScatterTraces {
  Scalar sb_trace{};
  Scalar sw_trace{};
  Scalar st_trace{};
};

template <typename Scalar>
struct PcaFractions {
  Scalar pca_50{};
  Scalar pca_75{};
  Scalar pca_99{};
};

template <typename Scalar>
struct MomentStats {
  Scalar train_mean{};
  Scalar train_std{};
  Scalar kurtosis_avg{};
  Scalar kurtosis_std{};
};

namespace detail {

// Subtracting the first row leaves every centred quantity unchanged and makes
// constant columns centre to exact zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> centered_columns(
    const Eigen::MatrixBase<Derived>& m) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat shifted = m.rowwise() - m.row(0);
  const auto mean = shifted.colwise().mean().eval();
  shifted.rowwise() -= mean;
  return shifted;
}

inline int class_count(std::span<const int> y) {
  return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
}

inline std::vector<Eigen::Index> class_sizes(std::span<const int> y) {
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(class_count(y)), 0);
  for (int c : y) {
    if (c < 0) throw DataError("negative class id");
    ++sizes[static_cast<std::size_t>(c)];
  }
  return sizes;
}

}  // namespace detail

/// Row c is the mean embedding of class c.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> prototypes(
    const Eigen::MatrixBase<Derived>& x, std::span<const int> y) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw DataError("label count does not match rows");
  const auto sizes = detail::class_sizes(y);
  Mat protos = Mat::Zero(static_cast<Eigen::Index>(sizes.size()), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) protos.row(y[static_cast<std::size_t>(i)]) += x.row(i);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == 0) throw DataError("class " + std::to_string(c) + " has no samples");
    protos.row(static_cast<Eigen::Index>(c)) /= static_cast<Scalar>(sizes[c]);
  }
  return protos;
}

/// Between-class (class-count weighted), average within-class (sample covariance)
/// and total scatter traces.
template <typename Derived>
ScatterTraces<typename Derived::Scalar> scatter_traces(const Eigen::MatrixBase<Derived>& x,
                                                       std::span<const int> y) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto sizes = detail::class_sizes(y);
  for (std::size_t c = 0; c < sizes.size(); ++c)
    if (sizes[c] < 2)
      throw DataError("class " + std::to_string(c) + " has fewer than 2 samples; covariance undefined");

  const Mat shifted = x.rowwise() - x.row(0);
  const Mat protos = prototypes(shifted, y);
  const auto global = shifted.colwise().mean().eval();

  std::vector<Scalar> within(sizes.size(), Scalar(0));
  for (Eigen::Index i = 0; i < shifted.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    within[static_cast<std::size_t>(c)] += (shifted.row(i) - protos.row(c)).squaredNorm();
  }

  const auto n = static_cast<Scalar>(x.rows());
  ScatterTraces<Scalar> out;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const auto nc = static_cast<Scalar>(sizes[c]);
    out.sw_trace += within[c] / (nc - Scalar(1));
    out.sb_trace += (nc / n) * (protos.row(static_cast<Eigen::Index>(c)) - global).squaredNorm();
  }
  out.sw_trace /= static_cast<Scalar>(sizes.size());
  out.st_trace = out.sb_trace + out.sw_trace;
  return out;
}

/// Mean squared deviation of the column correlation matrix from the identity,
/// averaged over all d*d entries. Zero-variance columns correlate 0 with others.
template <typename Derived>
typename Derived::Scalar corr_msd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = m.cols();
  if (d < 2) throw DataError("corr_msd needs at least 2 columns");
  const auto c = detail::centered_columns(m);
  const auto gram = (c.transpose() * c).eval();
  Scalar total(0);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j) continue;
      const Scalar denom = std::sqrt(gram(i, i) * gram(j, j));
      const Scalar r = denom > Scalar(0) ? gram(i, j) / denom : Scalar(0);
      total += r * r;
    }
  }
  return total / static_cast<Scalar>(d * d);
}

/// Signed cosine similarity averaged over unordered column pairs.
template <typename Derived>
typename Derived::Scalar mean_pairwise_cos(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = m.cols();
  if (d < 2) throw DataError("mean_pairwise_cos needs at least 2 columns");
  const auto gram = (m.transpose() * m).eval();
  Scalar total(0);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const Scalar denom = std::sqrt(gram(i, i)) * std::sqrt(gram(j, j));
      if (denom > Scalar(0)) total += gram(i, j) / denom;
    }
  }
  return total / static_cast<Scalar>(d * (d - 1) / 2);
}

/// Fraction of dimensions needed to reach 50/75/99% explained variance.
template <typename Derived>
PcaFractions<typename Derived::Scalar> pca_fractions(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (x.rows() < 2) throw DataError("pca_fractions needs at least 2 samples");
  const Eigen::Index d = x.cols();
  const auto c = detail::centered_columns(x);
  const Mat cov = (c.transpose() * c) / static_cast<Scalar>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Mat> solver(cov, Eigen::EigenvaluesOnly);
  std::vector<Scalar> eig(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) eig[static_cast<std::size_t>(i)] = std::max(solver.eigenvalues()[i], Scalar(0));
  std::sort(eig.begin(), eig.end(), std::greater<>());
  Scalar total(0);
  for (Scalar v : eig) total += v;

  const auto fraction_for = [&](Scalar threshold) {
    if (!(total > Scalar(0))) return Scalar(1) / static_cast<Scalar>(d);
    Scalar cum(0);
    for (std::size_t k = 0; k < eig.size(); ++k) {
      cum += eig[k];
      // Relative slack absorbs rounding in exactly-tied spectra.
      if (cum / total >= threshold - Scalar(1e-12))
        return static_cast<Scalar>(k + 1) / static_cast<Scalar>(d);
    }
    return Scalar(1);
  };
  return {fraction_for(Scalar(0.50)), fraction_for(Scalar(0.75)), fraction_for(Scalar(0.99))};
}

/// Global mean/std over all entries plus per-column Fisher excess kurtosis summary.
template <typename Derived>
MomentStats<typename Derived::Scalar> moment_stats(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw DataError("moment_stats needs at least 2 samples");
  const Scalar anchor = x(0, 0);
  const auto shifted = (x.array() - anchor).eval();
  const Scalar shift_mean = shifted.mean();
  const auto count = static_cast<Scalar>(x.size());

  MomentStats<Scalar> out;
  out.train_mean = anchor + shift_mean;
  out.train_std = std::sqrt((shifted - shift_mean).square().sum() / count);

  const auto c = detail::centered_columns(x);
  const auto n = static_cast<Scalar>(x.rows());
  std::vector<Scalar> g2(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto sq = c.col(j).array().square().eval();
    const Scalar m2 = sq.sum() / n;
    const Scalar m4 = sq.square().sum() / n;
    g2[static_cast<std::size_t>(j)] = m2 > Scalar(0) ? m4 / (m2 * m2) - Scalar(3) : Scalar(0);
  }
  Scalar mean(0);
  for (Scalar v : g2) mean += v;
  mean /= static_cast<Scalar>(g2.size());
  Scalar var(0);
  for (Scalar v : g2) var += (v - mean) * (v - mean);
  out.kurtosis_avg = mean;
  out.kurtosis_std = std::sqrt(var / static_cast<Scalar>(g2.size()));
  return out;
}

struct ShapiroResult {
  double w = 1.0;
  double p_value = 1.0;
};

/// Royston's AS R94 Shapiro-Wilk statistic for one sample (n >= 3).
/// A zero-range sample yields W = 1, p = 1.
ShapiroResult shapiro_wilk(std::span<const double> sample);

/// Mean Shapiro-Wilk W over columns. Above 5000 rows the same seeded subsample
/// of 5000 rows is used for every column.
double shapiro_avg(const Matrix& x, std::uint64_t seed = 0);

/// All 19 statistics, computed on the l2-normalized training split.
StatsVector compute_stats(const EmbeddingDataset& ds, std::uint64_t seed = 0);

/// compute_stats wrapped into a record whose accuracy is still unset.
MetaRecord stats_record(const EmbeddingDataset& ds, std::uint64_t seed = 0);

}  // namespace acclens
