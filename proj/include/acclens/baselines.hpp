#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acclens/metrics.hpp"
#include "acclens/types.hpp"

namespace acclens {

/// Linear predictor over (optionally log-transformed) statistics.
struct LinearModel {
  std::vector<Stat> variables;
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool log_transformed = false;
  std::vector<Stat> dropped;  // removed by the positivity rule before fitting

  [[nodiscard]] Vector predict(const MetaDataset& meta) const;
  /// e.g. "0.5 + 1*log(sb_trace) - 1*log(st_trace)"
  [[nodiscard]] std::string describe() const;
};

/// Variables that are strictly positive on every record; the rest go to `dropped`.
std::vector<Stat> positive_variables(const MetaDataset& meta, std::span<const Stat> candidates,
                                     std::vector<Stat>* dropped = nullptr);

/// Ordinary least squares with intercept. Under `log_transform`, variables that are
/// not strictly positive on all train records are dropped first. Throws
/// NumericError naming the collinear columns when the design is rank deficient.
LinearModel fit_ols(const MetaDataset& train, std::span<const Stat> variables, bool log_transform);

struct GaConfig {
  int population = 5000;
  int iterations = 300;
  double mutation_rate = 0.1;   // per-gene resample probability
  double crossover_rate = 0.5;  // probability of uniform crossover, else clone
  int tournament_k = 3;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct GaResult {
  std::vector<Stat> variables;
  std::vector<int> coefficients;  // each in {-1, 0, 1}, first nonzero is +1
  double train_fitness = 0.0;     // |pearson| of the signed sum on train
  double train_pearson = 0.0;     // signed pearson of the returned orientation
  bool log_transformed = false;
  std::vector<Stat> dropped;

  [[nodiscard]] LinearModel as_linear_model() const;
  /// Signed sum such as "log(sb_trace) + log(shapiro) - log(sw_trace)".
  [[nodiscard]] std::string render() const;
};

/// Design matrix (records x variables), log-transformed on request.
Matrix design_columns(const MetaDataset& meta, std::span<const Stat> variables, bool log_transform);

/// |pearson(x * c, target)|, 0 when the sum is constant.
double signed_sum_fitness(const Matrix& x, const Vector& target, std::span<const int> coefficients);

/// Flips the sign so that the first nonzero coefficient is +1.
std::vector<int> canonical_sign(std::vector<int> coefficients);

/// Strict ordering of candidates: higher fitness, then fewer nonzero terms, then
/// lexicographically smaller canonical vector.
bool better_sum(double fitness_a, std::span<const int> a, double fitness_b, std::span<const int> b);

GaResult ga_sum_search(const MetaDataset& train, std::span<const Stat> variables, bool log_transform,
                       const GaConfig& cfg);

}  // namespace acclens
