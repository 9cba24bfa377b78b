#include "acclens/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "acclens/dataset_io.hpp"
#include "acclens/parallel.hpp"

namespace acclens {

namespace {

int rank_of(const Matrix& columns) {
  Matrix scaled = columns;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0.0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

std::string term(double coefficient, std::string_view name, bool log_transformed, bool first) {
  std::ostringstream out;
  const char* sign = coefficient < 0 ? "-" : "+";
  if (first) {
    if (coefficient < 0) out << "-";
  } else {
    out << ' ' << sign << ' ';
  }
  out << format_real(std::abs(coefficient)) << '*';
  if (log_transformed) out << "log(" << name << ')';
  else out << name;
  return out.str();
}

}  // namespace

Vector LinearModel::predict(const MetaDataset& meta) const {
  const Matrix x = design_columns(meta, variables, log_transformed);
  const Eigen::Map<const Vector> beta(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
  return (x * beta).array() + intercept;
}

std::string LinearModel::describe() const {
  std::string out = format_real(intercept);
  for (std::size_t j = 0; j < variables.size(); ++j)
    out += term(coefficients[j], name_of(variables[j]), log_transformed, false);
  return out;
}

std::vector<Stat> positive_variables(const MetaDataset& meta, std::span<const Stat> candidates,
                                     std::vector<Stat>* dropped) {
  std::vector<Stat> kept;
  for (Stat s : candidates) {
    const bool positive = std::all_of(meta.records.begin(), meta.records.end(),
                                      [s](const MetaRecord& r) { return r.stats[s] > 0.0; });
    if (positive) kept.push_back(s);
    else if (dropped) dropped->push_back(s);
  }
  return kept;
}

Matrix design_columns(const MetaDataset& meta, std::span<const Stat> variables, bool log_transform) {
  Matrix x(static_cast<Eigen::Index>(meta.size()), static_cast<Eigen::Index>(variables.size()));
  for (std::size_t j = 0; j < variables.size(); ++j) {
    const Vector col = meta.column(variables[j]);
    x.col(static_cast<Eigen::Index>(j)) = log_transform ? Vector(col.array().log()) : col;
  }
  return x;
}

LinearModel fit_ols(const MetaDataset& train, std::span<const Stat> variables, bool log_transform) {
  LinearModel model;
  model.log_transformed = log_transform;
  model.variables = log_transform ? positive_variables(train, variables, &model.dropped)
                                  : std::vector<Stat>(variables.begin(), variables.end());
  if (model.variables.empty()) throw NumericError("ols: no usable variables");

  const Matrix x = design_columns(train, model.variables, log_transform);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols() + 1;
  if (n < p) throw NumericError("ols: fewer records than parameters");
  Matrix design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = x;

  if (rank_of(design) < p) {
    // Name every column that adds nothing to the span of the columns before it.
    std::string collinear;
    Matrix accepted = design.leftCols(1);
    for (Eigen::Index j = 1; j < p; ++j) {
      Matrix trial(n, accepted.cols() + 1);
      trial << accepted, design.col(j);
      if (rank_of(trial) == trial.cols()) {
        accepted = trial;
      } else {
        collinear += (collinear.empty() ? "" : ", ") + std::string(name_of(model.variables[static_cast<std::size_t>(j - 1)]));
      }
    }
    throw NumericError("ols: rank-deficient design; collinear columns: " + collinear);
  }

  Vector scale(p);
  Matrix scaled = design;
  for (Eigen::Index j = 0; j < p; ++j) {
    scale[j] = design.col(j).norm();
    scaled.col(j) /= scale[j];
  }
  const Vector beta = scaled.colPivHouseholderQr().solve(train.accuracies()).cwiseQuotient(scale);
  model.intercept = beta[0];
  model.coefficients.assign(beta.data() + 1, beta.data() + p);
  return model;
}

void GaConfig::validate() const {
  if (population < 2) throw DataError("ga: population must be >= 2");
  if (iterations < 0) throw DataError("ga: iterations must be >= 0");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw DataError("ga: mutation rate must lie in [0,1]");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw DataError("ga: crossover rate must lie in [0,1]");
  if (tournament_k < 1) throw DataError("ga: tournament size must be >= 1");
  if (threads < 1) throw DataError("ga: threads must be >= 1");
}

LinearModel GaResult::as_linear_model() const {
  LinearModel model;
  model.variables = variables;
  model.coefficients.assign(coefficients.begin(), coefficients.end());
  model.log_transformed = log_transformed;
  model.dropped = dropped;
  return model;
}

std::string GaResult::render() const {
  std::string out;
  for (std::size_t j = 0; j < variables.size(); ++j) {
    if (coefficients[j] == 0) continue;
    const std::string name = log_transformed ? "log(" + std::string(name_of(variables[j])) + ")"
                                             : std::string(name_of(variables[j]));
    if (out.empty()) out = (coefficients[j] < 0 ? "-" : "") + name;
    else out += (coefficients[j] < 0 ? " - " : " + ") + name;
  }
  return out.empty() ? "0" : out;
}

double signed_sum_fitness(const Matrix& x, const Vector& target, std::span<const int> coefficients) {
  Vector sum = Vector::Zero(x.rows());
  for (std::size_t j = 0; j < coefficients.size(); ++j)
    if (coefficients[j] != 0) sum += static_cast<double>(coefficients[j]) * x.col(static_cast<Eigen::Index>(j));
  const auto r = pearson_if_defined(as_span(sum), as_span(target));
  return r ? std::abs(*r) : 0.0;
}

std::vector<int> canonical_sign(std::vector<int> coefficients) {
  const auto first = std::find_if(coefficients.begin(), coefficients.end(), [](int c) { return c != 0; });
  if (first != coefficients.end() && *first < 0)
    for (int& c : coefficients) c = -c;
  return coefficients;
}

bool better_sum(double fitness_a, std::span<const int> a, double fitness_b, std::span<const int> b) {
  if (fitness_a != fitness_b) return fitness_a > fitness_b;
  const auto nonzero = [](std::span<const int> v) { return std::count_if(v.begin(), v.end(), [](int c) { return c != 0; }); };
  const auto na = nonzero(a);
  const auto nb = nonzero(b);
  if (na != nb) return na < nb;
  const auto ca = canonical_sign(std::vector<int>(a.begin(), a.end()));
  const auto cb = canonical_sign(std::vector<int>(b.begin(), b.end()));
  return ca < cb;
}

GaResult ga_sum_search(const MetaDataset& train, std::span<const Stat> variables, bool log_transform,
                       const GaConfig& cfg) {
  cfg.validate();
  GaResult result;
  result.log_transformed = log_transform;
  result.variables = log_transform ? positive_variables(train, variables, &result.dropped)
                                   : std::vector<Stat>(variables.begin(), variables.end());
  if (result.variables.empty()) throw NumericError("ga: no usable variables");
  const Matrix x = design_columns(train, result.variables, log_transform);
  const Vector target = train.accuracies();
  const std::size_t k = result.variables.size();
  const auto pop_size = static_cast<std::size_t>(cfg.population);

  using Genome = std::vector<int>;
  std::vector<Genome> population(pop_size, Genome(k, 0));
  std::vector<double> fit(pop_size, 0.0);
  const auto gene = [](std::mt19937_64& rng) { return std::uniform_int_distribution<int>(-1, 1)(rng); };

  parallel_for(pop_size, cfg.threads, [&](std::size_t i) {
    auto rng = keyed_stream(cfg.seed, 0, i);
    for (auto& g : population[i]) g = gene(rng);
    fit[i] = signed_sum_fitness(x, target, population[i]);
  });

  Genome best(k, 0);
  double best_fit = signed_sum_fitness(x, target, best);
  const auto absorb = [&] {
    for (std::size_t i = 0; i < pop_size; ++i) {
      if (better_sum(fit[i], population[i], best_fit, best)) {
        best = canonical_sign(population[i]);
        best_fit = fit[i];
      }
    }
  };
  absorb();

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    std::vector<Genome> next(pop_size);
    std::vector<double> next_fit(pop_size, 0.0);
    parallel_for(pop_size, cfg.threads, [&](std::size_t i) {
      auto rng = keyed_stream(cfg.seed, static_cast<std::uint64_t>(iter), i);
      std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
      const auto select = [&] {
        std::size_t winner = pick(rng);
        for (int t = 1; t < cfg.tournament_k; ++t) {
          const std::size_t c = pick(rng);
          if (better_sum(fit[c], population[c], fit[winner], population[winner])) winner = c;
        }
        return winner;
      };
      const Genome& a = population[select()];
      const Genome& b = population[select()];
      Genome child = a;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng) < cfg.crossover_rate)
        for (std::size_t j = 0; j < k; ++j) child[j] = u(rng) < 0.5 ? a[j] : b[j];
      for (auto& g : child)
        if (u(rng) < cfg.mutation_rate) g = gene(rng);
      next_fit[i] = signed_sum_fitness(x, target, child);
      next[i] = std::move(child);
    });
    population = std::move(next);
    fit = std::move(next_fit);
    absorb();
  }

  result.coefficients = best;
  result.train_fitness = best_fit;
  Vector sum = Vector::Zero(x.rows());
  for (std::size_t j = 0; j < k; ++j) sum += static_cast<double>(best[j]) * x.col(static_cast<Eigen::Index>(j));
  result.train_pearson = pearson_if_defined(as_span(sum), as_span(target)).value_or(0.0);
  return result;
}

}  // namespace acclens
