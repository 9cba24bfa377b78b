#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "acclens/dataset_io.hpp"
#include "acclens/expr.hpp"
#include "acclens/metrics.hpp"
#include "acclens/types.hpp"

namespace acclens {

enum class FitnessMode : std::uint8_t { min_subset_pearson, pearson, r2 };

std::string_view to_string(FitnessMode mode);
/// Accepts the CLI spellings min-subset | pearson | r2.
FitnessMode parse_fitness_mode(std::string_view text);

struct GpConfig {
  int population = 5000;
  int generations = 20;  // populations evaluated, the random one included
  int tournament_k = 20;
  double p_crossover = 0.9;
  double p_subtree_mut = 0.01;
  double p_hoist_mut = 0.01;
  double p_point_mut = 0.01;
  double p_point_replace = 0.05;  // per-node resample rate inside point mutation
  int init_depth_min = 2;
  int init_depth_max = 6;
  double parsimony_coef = 0.001;
  FitnessMode fitness_mode = FitnessMode::min_subset_pearson;
  bool elitism = false;              // carry the best individual over unchanged
  bool ephemeral_constants = false;  // adds uniform [-1, 1] constants to the terminal set
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Raw fitness in [0, 1]; undefined correlations score 0.
double fitness_min_subset(const Expr& e, const MetaDataset& meta);
double fitness_pearson(const Expr& e, const MetaDataset& meta);
double fitness_r2(const Expr& e, const MetaDataset& meta);
double fitness(const Expr& e, const MetaDataset& meta, FitnessMode mode);

/// Precomputed statistics matrix and subset partition for repeated scoring.
class FitnessFunction {
 public:
  FitnessFunction(const MetaDataset& meta, FitnessMode mode);
  double operator()(const Expr& e) const;

 private:
  FitnessMode mode_;
  Matrix stats_;
  Vector accuracy_;
  std::vector<Eigen::Index> pretrained_;
  std::vector<Eigen::Index> untrained_;
};

struct RunResult {
  Expr best = Expr::terminal(Stat::dim);
  double train_fitness = 0.0;
  std::vector<double> best_fitness_curve;  // running maximum of raw fitness
  std::vector<double> generation_best;     // best raw fitness within each generation
  std::vector<std::size_t> population_sizes;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
};

/// Random tree, full or grow, whose depth does not exceed `max_depth`.
Expr random_tree(std::mt19937_64& rng, int max_depth, bool full, bool constants);

/// Variation operators. Each returns a fresh tree; callers enforce the node cap.
Expr crossover(const Expr& parent, const Expr& donor, std::mt19937_64& rng);
Expr subtree_mutation(const Expr& parent, std::mt19937_64& rng, const GpConfig& cfg);
Expr hoist_mutation(const Expr& parent, std::mt19937_64& rng);
Expr point_mutation(const Expr& parent, std::mt19937_64& rng, const GpConfig& cfg);

/// Index of the tournament winner among `contenders`: highest penalised fitness,
/// then fewer nodes, then lower index.
std::size_t tournament_winner(std::span<const std::size_t> contenders, std::span<const double> raw_fitness,
                              std::span<const Expr> population, double parsimony_coef);

RunResult evolve_run(const MetaDataset& train, const GpConfig& cfg);

struct MultiRunEntry {
  RunResult run;
  EvalReport test;
  bool test_defined = true;  // false when the winner is constant on train or test
  RunRecord record;
};

/// Runs with seeds cfg.seed + i on the same split; optionally appends each to a JSONL log.
std::vector<MultiRunEntry> multi_run(const MetaDataset& train, const MetaDataset& test, const GpConfig& cfg,
                                     int n_runs, const std::optional<fs::path>& log_path = std::nullopt,
                                     bool record_timing = true);

}  // namespace acclens
