#include "acclens/gp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "acclens/parallel.hpp"

namespace acclens {

namespace {

constexpr int kNumFunctions = 7;
constexpr std::array<Op, 4> kBinaryOps = {Op::add, Op::sub, Op::mul, Op::div};
constexpr std::array<Op, 3> kUnaryOps = {Op::log, Op::exp, Op::sqrt};

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Node random_terminal(std::mt19937_64& rng, bool constants) {
  const int choice = uniform_int(rng, 0, static_cast<int>(kNumStats) - (constants ? 0 : 1));
  if (choice == static_cast<int>(kNumStats))
    return Node::literal(std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
  return Node::variable(static_cast<Stat>(choice));
}

// Start of a random subtree; functions are chosen over terminals 9:1.
std::size_t random_subtree_start(std::span<const Node> nodes, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& n : nodes) total += arity(n.op) > 0 ? 0.9 : 0.1;
  const double target = uniform01(rng) * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    cum += arity(nodes[i].op) > 0 ? 0.9 : 0.1;
    if (target < cum) return i;
  }
  return nodes.size() - 1;
}

std::vector<Node> splice(std::span<const Node> base, std::size_t start, std::size_t end,
                         std::span<const Node> insert) {
  std::vector<Node> out;
  out.reserve(base.size() - (end - start) + insert.size());
  out.insert(out.end(), base.begin(), base.begin() + static_cast<std::ptrdiff_t>(start));
  out.insert(out.end(), insert.begin(), insert.end());
  out.insert(out.end(), base.begin() + static_cast<std::ptrdiff_t>(end), base.end());
  return out;
}

Expr initial_tree(std::mt19937_64& rng, const GpConfig& cfg) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int depth = uniform_int(rng, cfg.init_depth_min, cfg.init_depth_max);
    const bool full = uniform01(rng) < 0.5;
    Expr tree = random_tree(rng, depth, full, cfg.ephemeral_constants);
    if (tree.node_count() <= kMaxNodes) return tree;
  }
  return random_tree(rng, cfg.init_depth_min, false, cfg.ephemeral_constants);
}

double abs_pearson_or_zero(const Vector& pred, const Vector& target) {
  const auto r = pearson_if_defined(as_span(pred), as_span(target));
  return r ? std::abs(*r) : 0.0;
}

}  // namespace

std::string_view to_string(FitnessMode mode) {
  switch (mode) {
    case FitnessMode::min_subset_pearson: return "min-subset";
    case FitnessMode::pearson: return "pearson";
    case FitnessMode::r2: return "r2";
  }
  return "min-subset";
}

FitnessMode parse_fitness_mode(std::string_view text) {
  if (text == "min-subset" || text == "min_subset_pearson") return FitnessMode::min_subset_pearson;
  if (text == "pearson") return FitnessMode::pearson;
  if (text == "r2") return FitnessMode::r2;
  throw DataError("unknown fitness mode '" + std::string(text) + "' (expected min-subset|pearson|r2)");
}

void GpConfig::validate() const {
  if (population < 2) throw DataError("gp: population must be >= 2");
  if (generations < 1) throw DataError("gp: generations must be >= 1");
  if (tournament_k < 1) throw DataError("gp: tournament size must be >= 1");
  for (double p : {p_crossover, p_subtree_mut, p_hoist_mut, p_point_mut, p_point_replace})
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("gp: probabilities must lie in [0,1]");
  if (p_crossover + p_subtree_mut + p_hoist_mut + p_point_mut > 1.0 + 1e-12)
    throw DataError("gp: variation probabilities sum to more than 1");
  if (init_depth_min < 1 || init_depth_max < init_depth_min) throw DataError("gp: invalid init depth range");
  if (!(parsimony_coef >= 0.0)) throw DataError("gp: parsimony coefficient must be >= 0");
  if (threads < 1) throw DataError("gp: threads must be >= 1");
}

FitnessFunction::FitnessFunction(const MetaDataset& meta, FitnessMode mode)
    : mode_(mode), stats_(meta.stats_matrix()), accuracy_(meta.accuracies()) {
  for (std::size_t i = 0; i < meta.size(); ++i)
    (meta.records[i].subset_tag == SubsetTag::pretrained ? pretrained_ : untrained_)
        .push_back(static_cast<Eigen::Index>(i));
  if (mode_ == FitnessMode::min_subset_pearson && (pretrained_.size() < 3 || untrained_.size() < 3))
    throw DataError("min-subset fitness needs at least 3 pretrained and 3 untrained records (have " +
                    std::to_string(pretrained_.size()) + " and " + std::to_string(untrained_.size()) + ")");
  if (mode_ != FitnessMode::min_subset_pearson && meta.size() < 3)
    throw DataError("fitness needs at least 3 records");
}

double FitnessFunction::operator()(const Expr& e) const {
  const Vector pred = evaluate_batch(e, stats_);
  switch (mode_) {
    case FitnessMode::min_subset_pearson: {
      const double pre = abs_pearson_or_zero(pred(pretrained_), accuracy_(pretrained_));
      if (pre == 0.0) return 0.0;
      return std::min(pre, abs_pearson_or_zero(pred(untrained_), accuracy_(untrained_)));
    }
    case FitnessMode::pearson:
      return abs_pearson_or_zero(pred, accuracy_);
    case FitnessMode::r2: {
      if (is_degenerate(as_span(pred)) || is_degenerate(as_span(accuracy_))) return 0.0;
      const Calibration c = fit_calibration(as_span(pred), as_span(accuracy_));
      const Vector calibrated = c.apply(pred);
      const double r2 = r2_score(as_span(accuracy_), as_span(calibrated));
      return std::isfinite(r2) ? std::clamp(r2, 0.0, 1.0) : 0.0;
    }
  }
  return 0.0;
}

double fitness(const Expr& e, const MetaDataset& meta, FitnessMode mode) { return FitnessFunction(meta, mode)(e); }
double fitness_min_subset(const Expr& e, const MetaDataset& meta) {
  return fitness(e, meta, FitnessMode::min_subset_pearson);
}
double fitness_pearson(const Expr& e, const MetaDataset& meta) { return fitness(e, meta, FitnessMode::pearson); }
double fitness_r2(const Expr& e, const MetaDataset& meta) { return fitness(e, meta, FitnessMode::r2); }

Expr random_tree(std::mt19937_64& rng, int max_depth, bool full, bool constants) {
  const auto random_function = [&] { return static_cast<Op>(uniform_int(rng, 0, kNumFunctions - 1)); };
  const int n_terminals = static_cast<int>(kNumStats) + (constants ? 1 : 0);
  std::vector<Node> nodes;
  std::vector<int> open;  // operands still owed by each open function
  const Op root = random_function();
  nodes.push_back(Node::function(root));
  open.push_back(arity(root));
  while (!open.empty()) {
    const int depth = static_cast<int>(open.size());
    const int choice = uniform_int(rng, 0, n_terminals + kNumFunctions - 1);
    if (depth < max_depth && (full || choice < kNumFunctions)) {
      const Op op = random_function();
      nodes.push_back(Node::function(op));
      open.push_back(arity(op));
    } else {
      nodes.push_back(random_terminal(rng, constants));
      --open.back();
      while (!open.empty() && open.back() == 0) {
        open.pop_back();
        if (!open.empty()) --open.back();
      }
    }
  }
  return Expr(std::move(nodes));
}

Expr crossover(const Expr& parent, const Expr& donor, std::mt19937_64& rng) {
  const std::size_t start = random_subtree_start(parent.nodes(), rng);
  const std::size_t end = parent.subtree_end(start);
  const std::size_t d_start = random_subtree_start(donor.nodes(), rng);
  const std::size_t d_end = donor.subtree_end(d_start);
  return Expr(splice(parent.nodes(), start, end, donor.nodes().subspan(d_start, d_end - d_start)));
}

Expr subtree_mutation(const Expr& parent, std::mt19937_64& rng, const GpConfig& cfg) {
  const Expr chicken = initial_tree(rng, cfg);
  return crossover(parent, chicken, rng);
}

Expr hoist_mutation(const Expr& parent, std::mt19937_64& rng) {
  const std::size_t start = random_subtree_start(parent.nodes(), rng);
  const std::size_t end = parent.subtree_end(start);
  const Expr sub(std::vector<Node>(parent.nodes().begin() + static_cast<std::ptrdiff_t>(start),
                                   parent.nodes().begin() + static_cast<std::ptrdiff_t>(end)));
  const std::size_t h_start = random_subtree_start(sub.nodes(), rng);
  const std::size_t h_end = sub.subtree_end(h_start);
  return Expr(splice(parent.nodes(), start, end, sub.nodes().subspan(h_start, h_end - h_start)));
}

Expr point_mutation(const Expr& parent, std::mt19937_64& rng, const GpConfig& cfg) {
  std::vector<Node> nodes(parent.nodes().begin(), parent.nodes().end());
  for (auto& node : nodes) {
    if (uniform01(rng) >= cfg.p_point_replace) continue;
    switch (arity(node.op)) {
      case 2: node = Node::function(kBinaryOps[static_cast<std::size_t>(uniform_int(rng, 0, 3))]); break;
      case 1: node = Node::function(kUnaryOps[static_cast<std::size_t>(uniform_int(rng, 0, 2))]); break;
      default: node = random_terminal(rng, cfg.ephemeral_constants); break;
    }
  }
  return Expr(std::move(nodes));
}

std::size_t tournament_winner(std::span<const std::size_t> contenders, std::span<const double> raw_fitness,
                              std::span<const Expr> population, double parsimony_coef) {
  std::size_t best = contenders.front();
  const auto penalised = [&](std::size_t i) {
    return raw_fitness[i] - parsimony_coef * static_cast<double>(population[i].node_count());
  };
  for (std::size_t i : contenders.subspan(1)) {
    const double pi = penalised(i);
    const double pb = penalised(best);
    if (pi > pb) {
      best = i;
    } else if (pi == pb) {
      const auto ni = population[i].node_count();
      const auto nb = population[best].node_count();
      if (ni < nb || (ni == nb && i < best)) best = i;
    }
  }
  return best;
}

RunResult evolve_run(const MetaDataset& train, const GpConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const FitnessFunction score(train, cfg.fitness_mode);
  const auto pop_size = static_cast<std::size_t>(cfg.population);

  std::vector<Expr> population(pop_size, Expr::terminal(Stat::dim));
  std::vector<double> raw(pop_size, 0.0);

  parallel_for(pop_size, cfg.threads, [&](std::size_t i) {
    auto rng = keyed_stream(cfg.seed, 0, i);
    population[i] = initial_tree(rng, cfg);
    raw[i] = score(population[i]);
  });

  RunResult result;
  result.seed = cfg.seed;
  bool have_best = false;
  const auto record_generation = [&] {
    std::size_t gen_best = 0;
    for (std::size_t i = 1; i < pop_size; ++i) {
      if (raw[i] > raw[gen_best] ||
          (raw[i] == raw[gen_best] && population[i].node_count() < population[gen_best].node_count()))
        gen_best = i;
    }
    if (!have_best || raw[gen_best] > result.train_fitness ||
        (raw[gen_best] == result.train_fitness && population[gen_best].node_count() < result.best.node_count())) {
      result.best = population[gen_best];
      result.train_fitness = raw[gen_best];
      have_best = true;
    }
    result.generation_best.push_back(raw[gen_best]);
    result.best_fitness_curve.push_back(result.train_fitness);
    result.population_sizes.push_back(population.size());
    return gen_best;
  };
  std::size_t elite = record_generation();

  const double t_cross = cfg.p_crossover;
  const double t_subtree = t_cross + cfg.p_subtree_mut;
  const double t_hoist = t_subtree + cfg.p_hoist_mut;
  const double t_point = t_hoist + cfg.p_point_mut;
  const auto k = static_cast<std::size_t>(cfg.tournament_k);

  for (int gen = 1; gen < cfg.generations; ++gen) {
    std::vector<Expr> next(pop_size, Expr::terminal(Stat::dim));
    std::vector<double> next_raw(pop_size, 0.0);
    parallel_for(pop_size, cfg.threads, [&](std::size_t i) {
      if (cfg.elitism && i == 0) {
        next[0] = population[elite];
        next_raw[0] = raw[elite];
        return;
      }
      auto rng = keyed_stream(cfg.seed, static_cast<std::uint64_t>(gen), i);
      std::vector<std::size_t> contenders(k);
      const auto select = [&] {
        for (auto& c : contenders) c = static_cast<std::size_t>(uniform_int(rng, 0, cfg.population - 1));
        return tournament_winner(contenders, raw, population, cfg.parsimony_coef);
      };
      const Expr& parent = population[select()];
      const double r = uniform01(rng);
      std::optional<Expr> child;
      if (r < t_cross) {
        const Expr& donor = population[select()];
        child = crossover(parent, donor, rng);
      } else if (r < t_subtree) {
        child = subtree_mutation(parent, rng, cfg);
      } else if (r < t_hoist) {
        child = hoist_mutation(parent, rng);
      } else if (r < t_point) {
        child = point_mutation(parent, rng, cfg);
      }
      next[i] = child && child->node_count() <= kMaxNodes ? std::move(*child) : parent;
      next_raw[i] = score(next[i]);
    });
    population = std::move(next);
    raw = std::move(next_raw);
    elite = record_generation();
  }

  result.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<MultiRunEntry> multi_run(const MetaDataset& train, const MetaDataset& test, const GpConfig& cfg,
                                     int n_runs, const std::optional<fs::path>& log_path, bool record_timing) {
  if (n_runs < 1) throw DataError("gp: runs must be >= 1");
  std::vector<MultiRunEntry> out;
  out.reserve(static_cast<std::size_t>(n_runs));
  for (int i = 0; i < n_runs; ++i) {
    GpConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
    MultiRunEntry entry;
    entry.run = evolve_run(train, run_cfg);

    const Vector train_pred = evaluate_batch(entry.run.best, train);
    const Vector test_pred = evaluate_batch(entry.run.best, test);
    const Vector train_alpha = train.accuracies();
    const Vector test_alpha = test.accuracies();
    entry.test = evaluate_predictions_lenient(train_pred, train_alpha, test_pred, test_alpha,
                                              CalibrationMode::fit_on_train(), &entry.test_defined);

    RunRecord& rec = entry.record;
    rec.run_id = i;
    rec.seed = run_cfg.seed;
    rec.sexpr = render_sexpr(entry.run.best);
    rec.node_count = static_cast<std::int64_t>(entry.run.best.node_count());
    rec.train_fitness = entry.run.train_fitness;
    rec.test_pearson = entry.test.pearson_r;
    rec.test_r2 = entry.test.r2;
    rec.calib_a = entry.test.calibration.a;
    rec.calib_b = entry.test.calibration.b;
    rec.duration_s = record_timing ? entry.run.duration_s : 0.0;
    if (log_path) append_run_log(rec, *log_path);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace acclens
