#include <doctest.h>

#include <cmath>

#include "acclens/gp.hpp"
#include "helpers.hpp"

using namespace acclens;

namespace {

double abs_pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return std::abs(sxy / std::sqrt(sxx * syy));
}

double min_subset_oracle(const Expr& e, const MetaDataset& meta) {
  std::vector<double> px, py, ux, uy;
  for (const auto& r : meta.records) {
    auto& x = r.subset_tag == SubsetTag::pretrained ? px : ux;
    auto& y = r.subset_tag == SubsetTag::pretrained ? py : uy;
    x.push_back(e.evaluate(r.stats));
    y.push_back(r.accuracy);
  }
  return std::min(abs_pearson_oracle(px, py), abs_pearson_oracle(ux, uy));
}

MetaDataset planted_log_sw(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MetaDataset meta = testutil::random_meta(rng, n);
  std::uniform_real_distribution<double> sw(0.5, 2.0);
  for (auto& r : meta.records) {
    r.stats[Stat::sw_trace] = sw(rng);
    r.accuracy = 0.3 * std::log(r.stats[Stat::sw_trace]) + 0.5;
  }
  return meta;
}

}  // namespace

TEST_CASE("fitness mode names") {
  CHECK(parse_fitness_mode("min-subset") == FitnessMode::min_subset_pearson);
  CHECK(parse_fitness_mode("pearson") == FitnessMode::pearson);
  CHECK(parse_fitness_mode("r2") == FitnessMode::r2);
  CHECK_THROWS_AS(parse_fitness_mode("mse"), DataError);
  for (auto m : {FitnessMode::min_subset_pearson, FitnessMode::pearson, FitnessMode::r2})
    CHECK(parse_fitness_mode(to_string(m)) == m);
}

TEST_CASE("config validation") {
  GpConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.population = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.p_crossover = 0.99;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.init_depth_min = 7;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("min-subset fitness matches an independent per-subset computation") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const MetaDataset meta = testutil::random_meta(rng, 12 + trial % 20);
    const Expr e = random_tree(rng, 1 + trial % 5, trial % 2 == 0, false);
    const double got = fitness_min_subset(e, meta);
    CHECK(got == doctest::Approx(min_subset_oracle(e, meta)).epsilon(1e-9));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("fitness of undefined correlations is zero") {
  std::mt19937_64 rng(3);
  MetaDataset meta = testutil::random_meta(rng, 20);
  CHECK(fitness_min_subset(parse_sexpr("0.5"), meta) == 0.0);
  CHECK(fitness_pearson(parse_sexpr("0.5"), meta) == 0.0);
  CHECK(fitness_r2(parse_sexpr("0.5"), meta) == 0.0);
  for (auto& r : meta.records)
    if (r.subset_tag == SubsetTag::untrained) r.stats[Stat::dim] = 3.0;
  CHECK(fitness_min_subset(Expr::terminal(Stat::dim), meta) == 0.0);
  CHECK(fitness_pearson(Expr::terminal(Stat::dim), meta) > 0.0);
}

TEST_CASE("min-subset fitness needs both subsets") {
  std::mt19937_64 rng(4);
  MetaDataset meta = testutil::random_meta(rng, 10);
  for (auto& r : meta.records) r.subset_tag = SubsetTag::pretrained;
  CHECK_THROWS_AS(fitness_min_subset(Expr::terminal(Stat::dim), meta), DataError);
  CHECK_NOTHROW(fitness_pearson(Expr::terminal(Stat::dim), meta));
}

TEST_CASE("r2 fitness equals squared pearson for a linear fit") {
  std::mt19937_64 rng(6);
  const MetaDataset meta = testutil::random_meta(rng, 30);
  const Expr e = parse_sexpr("(add sb_trace (log sw_trace))");
  const double p = fitness_pearson(e, meta);
  CHECK(fitness_r2(e, meta) == doctest::Approx(p * p).epsilon(1e-10));
}

TEST_CASE("random trees respect depth bounds") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const int d = 1 + i % 6;
    const Expr full = random_tree(rng, d, true, false);
    CHECK(full.depth() == d);
    CHECK(random_tree(rng, d, false, true).depth() <= d);
  }
}

TEST_CASE("variation operators produce valid trees") {
  std::mt19937_64 rng(8);
  GpConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const Expr a = random_tree(rng, 1 + i % 6, i % 2 == 0, true);
    const Expr b = random_tree(rng, 1 + i % 5, i % 3 == 0, true);
    const Expr c = crossover(a, b, rng);
    const Expr h = hoist_mutation(a, rng);
    const Expr p = point_mutation(a, rng, cfg);
    const Expr s = subtree_mutation(a, rng, cfg);
    CHECK(h.node_count() <= a.node_count());
    CHECK(p.node_count() == a.node_count());
    for (const Expr* e : {&c, &h, &p, &s}) CHECK(parse_sexpr(render_sexpr(*e)) == *e);
    for (std::size_t k = 0; k < p.node_count(); ++k) CHECK(arity(p.nodes()[k].op) == arity(a.nodes()[k].op));
  }
}

TEST_CASE("tournament prefers penalised fitness, then size, then index") {
  const std::vector<Expr> pop = {parse_sexpr("(log sb_trace)"), Expr::terminal(Stat::sb_trace),
                                 parse_sexpr("(add sb_trace sw_trace)"), Expr::terminal(Stat::sw_trace)};
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  CHECK(tournament_winner(all, std::vector<double>{0.5, 0.5, 0.9, 0.1}, pop, 0.0) == 2);
  CHECK(tournament_winner(all, std::vector<double>{0.5, 0.5, 0.5, 0.5}, pop, 0.0) == 1);
  CHECK(tournament_winner(all, std::vector<double>{0.5, 0.5, 0.5, 0.5}, pop, 0.01) == 1);
  CHECK(tournament_winner(all, std::vector<double>{0.5, 0.49, 0.52, 0.1}, pop, 0.02) == 1);
  const std::vector<std::size_t> repeated = {3, 3, 0};
  CHECK(tournament_winner(repeated, std::vector<double>{0.2, 0.0, 0.0, 0.2}, pop, 0.0) == 3);
}

TEST_CASE("evolution keeps populations within the node cap") {
  const MetaDataset meta = planted_log_sw(40, 1);
  GpConfig cfg;
  cfg.population = 200;
  cfg.generations = 6;
  cfg.parsimony_coef = 0.0;
  cfg.p_crossover = 0.6;
  cfg.p_subtree_mut = 0.2;
  cfg.p_hoist_mut = 0.0;
  cfg.p_point_mut = 0.1;
  const RunResult r = evolve_run(meta, cfg);
  CHECK(r.best.node_count() <= kMaxNodes);
  CHECK(r.best_fitness_curve.size() == 6);
  CHECK(r.generation_best.size() == 6);
  for (std::size_t i = 1; i < r.best_fitness_curve.size(); ++i)
    CHECK(r.best_fitness_curve[i] >= r.best_fitness_curve[i - 1]);
  for (auto s : r.population_sizes) CHECK(s == 200);
  CHECK(r.train_fitness == doctest::Approx(fitness_min_subset(r.best, meta)).epsilon(1e-12));
}

TEST_CASE("elitism never loses the best individual") {
  std::mt19937_64 rng(10);
  const MetaDataset meta = testutil::random_meta(rng, 30);
  GpConfig cfg;
  cfg.population = 100;
  cfg.generations = 8;
  cfg.elitism = true;
  cfg.seed = 4;
  const RunResult r = evolve_run(meta, cfg);
  for (std::size_t i = 1; i < r.generation_best.size(); ++i)
    CHECK(r.generation_best[i] >= r.generation_best[i - 1]);
}

TEST_CASE("evolution is identical across thread counts") {
  std::mt19937_64 rng(11);
  const MetaDataset meta = testutil::random_meta(rng, 30);
  GpConfig cfg;
  cfg.population = 300;
  cfg.generations = 5;
  cfg.seed = 13;
  cfg.ephemeral_constants = true;
  cfg.threads = 1;
  const RunResult one = evolve_run(meta, cfg);
  cfg.threads = 4;
  const RunResult four = evolve_run(meta, cfg);
  CHECK(one.best == four.best);
  CHECK(one.best_fitness_curve == four.best_fitness_curve);
  CHECK(one.generation_best == four.generation_best);
  cfg.seed = 14;
  CHECK_FALSE(evolve_run(meta, cfg).generation_best == one.generation_best);
}

TEST_CASE("planted log relation is recovered") {
  const MetaDataset train = planted_log_sw(60, 2);
  const MetaDataset test = planted_log_sw(30, 3);
  GpConfig cfg;
  cfg.population = 500;
  cfg.generations = 10;
  cfg.seed = 1;
  const auto runs = multi_run(train, test, cfg, 3);
  REQUIRE(runs.size() == 3);
  double best = 0.0;
  for (const auto& r : runs) {
    best = std::max(best, r.run.train_fitness);
    CHECK(r.record.seed == r.run.seed);
    CHECK(r.record.sexpr == render_sexpr(r.run.best));
  }
  CHECK(best >= 0.999);
  CHECK(runs[1].run.seed == 2);
}

TEST_CASE("multi-run log is deterministic without timing") {
  std::mt19937_64 rng(12);
  const MetaDataset train = testutil::random_meta(rng, 30), test = testutil::random_meta(rng, 12);
  GpConfig cfg;
  cfg.population = 100;
  cfg.generations = 3;
  testutil::TempDir dir("gp_log");
  multi_run(train, test, cfg, 2, dir / "a.jsonl", false);
  cfg.threads = 3;
  multi_run(train, test, cfg, 2, dir / "b.jsonl", false);
  const auto a = testutil::read_text(dir / "a.jsonl");
  CHECK(a == testutil::read_text(dir / "b.jsonl"));
  CHECK(load_run_log(dir / "a.jsonl").size() == 2);
  CHECK_THROWS_AS(multi_run(train, test, cfg, 0), DataError);
}
