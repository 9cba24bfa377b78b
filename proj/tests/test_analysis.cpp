#include <doctest.h>

#include <cmath>

#include "acclens/analysis.hpp"
#include "helpers.hpp"

using namespace acclens;

namespace {

struct Split {
  MetaDataset train;
  MetaDataset test;
};

Split planted_split(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Split s{testutil::random_meta(rng, 40), testutil::random_meta(rng, 20)};
  std::normal_distribution<double> noise(0.0, 0.02);
  for (auto* meta : {&s.train, &s.test})
    for (auto& r : meta->records)
      r.accuracy = std::clamp(
          0.5 + 0.1 * std::log(r.stats[Stat::sb_trace] / r.stats[Stat::st_trace]) + noise(rng), 0.0, 1.0);
  return s;
}

}  // namespace

TEST_CASE("freeze_column") {
  std::mt19937_64 rng(1);
  const MetaDataset meta = testutil::random_meta(rng, 5);
  const MetaDataset frozen = freeze_column(meta, Stat::pca_75, 0.25);
  for (std::size_t i = 0; i < meta.size(); ++i) {
    CHECK(frozen.records[i].stats[Stat::pca_75] == 0.25);
    CHECK(frozen.records[i].stats[Stat::pca_50] == meta.records[i].stats[Stat::pca_50]);
    CHECK(frozen.records[i].accuracy == meta.records[i].accuracy);
  }
}

TEST_CASE("freezing an unused variable leaves the report unchanged") {
  const auto [train, test] = planted_split(2);
  const Expr e = parse_sexpr("(log (div sb_trace st_trace))");
  const EvalReport base = evaluate_formula(e, train, test, CalibrationMode::fit_on_train());
  for (bool refit : {true, false}) {
    CHECK(ablate_mean_freeze(e, train, test, Stat::kurtosis_std, refit) == base);
    CHECK(ablate_mean_freeze(e, train, test, Stat::dim, refit) == base);
  }
}

TEST_CASE("freezing an already constant variable leaves the report unchanged") {
  auto [train, test] = planted_split(3);
  for (auto* meta : {&train, &test})
    for (auto& r : meta->records) r.stats[Stat::n_classes] = 4.0;
  const Expr e = parse_sexpr("(mul n_classes (log (div sb_trace st_trace)))");
  const EvalReport base = evaluate_formula(e, train, test, CalibrationMode::fit_on_train());
  const EvalReport frozen = ablate_mean_freeze(e, train, test, Stat::n_classes);
  CHECK(frozen.pearson_r == doctest::Approx(base.pearson_r).epsilon(1e-12));
  CHECK(frozen.r2 == doctest::Approx(base.r2).epsilon(1e-12));
}

TEST_CASE("freezing the only used variable removes all signal") {
  const auto [train, test] = planted_split(4);
  const Expr e = parse_sexpr("(log sb_trace)");
  const EvalReport r = ablate_mean_freeze(e, train, test, Stat::sb_trace);
  CHECK(r.pearson_r == 0.0);
  CHECK(r.p_value == 1.0);
  const EvalReport kept = ablate_mean_freeze(e, train, test, Stat::sb_trace, false);
  CHECK(kept.pearson_r == 0.0);
}

TEST_CASE("ablation table covers every statistic and never beats the baseline by much") {
  const auto [train, test] = planted_split(5);
  const Expr e = parse_sexpr("(log (div sb_trace st_trace))");
  const EvalReport base = evaluate_formula(e, train, test, CalibrationMode::fit_on_train());
  const auto rows = ablation_table(e, train, test, true, 3);
  REQUIRE(rows.size() == kNumStats);
  for (std::size_t i = 0; i < kNumStats; ++i) {
    CHECK(rows[i].variable == static_cast<Stat>(i));
    CHECK(std::abs(rows[i].report.pearson_r) <= std::abs(base.pearson_r) + 0.05);
  }
  CHECK(std::abs(rows[index_of(Stat::sb_trace)].report.pearson_r) < std::abs(base.pearson_r));
  CHECK(ablation_table(e, train, test, true, 1).size() == kNumStats);

  testutil::TempDir dir("ablate");
  save_ablation_table(base, rows, dir / "a.csv");
  const std::string text = testutil::read_text(dir / "a.csv");
  CHECK(text.rfind("variable,pearson_r,r2,p_value,calib_a,calib_b\nnone,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 21);
}

TEST_CASE("variable frequency counts presence per formula") {
  const std::vector<Expr> formulas = {parse_sexpr("(add sb_trace sb_trace)"), parse_sexpr("(div sb_trace sw_trace)"),
                                      parse_sexpr("1.5")};
  const auto counts = variable_frequency(formulas);
  CHECK(counts[index_of(Stat::sb_trace)] == 2);
  CHECK(counts[index_of(Stat::sw_trace)] == 1);
  CHECK(counts[index_of(Stat::dim)] == 0);

  std::vector<RunRecord> runs;
  for (std::size_t i = 0; i < formulas.size(); ++i)
    runs.push_back(RunRecord{static_cast<std::int64_t>(i), i, render_sexpr(formulas[i]), 1, 0, 0, 0, 1, 0, 0});
  CHECK(variable_frequency(runs) == counts);

  testutil::TempDir dir("freq");
  save_frequency(counts, dir / "f.csv");
  const std::string text = testutil::read_text(dir / "f.csv");
  CHECK(text.rfind("variable,count\n", 0) == 0);
  CHECK(text.find("sb_trace,2\n") != std::string::npos);
}

TEST_CASE("complexity rows mirror the run log") {
  std::mt19937_64 rng(6);
  const MetaDataset train = testutil::random_meta(rng, 30), test = testutil::random_meta(rng, 12);
  GpConfig cfg;
  cfg.population = 60;
  cfg.generations = 3;
  testutil::TempDir dir("complexity");
  multi_run(train, test, cfg, 3, dir / "runs.jsonl", false);
  const auto runs = load_run_log(dir / "runs.jsonl");
  const auto rows = complexity_vs_score(runs);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].run_id == runs[i].run_id);
    CHECK(rows[i].node_count == runs[i].node_count);
    CHECK(rows[i].node_count == static_cast<std::int64_t>(parse_sexpr(runs[i].sexpr).node_count()));
    CHECK(rows[i].test_r2 == runs[i].test_r2);
    CHECK(rows[i].test_pearson == runs[i].test_pearson);
  }
  save_complexity(rows, dir / "c.csv");
  CHECK(testutil::read_text(dir / "c.csv").rfind("run_id,node_count,test_r2,test_pearson\n", 0) == 0);
}

TEST_CASE("statistic correlations with accuracy") {
  std::mt19937_64 rng(7);
  MetaDataset meta = testutil::random_meta(rng, 30);
  for (auto& r : meta.records) {
    r.stats[Stat::pca_99] = r.accuracy;
    r.stats[Stat::dim] = 32.0;
  }
  const auto corr = stat_accuracy_corr(meta);
  CHECK(corr[index_of(Stat::pca_99)].abs_pearson == doctest::Approx(1.0));
  CHECK_FALSE(corr[index_of(Stat::pca_99)].constant);
  CHECK(corr[index_of(Stat::dim)].abs_pearson == 0.0);
  CHECK(corr[index_of(Stat::dim)].constant);

  for (auto& r : meta.records) r.accuracy = r.subset_tag == SubsetTag::pretrained ? 0.9 : 0.2;
  CHECK(subset_indicator_corr(meta).abs_pearson == doctest::Approx(1.0));

  testutil::TempDir dir("statcorr");
  save_stat_corr(corr, subset_indicator_corr(meta), dir / "s.csv");
  const std::string text = testutil::read_text(dir / "s.csv");
  CHECK(text.rfind("variable,abs_pearson,constant\n", 0) == 0);
  CHECK(text.find("\nsubset,") != std::string::npos);

  MetaDataset tiny;
  tiny.records.assign(meta.records.begin(), meta.records.begin() + 2);
  CHECK_THROWS(stat_accuracy_corr(tiny));
}

TEST_CASE("best run selection takes the first maximum") {
  std::vector<RunRecord> runs(4);
  for (std::size_t i = 0; i < runs.size(); ++i) runs[i].run_id = static_cast<std::int64_t>(i);
  runs[0].test_r2 = 0.2;
  runs[1].test_r2 = 0.7;
  runs[2].test_r2 = 0.7;
  runs[3].test_r2 = -1.0;
  CHECK(best_run_by_test_r2(runs) == 1);
  CHECK_THROWS(best_run_by_test_r2(std::span<const RunRecord>{}));
}
