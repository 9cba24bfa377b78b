#include "acclens/analysis.hpp"

#include <fstream>

#include "acclens/parallel.hpp"

namespace acclens {

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

Vector safe_predictions(const Expr& expr, const MetaDataset& meta) {
  Vector p = evaluate_batch(expr, meta);
  for (double& v : p)
    if (!std::isfinite(v)) v = 0.0;
  return p;
}

}  // namespace

MetaDataset freeze_column(const MetaDataset& meta, Stat variable, double value) {
  MetaDataset out = meta;
  for (auto& r : out.records) r.stats[variable] = value;
  return out;
}

EvalReport ablate_mean_freeze(const Expr& expr, const MetaDataset& train, const MetaDataset& test, Stat variable,
                              bool refit) {
  const double mean = train.empty() ? 0.0 : train.column(variable).mean();
  const MetaDataset frozen_train = freeze_column(train, variable, mean);
  const MetaDataset frozen_test = freeze_column(test, variable, mean);
  const Vector test_pred = safe_predictions(expr, frozen_test);
  CalibrationMode mode = CalibrationMode::fit_on_train();
  Vector train_pred;
  if (refit) {
    train_pred = safe_predictions(expr, frozen_train);
  } else {
    const Vector original = safe_predictions(expr, train);
    bool defined = true;
    const EvalReport unfrozen = evaluate_predictions_lenient(original, train.accuracies(), original,
                                                             train.accuracies(), mode, &defined);
    mode = CalibrationMode::with(unfrozen.calibration);
    train_pred = original;
  }
  return evaluate_predictions_lenient(train_pred, frozen_train.accuracies(), test_pred, frozen_test.accuracies(),
                                      mode);
}

std::vector<AblationRow> ablation_table(const Expr& expr, const MetaDataset& train, const MetaDataset& test,
                                        bool refit, int threads) {
  std::vector<AblationRow> rows(kNumStats);
  parallel_for(kNumStats, threads, [&](std::size_t j) {
    const auto s = static_cast<Stat>(j);
    rows[j] = {s, ablate_mean_freeze(expr, train, test, s, refit)};
  });
  return rows;
}

void save_ablation_table(const EvalReport& baseline, const std::vector<AblationRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << "variable,pearson_r,r2,p_value,calib_a,calib_b\n";
  const auto line = [&](std::string_view name, const EvalReport& r) {
    out << name << ',' << format_real(r.pearson_r) << ',' << format_real(r.r2) << ',' << format_real(r.p_value)
        << ',' << format_real(r.calibration.a) << ',' << format_real(r.calibration.b) << '\n';
  };
  line("none", baseline);
  for (const auto& row : rows) line(name_of(row.variable), row.report);
}

std::array<int, kNumStats> variable_frequency(std::span<const Expr> formulas) {
  std::array<int, kNumStats> counts{};
  for (const auto& e : formulas)
    for (Stat s : e.variables()) ++counts[index_of(s)];
  return counts;
}

std::array<int, kNumStats> variable_frequency(std::span<const RunRecord> runs) {
  std::vector<Expr> formulas;
  formulas.reserve(runs.size());
  for (const auto& r : runs) formulas.push_back(parse_sexpr(r.sexpr));
  return variable_frequency(formulas);
}

void save_frequency(const std::array<int, kNumStats>& counts, const fs::path& path) {
  auto out = open_output(path);
  out << "variable,count\n";
  for (std::size_t j = 0; j < kNumStats; ++j) out << kStatNames[j] << ',' << counts[j] << '\n';
}

std::vector<ComplexityRow> complexity_vs_score(std::span<const RunRecord> runs) {
  std::vector<ComplexityRow> rows;
  rows.reserve(runs.size());
  for (const auto& r : runs) rows.push_back({r.run_id, r.node_count, r.test_r2, r.test_pearson});
  return rows;
}

void save_complexity(const std::vector<ComplexityRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << "run_id,node_count,test_r2,test_pearson\n";
  for (const auto& r : rows)
    out << r.run_id << ',' << r.node_count << ',' << format_real(r.test_r2) << ',' << format_real(r.test_pearson)
        << '\n';
}

std::array<StatCorrelation, kNumStats> stat_accuracy_corr(const MetaDataset& meta) {
  if (meta.size() < 3) throw DataError("stat_accuracy_corr: need at least 3 records");
  const Vector acc = meta.accuracies();
  std::array<StatCorrelation, kNumStats> out{};
  for (std::size_t j = 0; j < kNumStats; ++j) {
    const Vector col = meta.column(static_cast<Stat>(j));
    if (is_degenerate(as_span(col))) {
      out[j] = {0.0, true};
      continue;
    }
    out[j].abs_pearson = std::abs(pearson_if_defined(as_span(col), as_span(acc)).value_or(0.0));
  }
  return out;
}

StatCorrelation subset_indicator_corr(const MetaDataset& meta) {
  if (meta.size() < 3) throw DataError("subset_indicator_corr: need at least 3 records");
  Vector indicator(static_cast<Eigen::Index>(meta.size()));
  for (std::size_t i = 0; i < meta.size(); ++i)
    indicator[static_cast<Eigen::Index>(i)] = meta.records[i].subset_tag == SubsetTag::pretrained ? 1.0 : 0.0;
  if (is_degenerate(as_span(indicator))) return {0.0, true};
  const Vector acc = meta.accuracies();
  return {std::abs(pearson_if_defined(as_span(indicator), as_span(acc)).value_or(0.0)), false};
}

void save_stat_corr(const std::array<StatCorrelation, kNumStats>& corr, const StatCorrelation& subset,
                    const fs::path& path) {
  auto out = open_output(path);
  out << "variable,abs_pearson,constant\n";
  for (std::size_t j = 0; j < kNumStats; ++j)
    out << kStatNames[j] << ',' << format_real(corr[j].abs_pearson) << ',' << (corr[j].constant ? 1 : 0) << '\n';
  out << "subset," << format_real(subset.abs_pearson) << ',' << (subset.constant ? 1 : 0) << '\n';
}

std::size_t best_run_by_test_r2(std::span<const RunRecord> runs) {
  if (runs.empty()) throw DataError("no runs to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].test_r2 > runs[best].test_r2) best = i;
  return best;
}

}  // namespace acclens
