#pragma once

#include <array>
#include <span>
#include <vector>

#include "acclens/dataset_io.hpp"
#include "acclens/expr.hpp"
#include "acclens/gp.hpp"
#include "acclens/metrics.hpp"
#include "acclens/types.hpp"

namespace acclens {

/// Copy of `meta` with the column of `variable` set to `value` in every record.
MetaDataset freeze_column(const MetaDataset& meta, Stat variable, double value);

/// Replaces `variable` by its train mean in both splits and scores `expr` on the
/// frozen test split. With `refit`, calibration is refit on the frozen train split;
/// otherwise the unfrozen train calibration is kept. Never throws on constant
/// predictions: the report then carries pearson 0.
EvalReport ablate_mean_freeze(const Expr& expr, const MetaDataset& train, const MetaDataset& test, Stat variable,
                              bool refit = true);

struct AblationRow {
  Stat variable;
  EvalReport report;
};

/// Ablation of every statistic, in column order, evaluated concurrently.
std::vector<AblationRow> ablation_table(const Expr& expr, const MetaDataset& train, const MetaDataset& test,
                                        bool refit = true, int threads = 1);
void save_ablation_table(const EvalReport& baseline, const std::vector<AblationRow>& rows, const fs::path& path);

/// Per statistic: number of formulas that use it at least once.
std::array<int, kNumStats> variable_frequency(std::span<const Expr> formulas);
std::array<int, kNumStats> variable_frequency(std::span<const RunRecord> runs);
void save_frequency(const std::array<int, kNumStats>& counts, const fs::path& path);

struct ComplexityRow {
  std::int64_t run_id = 0;
  std::int64_t node_count = 0;
  double test_r2 = 0.0;
  double test_pearson = 0.0;
};

std::vector<ComplexityRow> complexity_vs_score(std::span<const RunRecord> runs);
void save_complexity(const std::vector<ComplexityRow>& rows, const fs::path& path);

struct StatCorrelation {
  double abs_pearson = 0.0;
  bool constant = false;  // statistic has no spread; abs_pearson is then 0
};

/// |pearson| of each statistic with accuracy.
std::array<StatCorrelation, kNumStats> stat_accuracy_corr(const MetaDataset& meta);
/// |pearson| of the pretrained indicator (1 = pretrained) with accuracy.
StatCorrelation subset_indicator_corr(const MetaDataset& meta);
void save_stat_corr(const std::array<StatCorrelation, kNumStats>& corr, const StatCorrelation& subset,
                    const fs::path& path);

/// Index of the run with the highest test r2 (first on ties). Choosing on the test
/// split is optimistic and must be reported as such.
std::size_t best_run_by_test_r2(std::span<const RunRecord> runs);

}  // namespace acclens
