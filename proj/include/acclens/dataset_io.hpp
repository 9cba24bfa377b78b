#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "acclens/types.hpp"

namespace acclens {

namespace fs = std::filesystem;

/// Shortest-safe text for a double: 17 significant digits, exact round trip.
std::string format_real(double v);

/// Reads `train.csv`, `test.csv` and the optional `meta.json` from `dir`.
/// Labels are re-indexed to 0..n_classes-1 in order of first appearance in train.csv.
EmbeddingDataset load_embedding_dataset(const fs::path& dir);
void save_embedding_dataset(const EmbeddingDataset& ds, const fs::path& dir);

/// Column names of the meta CSV, in file order.
std::vector<std::string> meta_columns(bool with_accuracy = true);

void save_meta(const MetaDataset& meta, const fs::path& path);
/// Header-keyed: column order in the file is irrelevant, but the set must be exact.
MetaDataset load_meta(const fs::path& path);

/// Writes the meta CSV layout without the accuracy column.
void save_stats_rows(const std::vector<MetaRecord>& rows, const fs::path& path);

/// One line of the run log.
struct RunRecord {
  std::int64_t run_id = 0;
  std::uint64_t seed = 0;
  std::string sexpr;
  std::int64_t node_count = 0;
  double train_fitness = 0.0;
  double test_pearson = 0.0;
  double test_r2 = 0.0;
  double calib_a = 0.0;
  double calib_b = 0.0;
  double duration_s = 0.0;

  bool operator==(const RunRecord&) const = default;
};

void append_run_log(const RunRecord& record, const fs::path& path);
std::vector<RunRecord> load_run_log(const fs::path& path);

/// Seeded partition stratified by subset tag; each part keeps file order.
std::pair<MetaDataset, MetaDataset> split_meta(const MetaDataset& meta, double train_ratio,
                                               std::uint64_t seed);

}  // namespace acclens
