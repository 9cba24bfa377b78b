#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace acclens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

/// Malformed input files or values violating a data invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity that is mathematically undefined for the given input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SubsetTag : std::uint8_t { pretrained, untrained };

std::string_view to_string(SubsetTag tag);
SubsetTag parse_subset_tag(std::string_view text);

/// Train/test embeddings with contiguous 0-based class ids.
struct EmbeddingDataset {
  Matrix train_x;
  Labels train_y;
  Matrix test_x;
  Labels test_y;
  SubsetTag subset_tag = SubsetTag::pretrained;
  std::string dataset_id;

  [[nodiscard]] int n_classes() const;
  [[nodiscard]] Eigen::Index dim() const { return train_x.cols(); }

  /// Throws DataError when shapes, label ranges or label coverage are invalid.
  void validate() const;
};

// Order matches the meta CSV columns.
enum class Stat : std::uint8_t {
  dim,
  n_classes,
  n_train,
  n_test,
  sb_trace,
  sw_trace,
  st_trace,
  feats_corr,
  feats_cos_sim,
  pca_50,
  pca_75,
  pca_99,
  train_mean,
  train_std,
  kurtosis_avg,
  kurtosis_std,
  shapiro,
  prototypes_corr,
  prototypes_cos_sim,
};

inline constexpr std::size_t kNumStats = 19;

inline constexpr std::array<std::string_view, kNumStats> kStatNames = {
    "dim",          "n_classes",       "n_train",          "n_test",       "sb_trace",
    "sw_trace",     "st_trace",        "feats_corr",       "feats_cos_sim", "pca_50",
    "pca_75",       "pca_99",          "train_mean",       "train_std",    "kurtosis_avg",
    "kurtosis_std", "shapiro",         "prototypes_corr",  "prototypes_cos_sim",
};

constexpr std::size_t index_of(Stat s) { return static_cast<std::size_t>(s); }
constexpr std::string_view name_of(Stat s) { return kStatNames[index_of(s)]; }
std::optional<Stat> stat_from_name(std::string_view name);

struct StatsVector {
  std::array<double, kNumStats> values{};

  double operator[](Stat s) const { return values[index_of(s)]; }
  double& operator[](Stat s) { return values[index_of(s)]; }

  bool operator==(const StatsVector&) const = default;
};

struct MetaRecord {
  std::string dataset_id;
  SubsetTag subset_tag = SubsetTag::pretrained;
  StatsVector stats;
  double accuracy = 0.0;

  bool operator==(const MetaRecord&) const = default;
};

struct MetaDataset {
  std::vector<MetaRecord> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] bool empty() const { return records.empty(); }

  /// Records x statistics, column j holding kStatNames[j].
  [[nodiscard]] Matrix stats_matrix() const;
  [[nodiscard]] Vector accuracies() const;
  [[nodiscard]] Vector column(Stat s) const;
  [[nodiscard]] MetaDataset subset(SubsetTag tag) const;

  bool operator==(const MetaDataset&) const = default;
};

}  // namespace acclens
