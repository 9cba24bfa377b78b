#include "acclens/types.hpp"

#include <algorithm>

namespace acclens {

std::string_view to_string(SubsetTag tag) {
  return tag == SubsetTag::pretrained ? "pretrained" : "untrained";
}

SubsetTag parse_subset_tag(std::string_view text) {
  if (text == "pretrained") return SubsetTag::pretrained;
  if (text == "untrained") return SubsetTag::untrained;
  throw DataError("unknown subset tag '" + std::string(text) + "' (expected pretrained|untrained)");
}

std::optional<Stat> stat_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumStats; ++i)
    if (kStatNames[i] == name) return static_cast<Stat>(i);
  return std::nullopt;
}

int EmbeddingDataset::n_classes() const {
  if (train_y.empty()) return 0;
  return *std::max_element(train_y.begin(), train_y.end()) + 1;
}

void EmbeddingDataset::validate() const {
  const std::string where = dataset_id.empty() ? std::string("dataset") : dataset_id;
  if (train_x.rows() < 1 || test_x.rows() < 1 || train_x.cols() < 1)
    throw DataError(where + ": need n_train >= 1, n_test >= 1 and dim >= 1");
  if (test_x.cols() != train_x.cols())
    throw DataError(where + ": train and test dimensionality differ");
  if (static_cast<Eigen::Index>(train_y.size()) != train_x.rows() ||
      static_cast<Eigen::Index>(test_y.size()) != test_x.rows())
    throw DataError(where + ": label count does not match row count");
  if (!train_x.allFinite() || !test_x.allFinite())
    throw DataError(where + ": non-finite embedding value");

  const int k = n_classes();
  std::vector<bool> seen(static_cast<std::size_t>(std::max(k, 0)), false);
  for (int y : train_y) {
    if (y < 0) throw DataError(where + ": negative class id");
    seen[static_cast<std::size_t>(y)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw DataError(where + ": class ids are not contiguous in [0, n_classes)");
  for (int y : test_y)
    if (y < 0 || y >= k) throw DataError(where + ": test class id absent from train");
}

Matrix MetaDataset::stats_matrix() const {
  Matrix m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(kNumStats));
  for (std::size_t r = 0; r < records.size(); ++r)
    for (std::size_t j = 0; j < kNumStats; ++j)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = records[r].stats.values[j];
  return m;
}

Vector MetaDataset::accuracies() const {
  Vector v(static_cast<Eigen::Index>(records.size()));
  for (std::size_t r = 0; r < records.size(); ++r) v[static_cast<Eigen::Index>(r)] = records[r].accuracy;
  return v;
}

Vector MetaDataset::column(Stat s) const {
  Vector v(static_cast<Eigen::Index>(records.size()));
  for (std::size_t r = 0; r < records.size(); ++r) v[static_cast<Eigen::Index>(r)] = records[r].stats[s];
  return v;
}

MetaDataset MetaDataset::subset(SubsetTag tag) const {
  MetaDataset out;
  for (const auto& r : records)
    if (r.subset_tag == tag) out.records.push_back(r);
  return out;
}

}  // namespace acclens
