#pragma once

#include <cstdint>
#include <vector>

#include "acclens/types.hpp"

namespace acclens {

/// Divides each row by its Euclidean norm; zero rows are left untouched.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> l2_normalize(
    const Eigen::MatrixBase<Derived>& x) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto norm = out.row(i).norm();
    if (norm > 0) out.row(i) /= norm;
  }
  return out;
}

struct ProbeConfig {
  int epochs = 1000;
  int batch_size = 2048;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  double best_accuracy = 0.0;
  int best_epoch = 0;  // 1-based epoch of the first maximum
  std::vector<double> accuracy_curve;
  std::vector<double> loss_curve;  // mean training cross-entropy per epoch

  bool operator==(const ProbeResult&) const = default;
};

/// Softmax linear probe (zero-initialised W, b) trained with Adam on
/// l2-normalised embeddings; test accuracy is tracked after every epoch.
ProbeResult train_linear_probe(const EmbeddingDataset& ds, const ProbeConfig& cfg);

}  // namespace acclens
