#include "acclens/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace acclens {

namespace {

struct AdamState {
  Matrix m;
  Matrix v;
};

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const ProbeConfig& cfg, double bias1,
               double bias2) {
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  param.array() -= cfg.learning_rate * (state.m.array() / bias1) /
                   ((state.v.array() / bias2).sqrt() + cfg.adam_eps);
}

// Row-wise argmax; ties resolve to the lowest class id.
double accuracy(const Matrix& logits, const Labels& y) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    if (best == y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace

void ProbeConfig::validate() const {
  if (epochs < 1) throw DataError("probe: epochs must be >= 1");
  if (batch_size < 1) throw DataError("probe: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw DataError("probe: learning rate must be > 0");
}

ProbeResult train_linear_probe(const EmbeddingDataset& ds, const ProbeConfig& cfg) {
  cfg.validate();
  ds.validate();
  const int k = ds.n_classes();
  if (k < 2) throw DataError(ds.dataset_id + ": probe needs at least 2 classes");

  const Matrix x = l2_normalize(ds.train_x);
  const Matrix x_test = l2_normalize(ds.test_x);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  Matrix weights = Matrix::Zero(k, d);
  Matrix bias = Matrix::Zero(k, 1);
  AdamState w_state{Matrix::Zero(k, d), Matrix::Zero(k, d)};
  AdamState b_state{Matrix::Zero(k, 1), Matrix::Zero(k, 1)};

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  ProbeResult result;
  result.accuracy_curve.reserve(static_cast<std::size_t>(cfg.epochs));
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));
  long long step = 0;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + cfg.batch_size, n);
      const Eigen::Index rows = stop - start;
      const std::vector<Eigen::Index> batch(order.begin() + start, order.begin() + stop);
      const Matrix xb = x(batch, Eigen::all);

      Matrix probs = (xb * weights.transpose()).rowwise() + bias.col(0).transpose();
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double top = probs.row(i).maxCoeff();
        probs.row(i) = (probs.row(i).array() - top).exp();
        const double z = probs.row(i).sum();
        probs.row(i) /= z;
        const int label = ds.train_y[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
        epoch_loss -= std::log(std::max(probs(i, label), 1e-300));
        probs(i, label) -= 1.0;
      }
      probs /= static_cast<double>(rows);

      const Matrix grad_w = probs.transpose() * xb;
      const Matrix grad_b = probs.colwise().sum().transpose();
      ++step;
      beta1_pow *= cfg.beta1;
      beta2_pow *= cfg.beta2;
      adam_step(weights, grad_w, w_state, cfg, 1.0 - beta1_pow, 1.0 - beta2_pow);
      adam_step(bias, grad_b, b_state, cfg, 1.0 - beta1_pow, 1.0 - beta2_pow);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));

    const Matrix logits = (x_test * weights.transpose()).rowwise() + bias.col(0).transpose();
    const double acc = accuracy(logits, ds.test_y);
    result.accuracy_curve.push_back(acc);
    if (acc > result.best_accuracy || epoch == 0) {
      result.best_accuracy = acc;
      result.best_epoch = epoch + 1;
    }
  }
  return result;
}

}  // namespace acclens
