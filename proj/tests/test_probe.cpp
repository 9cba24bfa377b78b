#include <doctest.h>

#include "acclens/probe.hpp"
#include "helpers.hpp"

using namespace acclens;

TEST_CASE("l2_normalize") {
  Matrix x(3, 2);
  x << 3, 4, 0, 0, -1, 0;
  const Matrix n = l2_normalize(x);
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(0, 1) == doctest::Approx(0.8));
  CHECK(n.row(1).norm() == 0.0);
  CHECK(n(2, 0) == -1.0);
  const Eigen::MatrixXf xf = x.cast<float>();
  CHECK(l2_normalize(xf)(0, 1) == doctest::Approx(0.8f));
}

TEST_CASE("probe config validation") {
  ProbeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = {};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("separable blobs reach high accuracy") {
  std::mt19937_64 rng(1);
  const auto ds = testutil::random_dataset(rng, 4, 16, 200, 100, 10.0);
  ProbeConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  const auto r = train_linear_probe(ds, cfg);
  CHECK(r.best_accuracy >= 0.99);
  CHECK(r.accuracy_curve.size() == 200);
  CHECK(r.loss_curve.size() == 200);
  CHECK(r.best_epoch >= 1);
  CHECK(r.accuracy_curve[static_cast<std::size_t>(r.best_epoch - 1)] == r.best_accuracy);
  CHECK(r.loss_curve.back() < r.loss_curve.front());
}

TEST_CASE("best accuracy is the first maximum of the curve") {
  std::mt19937_64 rng(2);
  const auto ds = testutil::random_dataset(rng, 3, 5, 60, 30, 0.7);
  ProbeConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  const auto r = train_linear_probe(ds, cfg);
  const auto it = std::max_element(r.accuracy_curve.begin(), r.accuracy_curve.end());
  CHECK(r.best_accuracy == *it);
  CHECK(r.best_epoch == static_cast<int>(it - r.accuracy_curve.begin()) + 1);
}

TEST_CASE("constant features give the majority-class accuracy") {
  EmbeddingDataset ds;
  ds.train_x = Matrix::Constant(40, 4, 1.0);
  ds.train_y.resize(40);
  for (int i = 0; i < 40; ++i) ds.train_y[static_cast<std::size_t>(i)] = i < 28 ? 0 : (i < 34 ? 1 : 2);
  ds.test_x = Matrix::Constant(20, 4, 1.0);
  ds.test_y.resize(20);
  for (int i = 0; i < 20; ++i) ds.test_y[static_cast<std::size_t>(i)] = i < 14 ? 0 : (i < 17 ? 1 : 2);
  ProbeConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  const auto r = train_linear_probe(ds, cfg);
  CHECK(std::abs(r.best_accuracy - 0.7) <= 0.05);
}

TEST_CASE("probe is deterministic per seed") {
  std::mt19937_64 rng(3);
  const auto ds = testutil::random_dataset(rng, 3, 6, 50, 20, 1.0);
  ProbeConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 7;
  cfg.seed = 5;
  const auto a = train_linear_probe(ds, cfg);
  CHECK(a == train_linear_probe(ds, cfg));
  cfg.seed = 6;
  CHECK_FALSE(a.loss_curve == train_linear_probe(ds, cfg).loss_curve);
}

TEST_CASE("full-batch and last partial batch are handled") {
  std::mt19937_64 rng(4);
  const auto ds = testutil::random_dataset(rng, 2, 3, 11, 5, 3.0);
  ProbeConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 2048;
  CHECK_NOTHROW(train_linear_probe(ds, cfg));
  cfg.batch_size = 4;  // 11 = 4 + 4 + 3
  CHECK_NOTHROW(train_linear_probe(ds, cfg));
}
