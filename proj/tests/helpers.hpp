#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "acclens/types.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("acclens_" + tag + "_" + std::to_string(::getpid()) + "_" +
                                         std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct CommandResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline CommandResult run_command(const std::string& command) {
  CommandResult out;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.output.append(buf, n);
  const int status = pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

#ifdef ACCLENS_CLI_PATH
inline CommandResult run_cli(const std::string& args) { return run_command(std::string(ACCLENS_CLI_PATH) + " " + args); }
#endif

inline acclens::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  acclens::Matrix m(rows, cols);
  for (auto& v : m.reshaped()) v = normal(rng);
  return m;
}

/// Blobs with `k` classes, every class present at least twice in train.
inline acclens::EmbeddingDataset random_dataset(std::mt19937_64& rng, int k, Eigen::Index dim, int n_train,
                                                int n_test, double spread = 2.0) {
  acclens::EmbeddingDataset ds;
  const acclens::Matrix centers = random_matrix(rng, k, dim, spread);
  const auto fill = [&](int n, acclens::Matrix& x, acclens::Labels& y) {
    x = random_matrix(rng, n, dim);
    y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = i % k;
      x.row(i) += centers.row(i % k);
    }
  };
  fill(n_train, ds.train_x, ds.train_y);
  fill(n_test, ds.test_x, ds.test_y);
  ds.dataset_id = "random";
  return ds;
}

/// Meta-dataset of random positive statistics with alternating subset tags.
inline acclens::MetaDataset random_meta(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  acclens::MetaDataset meta;
  for (int i = 0; i < n; ++i) {
    acclens::MetaRecord r;
    r.dataset_id = "d" + std::to_string(i);
    r.subset_tag = i % 2 == 0 ? acclens::SubsetTag::pretrained : acclens::SubsetTag::untrained;
    for (double& v : r.stats.values) v = u(rng);
    r.accuracy = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    meta.records.push_back(r);
  }
  return meta;
}

}  // namespace testutil
