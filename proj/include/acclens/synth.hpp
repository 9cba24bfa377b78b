#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acclens/dataset_io.hpp"
#include "acclens/expr.hpp"
#include "acclens/probe.hpp"
#include "acclens/types.hpp"

namespace acclens {

struct SynthConfig {
  std::string name;  // dataset id; generated from the grid position when empty
  int n_classes = 4;
  int dim = 16;
  int n_train = 200;
  int n_test = 100;
  double separation = 1.0;     // prototype radius
  double within_corr = 0.0;    // off-diagonal noise correlation, in [0, 1)
  double heavy_tail = 0.0;     // log-normal scale-mixture strength
  double proto_overlap = 0.0;  // share of each prototype along a common direction, in [0, 1)
  SubsetTag subset_tag = SubsetTag::pretrained;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

/// Prototypes c_k = separation * (sqrt(overlap) e + sqrt(1 - overlap) v_k) with e, v_k
/// uniform unit vectors and v_k orthogonal to e; samples are c_y + s * n where
/// n = sqrt(1 - rho) z + sqrt(rho) u 1 and s = exp(heavy_tail * g).
EmbeddingDataset gen_embedding_dataset(const SynthConfig& cfg);

std::vector<SynthConfig> load_grid(const fs::path& path);
void save_grid(const std::vector<SynthConfig>& grid, const fs::path& path);

/// Generates, describes and probes every configuration. The probe for entry i is
/// seeded with probe_cfg.seed combined with the entry's own seed. Datasets are
/// written under `out_root/<name>` when a root is given.
MetaDataset gen_meta(const std::vector<SynthConfig>& grid, const ProbeConfig& probe_cfg, int threads = 1,
                     const std::optional<fs::path>& out_root = std::nullopt);

/// 64 configurations covering every statistic with both subset tags; pretrained
/// entries use high separation and untrained entries low separation.
std::vector<SynthConfig> default_grid(std::uint64_t seed);

/// Configurations for a planted meta-dataset: half pretrained, half untrained, with
/// separation, correlation, overlap and class count drawn independently. Separation
/// is log-uniform over a wide range while prototype norms stay well below 1, so
/// st_trace stays near 1 and log(sb_trace) carries most of the GPF's variance.
std::vector<SynthConfig> planted_grid(int n_records, std::uint64_t seed);

/// Statistics of each planted configuration; accuracies are left at 0.
MetaDataset planted_stats(int n_records, std::uint64_t seed, int threads = 1);

/// accuracy = a * expr(stats) + b + N(0, noise^2), clamped to [0, 1].
void plant_accuracy(MetaDataset& meta, const Expr& expr, double a, double b, double noise, std::uint64_t seed);

/// Plants the standardised generator value: accuracy = center + spread * z + noise.
void plant_standardized(MetaDataset& meta, const Expr& expr, double center, double spread, double noise,
                        std::uint64_t seed);

/// planted_stats followed by plant_standardized of the canonical GPF
/// (center 0.55, spread 0.15).
MetaDataset planted_gpf_meta(int n_records, double noise, std::uint64_t seed, int threads = 1);

}  // namespace acclens
