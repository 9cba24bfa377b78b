#include "acclens/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "acclens/metrics.hpp"
#include "acclens/parallel.hpp"
#include "acclens/stats.hpp"

namespace acclens {

namespace {

using json = nlohmann::ordered_json;

Vector random_unit(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vector v(d);
  do {
    for (auto& x : v) x = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Matrix draw_samples(const Matrix& protos, const Labels& y, const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Eigen::Index d = protos.cols();
  Matrix x(static_cast<Eigen::Index>(y.size()), d);
  const double a = std::sqrt(1.0 - cfg.within_corr);
  const double b = std::sqrt(cfg.within_corr);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double shared = normal(rng);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = a * normal(rng) + b * shared;
    const double scale = std::exp(cfg.heavy_tail * normal(rng));
    x.row(i) = protos.row(y[static_cast<std::size_t>(i)]) + scale * x.row(i);
  }
  return x;
}

Labels balanced_labels(int n, int n_classes, std::mt19937_64& rng) {
  Labels y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % n_classes;
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

json to_json(const SynthConfig& c) {
  return json{{"name", c.name},
              {"n_classes", c.n_classes},
              {"dim", c.dim},
              {"n_train", c.n_train},
              {"n_test", c.n_test},
              {"separation", c.separation},
              {"within_corr", c.within_corr},
              {"heavy_tail", c.heavy_tail},
              {"proto_overlap", c.proto_overlap},
              {"subset_tag", std::string(to_string(c.subset_tag))},
              {"seed", c.seed}};
}

SynthConfig from_json(const json& j) {
  if (!j.is_object()) throw DataError("grid entries must be objects");
  static const std::vector<std::string> known = {"name",         "n_classes",   "dim",        "n_train",
                                                 "n_test",       "separation",  "within_corr", "heavy_tail",
                                                 "proto_overlap", "subset_tag", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw DataError("unknown grid field: " + key);
  SynthConfig c;
  try {
    c.name = j.value("name", c.name);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.dim = j.value("dim", c.dim);
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.separation = j.value("separation", c.separation);
    c.within_corr = j.value("within_corr", c.within_corr);
    c.heavy_tail = j.value("heavy_tail", c.heavy_tail);
    c.proto_overlap = j.value("proto_overlap", c.proto_overlap);
    if (j.contains("subset_tag")) c.subset_tag = parse_subset_tag(j.at("subset_tag").get<std::string>());
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad grid entry: ") + e.what());
  }
  c.validate();
  return c;
}

std::string entry_name(const SynthConfig& c, std::size_t i) {
  if (!c.name.empty()) return c.name;
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth%03zu", i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_classes < 2) throw DataError("synth: n_classes must be >= 2");
  if (dim < 2) throw DataError("synth: dim must be >= 2");
  if (n_train < 2 * n_classes) throw DataError("synth: n_train must be >= 2 * n_classes");
  if (n_test < 1) throw DataError("synth: n_test must be >= 1");
  if (!(separation >= 0.0) || !std::isfinite(separation)) throw DataError("synth: separation must be >= 0");
  if (!(within_corr >= 0.0 && within_corr < 1.0)) throw DataError("synth: within_corr must lie in [0, 1)");
  if (!(heavy_tail >= 0.0) || !std::isfinite(heavy_tail)) throw DataError("synth: heavy_tail must be >= 0");
  if (!(proto_overlap >= 0.0 && proto_overlap < 1.0)) throw DataError("synth: proto_overlap must lie in [0, 1)");
}

EmbeddingDataset gen_embedding_dataset(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = keyed_stream(cfg.seed, 0x53594e54);
  const Eigen::Index d = cfg.dim;

  const Vector common = random_unit(rng, d);
  Matrix protos(cfg.n_classes, d);
  for (int k = 0; k < cfg.n_classes; ++k) {
    Vector v = random_unit(rng, d);
    v -= v.dot(common) * common;
    if (v.norm() > 0.0) v /= v.norm();
    protos.row(k) = cfg.separation * (std::sqrt(cfg.proto_overlap) * common + std::sqrt(1.0 - cfg.proto_overlap) * v);
  }

  EmbeddingDataset ds;
  ds.train_y = balanced_labels(cfg.n_train, cfg.n_classes, rng);
  ds.test_y = balanced_labels(cfg.n_test, cfg.n_classes, rng);
  ds.train_x = draw_samples(protos, ds.train_y, cfg, rng);
  ds.test_x = draw_samples(protos, ds.test_y, cfg, rng);
  ds.subset_tag = cfg.subset_tag;
  ds.dataset_id = cfg.name.empty() ? "synth" : cfg.name;
  ds.validate();
  return ds;
}

std::vector<SynthConfig> load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw DataError(path.string() + ": grid must be a nonempty array");
  std::vector<SynthConfig> grid;
  for (const auto& entry : doc) grid.push_back(from_json(entry));
  return grid;
}

void save_grid(const std::vector<SynthConfig>& grid, const fs::path& path) {
  json doc = json::array();
  for (const auto& c : grid) doc.push_back(to_json(c));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

MetaDataset gen_meta(const std::vector<SynthConfig>& grid, const ProbeConfig& probe_cfg, int threads,
                     const std::optional<fs::path>& out_root) {
  if (grid.empty()) throw DataError("gen_meta: empty grid");
  probe_cfg.validate();
  MetaDataset meta;
  meta.records.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    SynthConfig cfg = grid[i];
    cfg.name = entry_name(cfg, i);
    const EmbeddingDataset ds = gen_embedding_dataset(cfg);
    if (out_root) save_embedding_dataset(ds, *out_root / cfg.name);
    MetaRecord rec = stats_record(ds, cfg.seed);
    ProbeConfig pc = probe_cfg;
    pc.seed = keyed_stream(probe_cfg.seed, cfg.seed, i)();
    rec.accuracy = train_linear_probe(ds, pc).best_accuracy;
    meta.records[i] = std::move(rec);
  });
  return meta;
}

std::vector<SynthConfig> default_grid(std::uint64_t seed) {
  constexpr int kEntries = 64;
  const std::array<int, 4> classes = {2, 3, 5, 8};
  const std::array<int, 3> dims = {8, 16, 32};
  const std::array<double, 3> corrs = {0.0, 0.3, 0.6};
  const std::array<double, 2> tails = {0.0, 0.5};
  std::vector<SynthConfig> grid;
  for (int i = 0; i < kEntries; ++i) {
    auto rng = keyed_stream(seed, 0x47524944, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SynthConfig c;
    c.subset_tag = i % 2 == 0 ? SubsetTag::pretrained : SubsetTag::untrained;
    c.n_classes = classes[static_cast<std::size_t>(i / 2) % classes.size()];
    c.dim = dims[static_cast<std::size_t>(i / 8) % dims.size()];
    c.within_corr = corrs[static_cast<std::size_t>(i / 3) % corrs.size()];
    c.heavy_tail = tails[static_cast<std::size_t>(i / 5) % tails.size()];
    c.proto_overlap = 0.05 + 0.5 * u(rng);
    const double s = c.subset_tag == SubsetTag::pretrained ? 0.6 + 1.4 * u(rng) : 0.05 + 0.5 * u(rng);
    c.separation = s * std::sqrt(static_cast<double>(c.dim));
    c.n_train = 120 + 40 * (i % 3);
    c.n_test = 60 + 10 * (i % 5);
    c.seed = keyed_stream(seed, 0x53454544, static_cast<std::uint64_t>(i))();
    c.name = entry_name(c, static_cast<std::size_t>(i));
    grid.push_back(c);
  }
  return grid;
}

std::vector<SynthConfig> planted_grid(int n_records, std::uint64_t seed) {
  if (n_records < 6) throw DataError("planted grid needs at least 6 records");
  const std::array<int, 3> classes = {4, 5, 6};
  std::vector<SynthConfig> grid;
  for (int i = 0; i < n_records; ++i) {
    auto rng = keyed_stream(seed, 0x504c4e54, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SynthConfig c;
    c.subset_tag = i % 2 == 0 ? SubsetTag::pretrained : SubsetTag::untrained;
    c.n_classes = classes[std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng)];
    c.dim = 16;
    c.within_corr = 0.4 + 0.2 * u(rng);
    c.heavy_tail = 0.0;
    c.proto_overlap = 0.15 + 0.15 * u(rng);
    // log-uniform relative separation; the pretrained range sits higher
    const double lo = c.subset_tag == SubsetTag::pretrained ? std::log(0.2) : std::log(0.03);
    const double hi = c.subset_tag == SubsetTag::pretrained ? std::log(0.8) : std::log(0.25);
    c.separation = std::exp(lo + (hi - lo) * u(rng)) * std::sqrt(static_cast<double>(c.dim));
    c.n_train = 300 * c.n_classes;
    c.n_test = 20;
    c.seed = keyed_stream(seed, 0x53454544, static_cast<std::uint64_t>(i))();
    c.name = entry_name(c, static_cast<std::size_t>(i));
    grid.push_back(c);
  }
  return grid;
}

MetaDataset planted_stats(int n_records, std::uint64_t seed, int threads) {
  const auto grid = planted_grid(n_records, seed);
  MetaDataset meta;
  meta.records.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    meta.records[i] = stats_record(gen_embedding_dataset(grid[i]), grid[i].seed);
  });
  return meta;
}

void plant_accuracy(MetaDataset& meta, const Expr& expr, double a, double b, double noise, std::uint64_t seed) {
  const Vector value = evaluate_batch(expr, meta);
  auto rng = keyed_stream(seed, 0x4e4f4953);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < meta.size(); ++i)
    meta.records[i].accuracy =
        std::clamp(a * value[static_cast<Eigen::Index>(i)] + b + noise * normal(rng), 0.0, 1.0);
}

void plant_standardized(MetaDataset& meta, const Expr& expr, double center, double spread, double noise,
                        std::uint64_t seed) {
  const Vector value = evaluate_batch(expr, meta);
  const double mean = value.mean();
  const double sd = std::sqrt((value.array() - mean).square().mean());
  if (is_degenerate(as_span(value))) throw NumericError("planted generator is constant over the records");
  plant_accuracy(meta, expr, spread / sd, center - spread * mean / sd, noise, seed);
}

MetaDataset planted_gpf_meta(int n_records, double noise, std::uint64_t seed, int threads) {
  MetaDataset meta = planted_stats(n_records, seed, threads);
  plant_standardized(meta, canonical_gpf(), 0.55, 0.15, noise, seed);
  return meta;
}

}  // namespace acclens
