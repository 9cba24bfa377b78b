#include "acclens/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace acclens {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Trailing blank lines are tolerated.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return cells;
}

std::string location(const fs::path& file, std::size_t line_no) {
  return file.filename().string() + ":" + std::to_string(line_no);
}

double parse_real(std::string_view cell, const fs::path& file, std::size_t line_no) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(v))
    throw DataError(location(file, line_no) + ": non-numeric cell '" + std::string(cell) + "'");
  return v;
}

long long parse_integer(std::string_view cell, const fs::path& file, std::size_t line_no) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty())
    throw DataError(location(file, line_no) + ": non-integer label '" + std::string(cell) + "'");
  return v;
}

struct RawSplit {
  Matrix x;
  std::vector<long long> labels;
  std::vector<std::size_t> line_numbers;
};

RawSplit read_split_csv(const fs::path& file) {
  if (!fs::exists(file)) throw DataError("missing file " + file.string());
  const std::string text = read_file(file);
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError(location(file, 1) + ": empty file");

  const auto header = split_cells(lines[0]);
  if (header.size() < 2 || header[0] != "label")
    throw DataError(location(file, 1) + ": header must be label,f0,f1,...");
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j + 1] != "f" + std::to_string(j))
      throw DataError(location(file, 1) + ": expected column f" + std::to_string(j) + ", found '" +
                      std::string(header[j + 1]) + "'");

  RawSplit out;
  const std::size_t n = lines.size() - 1;
  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    const auto cells = split_cells(lines[i + 1]);
    if (cells.size() != dim + 1)
      throw DataError(location(file, line_no) + ": ragged row (expected " + std::to_string(dim + 1) +
                      " cells, found " + std::to_string(cells.size()) + ")");
    out.labels.push_back(parse_integer(cells[0], file, line_no));
    for (std::size_t j = 0; j < dim; ++j)
      out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_real(cells[j + 1], file, line_no);
    out.line_numbers.push_back(line_no);
  }
  return out;
}

void write_split_csv(const Matrix& x, const Labels& y, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "label";
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out << y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << format_real(x(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + file.string());
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r\"") != std::string::npos)
    throw DataError("dataset_id '" + id + "' must be non-empty and free of commas, quotes and newlines");
}

void write_meta_like(const std::vector<MetaRecord>& rows, const fs::path& path, bool with_accuracy) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const auto cols = meta_columns(with_accuracy);
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j];
  out << '\n';
  for (const auto& r : rows) {
    check_id(r.dataset_id);
    out << r.dataset_id << ',' << to_string(r.subset_tag);
    for (double v : r.stats.values) out << ',' << format_real(v);
    if (with_accuracy) out << ',' << format_real(r.accuracy);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

EmbeddingDataset load_embedding_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a dataset directory: " + dir.string());
  const fs::path train_file = dir / "train.csv";
  const fs::path test_file = dir / "test.csv";
  RawSplit train = read_split_csv(train_file);
  RawSplit test = read_split_csv(test_file);
  if (train.x.rows() < 1) throw DataError(location(train_file, 2) + ": no samples");
  if (test.x.rows() < 1) throw DataError(location(test_file, 2) + ": no samples");
  if (train.x.cols() != test.x.cols())
    throw DataError(test_file.string() + ": dimensionality differs from train.csv");

  std::unordered_map<long long, int> remap;
  EmbeddingDataset ds;
  ds.train_y.reserve(train.labels.size());
  for (long long raw : train.labels) {
    auto [it, inserted] = remap.try_emplace(raw, static_cast<int>(remap.size()));
    ds.train_y.push_back(it->second);
  }
  ds.test_y.reserve(test.labels.size());
  for (std::size_t i = 0; i < test.labels.size(); ++i) {
    auto it = remap.find(test.labels[i]);
    if (it == remap.end())
      throw DataError(location(test_file, test.line_numbers[i]) + ": label " +
                      std::to_string(test.labels[i]) + " absent from train.csv");
    ds.test_y.push_back(it->second);
  }
  ds.train_x = std::move(train.x);
  ds.test_x = std::move(test.x);

  ds.dataset_id = dir.filename().string();
  if (ds.dataset_id.empty()) ds.dataset_id = dir.parent_path().filename().string();
  const fs::path meta_file = dir / "meta.json";
  if (fs::exists(meta_file)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(meta_file));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(meta_file.string() + ": " + e.what());
    }
    if (j.contains("dataset_id")) ds.dataset_id = j.at("dataset_id").get<std::string>();
    if (j.contains("subset_tag")) ds.subset_tag = parse_subset_tag(j.at("subset_tag").get<std::string>());
  }
  ds.validate();
  return ds;
}

void save_embedding_dataset(const EmbeddingDataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  write_split_csv(ds.train_x, ds.train_y, dir / "train.csv");
  write_split_csv(ds.test_x, ds.test_y, dir / "test.csv");
  nlohmann::ordered_json j;
  j["dataset_id"] = ds.dataset_id;
  j["subset_tag"] = std::string(to_string(ds.subset_tag));
  std::ofstream out(dir / "meta.json", std::ios::binary | std::ios::trunc);
  out << j.dump() << '\n';
  if (!out) throw DataError("write failed for " + (dir / "meta.json").string());
}

std::vector<std::string> meta_columns(bool with_accuracy) {
  std::vector<std::string> cols{"dataset_id", "subset"};
  for (auto name : kStatNames) cols.emplace_back(name);
  if (with_accuracy) cols.emplace_back("accuracy");
  return cols;
}

void save_meta(const MetaDataset& meta, const fs::path& path) {
  if (meta.empty()) throw DataError("empty meta-dataset");
  for (const auto& r : meta.records)
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw DataError(r.dataset_id + ": accuracy " + format_real(r.accuracy) + " outside [0,1]");
  write_meta_like(meta.records, path, true);
}

void save_stats_rows(const std::vector<MetaRecord>& rows, const fs::path& path) {
  write_meta_like(rows, path, false);
}

MetaDataset load_meta(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing file " + path.string());
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError(location(path, 1) + ": empty file");

  const auto expected = meta_columns(true);
  const auto header = split_cells(lines[0]);
  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(header[j]);
    if (std::find(expected.begin(), expected.end(), name) == expected.end())
      throw DataError(location(path, 1) + ": unknown column '" + name + "'");
    if (!position.emplace(name, j).second)
      throw DataError(location(path, 1) + ": duplicate column '" + name + "'");
  }
  for (const auto& name : expected)
    if (!position.count(name)) throw DataError(location(path, 1) + ": missing column '" + name + "'");

  MetaDataset meta;
  meta.records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto cells = split_cells(lines[i]);
    if (cells.size() != header.size())
      throw DataError(location(path, line_no) + ": ragged row (expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()) + ")");
    MetaRecord r;
    r.dataset_id = std::string(cells[position.find("dataset_id")->second]);
    try {
      r.subset_tag = parse_subset_tag(cells[position.find("subset")->second]);
    } catch (const DataError& e) {
      throw DataError(location(path, line_no) + ": " + e.what());
    }
    for (std::size_t s = 0; s < kNumStats; ++s)
      r.stats.values[s] = parse_real(cells[position.find(kStatNames[s])->second], path, line_no);
    r.accuracy = parse_real(cells[position.find("accuracy")->second], path, line_no);
    if (r.accuracy < 0.0 || r.accuracy > 1.0)
      throw DataError(location(path, line_no) + ": accuracy " + format_real(r.accuracy) + " outside [0,1]");
    meta.records.push_back(std::move(r));
  }
  if (meta.empty()) throw DataError(path.string() + ": empty meta-dataset");
  return meta;
}

void append_run_log(const RunRecord& record, const fs::path& path) {
  nlohmann::ordered_json j;
  j["run_id"] = record.run_id;
  j["seed"] = record.seed;
  j["sexpr"] = record.sexpr;
  j["node_count"] = record.node_count;
  j["train_fitness"] = record.train_fitness;
  j["test_pearson"] = record.test_pearson;
  j["test_r2"] = record.test_r2;
  j["calib_a"] = record.calib_a;
  j["calib_b"] = record.calib_b;
  j["duration_s"] = record.duration_s;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot open run log " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<RunRecord> load_run_log(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing file " + path.string());
  const std::string text = read_file(path);
  std::vector<RunRecord> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RunRecord r;
      r.run_id = j.at("run_id").get<std::int64_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.sexpr = j.at("sexpr").get<std::string>();
      r.node_count = j.at("node_count").get<std::int64_t>();
      r.train_fitness = j.at("train_fitness").get<double>();
      r.test_pearson = j.at("test_pearson").get<double>();
      r.test_r2 = j.at("test_r2").get<double>();
      r.calib_a = j.at("calib_a").get<double>();
      r.calib_b = j.at("calib_b").get<double>();
      r.duration_s = j.at("duration_s").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(location(path, line_no) + ": " + e.what());
    }
  }
  return out;
}

std::pair<MetaDataset, MetaDataset> split_meta(const MetaDataset& meta, double train_ratio,
                                               std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw DataError("split ratio must lie in (0,1)");
  std::vector<bool> to_train(meta.size(), false);
  std::mt19937_64 rng(seed);
  for (SubsetTag tag : {SubsetTag::pretrained, SubsetTag::untrained}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < meta.size(); ++i)
      if (meta.records[i].subset_tag == tag) idx.push_back(i);
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(idx.size())));
    if (idx.size() >= 2) take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    for (std::size_t k = 0; k < take; ++k) to_train[idx[k]] = true;
  }
  MetaDataset train, test;
  for (std::size_t i = 0; i < meta.size(); ++i)
    (to_train[i] ? train : test).records.push_back(meta.records[i]);
  if (train.empty() || test.empty()) throw DataError("split leaves an empty partition");
  return {std::move(train), std::move(test)};
}

}  // namespace acclens
