#include <doctest.h>

#include <set>

#include "acclens/dataset_io.hpp"
#include "helpers.hpp"

using namespace acclens;
using testutil::TempDir;
using testutil::write_text;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("format_real round-trips doubles exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17})
    CHECK(std::stod(format_real(v)) == v);
}

TEST_CASE("embedding dataset loads and remaps labels by first appearance") {
  TempDir dir("emb");
  write_text(dir / "train.csv", "label,f0,f1\n7,1,2\n3,3,4\n7,5,6\n3,7,8\n");
  write_text(dir / "test.csv", "label,f0,f1\n3,0,0\n7,1,1\n");
  const auto ds = load_embedding_dataset(dir.path());
  CHECK(ds.train_y == Labels{0, 1, 0, 1});
  CHECK(ds.test_y == Labels{1, 0});
  CHECK(ds.train_x(2, 1) == 6.0);
  CHECK(ds.dim() == 2);
  CHECK(ds.n_classes() == 2);
  CHECK(ds.subset_tag == SubsetTag::pretrained);
  CHECK(ds.dataset_id == dir.path().filename().string());
}

TEST_CASE("embedding dataset errors carry file and line") {
  TempDir dir("emb_err");
  write_text(dir / "test.csv", "label,f0,f1\n0,0,0\n");

  write_text(dir / "train.csv", "label,f0,f1\n0,1,2\n1,3\n");
  CHECK(error_of([&] { load_embedding_dataset(dir.path()); }).find("train.csv:3") != std::string::npos);

  write_text(dir / "train.csv", "label,f0,f1\n0,1,2\n1,abc,4\n");
  const auto msg = error_of([&] { load_embedding_dataset(dir.path()); });
  CHECK(msg.find("train.csv:3") != std::string::npos);
  CHECK(msg.find("non-numeric") != std::string::npos);

  write_text(dir / "train.csv", "label,f0,f1\n0,1,2\n0,3,4\n");
  write_text(dir / "test.csv", "label,f0,f1\n0,0,0\n5,1,1\n");
  CHECK(error_of([&] { load_embedding_dataset(dir.path()); }).find("test.csv:3") != std::string::npos);

  fs::remove(dir / "test.csv");
  CHECK(error_of([&] { load_embedding_dataset(dir.path()); }).find("missing file") != std::string::npos);
}

TEST_CASE("embedding dataset save/load round trip with meta.json") {
  std::mt19937_64 rng(3);
  auto ds = testutil::random_dataset(rng, 3, 4, 12, 6);
  ds.dataset_id = "blobs";
  ds.subset_tag = SubsetTag::untrained;
  TempDir dir("emb_rt");
  save_embedding_dataset(ds, dir / "blobs");
  const auto back = load_embedding_dataset(dir / "blobs");
  CHECK(back.train_x == ds.train_x);
  CHECK(back.test_x == ds.test_x);
  CHECK(back.train_y == ds.train_y);
  CHECK(back.test_y == ds.test_y);
  CHECK(back.subset_tag == SubsetTag::untrained);
  CHECK(back.dataset_id == "blobs");
}

TEST_CASE("meta CSV round trip of 5 records is field-for-field identical") {
  std::mt19937_64 rng(11);
  MetaDataset meta = testutil::random_meta(rng, 5);
  meta.records[2].stats[Stat::train_mean] = -1.0 / 3.0;
  TempDir dir("meta");
  save_meta(meta, dir / "m.csv");
  CHECK(load_meta(dir / "m.csv") == meta);
}

TEST_CASE("meta CSV is header keyed and validated") {
  TempDir dir("meta_err");
  std::mt19937_64 rng(5);
  const MetaDataset meta = testutil::random_meta(rng, 3);
  save_meta(meta, dir / "m.csv");
  const std::string text = testutil::read_text(dir / "m.csv");

  SUBCASE("column order is irrelevant") {
    // Move the accuracy column to the front.
    std::stringstream in(text), out;
    std::string line;
    while (std::getline(in, line)) {
      const auto comma = line.rfind(',');
      out << line.substr(comma + 1) << ',' << line.substr(0, comma) << '\n';
    }
    write_text(dir / "p.csv", out.str());
    CHECK(load_meta(dir / "p.csv") == meta);
  }
  SUBCASE("unknown column") {
    std::string bad = text;
    bad.replace(bad.find("shapiro"), 7, "shapirX");
    write_text(dir / "u.csv", bad);
    CHECK(error_of([&] { load_meta(dir / "u.csv"); }).find("unknown column") != std::string::npos);
  }
  SUBCASE("missing column") {
    std::string bad = text;
    const auto first_line_end = bad.find('\n');
    bad = bad.substr(0, bad.rfind(",accuracy", first_line_end)) + "\n";
    write_text(dir / "x.csv", bad);
    CHECK_THROWS_AS(load_meta(dir / "x.csv"), DataError);
  }
  SUBCASE("accuracy outside [0,1]") {
    MetaDataset bad = meta;
    bad.records[0].accuracy = 1.5;
    CHECK_THROWS_AS(save_meta(bad, dir / "a.csv"), DataError);
    std::string t = text;
    const auto line2 = t.find('\n') + 1;
    const auto end2 = t.find('\n', line2);
    const auto comma = t.rfind(',', end2);
    t.replace(comma + 1, end2 - comma - 1, "1.25");
    write_text(dir / "a.csv", t);
    CHECK(error_of([&] { load_meta(dir / "a.csv"); }).find("outside [0,1]") != std::string::npos);
  }
}

TEST_CASE("meta column list") {
  const auto cols = meta_columns();
  REQUIRE(cols.size() == 22);
  CHECK(cols.front() == "dataset_id");
  CHECK(cols[1] == "subset");
  CHECK(cols.back() == "accuracy");
  CHECK(meta_columns(false).size() == 21);
}

TEST_CASE("run log JSONL round trip") {
  TempDir dir("log");
  RunRecord a{0, 42, "(log sb_trace)", 2, 0.9, 0.8, 0.64, 1.5, -0.25, 0.0};
  RunRecord b{1, 43, "(div sb_trace st_trace)", 3, 0.7, -0.1, -0.3, 0.1, 0.2, 1.25};
  append_run_log(a, dir / "r.jsonl");
  append_run_log(b, dir / "r.jsonl");
  const auto back = load_run_log(dir / "r.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  const std::string text = testutil::read_text(dir / "r.jsonl");
  CHECK(text.find("\"run_id\":0,\"seed\":42,\"sexpr\"") != std::string::npos);
}

TEST_CASE("split is deterministic, stratified and keeps file order") {
  std::mt19937_64 rng(9);
  const MetaDataset meta = testutil::random_meta(rng, 40);
  const auto [tr1, te1] = split_meta(meta, 0.75, 7);
  const auto [tr2, te2] = split_meta(meta, 0.75, 7);
  CHECK(tr1 == tr2);
  CHECK(te1 == te2);
  CHECK(tr1.size() == 30);
  CHECK(te1.size() == 10);
  CHECK(tr1.subset(SubsetTag::pretrained).size() == 15);

  std::set<std::string> ids;
  for (const auto* part : {&tr1, &te1})
    for (const auto& r : part->records) ids.insert(r.dataset_id);
  CHECK(ids.size() == 40);

  const auto position = [&](const std::string& id) {
    for (std::size_t i = 0; i < meta.size(); ++i)
      if (meta.records[i].dataset_id == id) return i;
    return meta.size();
  };
  for (std::size_t i = 1; i < tr1.size(); ++i)
    CHECK(position(tr1.records[i - 1].dataset_id) < position(tr1.records[i].dataset_id));

  const auto [tr3, te3] = split_meta(meta, 0.75, 8);
  CHECK_FALSE(tr3 == tr1);
  CHECK_THROWS_AS(split_meta(meta, 1.0, 7), DataError);
}
