#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "thermo/dataset.hpp"

using namespace thermo;

namespace {

TaskDataset small_dataset() {
  TaskDataset ds;
  ds.name = "tiny";
  ds.feature_dim = 3;
  ds.num_classes = 2;
  for (int i = 0; i < 5; ++i) {
    CalibrationRecord r;
    r.features = {0.1f * i, -1.0f, 2.5f};
    r.logits = {1.0f, static_cast<float>(i)};
    r.label = static_cast<std::uint32_t>(i % 2);
    ds.records.push_back(r);
  }
  return ds;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("validate_dataset accepts a well-formed dataset") {
  CHECK(validate_dataset(small_dataset()).empty());
}

TEST_CASE("validate_dataset reports label out of range with record index") {
  TaskDataset ds = small_dataset();
  ds.records[3].label = ds.num_classes;
  auto v = validate_dataset(ds);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "record 3: label out of range");
}

TEST_CASE("validate_dataset names the record with a short feature vector") {
  TaskDataset ds = small_dataset();
  ds.records[0].features.pop_back();
  auto v = validate_dataset(ds);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("record 0") == 0);
}

TEST_CASE("validate_dataset flags non-finite entries") {
  TaskDataset ds = small_dataset();
  ds.records[2].logits[0] = std::numeric_limits<float>::infinity();
  CHECK(validate_dataset(ds).size() == 1);
}

TEST_CASE("mutating one field of a valid dataset yields a violation") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    TaskDataset ds = testutil::random_dataset(rng, 10, 4, 3);
    REQUIRE(validate_dataset(ds).empty());
    std::size_t i = rng.below(ds.records.size());
    switch (rng.below(3)) {
      case 0: ds.records[i].label = ds.num_classes + 1; break;
      case 1: ds.records[i].features.push_back(0.0f); break;
      default: ds.records[i].logits[0] = NAN; break;
    }
    CHECK(!validate_dataset(ds).empty());
  }
}

TEST_CASE("split_dev_val partitions deterministically") {
  Rng rng(7);
  TaskDataset ds = testutil::random_dataset(rng, 10, 2, 2);
  ds.name = "t";
  auto [dev, val] = split_dev_val(ds, SplitSpec{0.8, 7});
  CHECK(dev.records.size() == 8);
  CHECK(val.records.size() == 2);
  CHECK(dev.name == "t/dev");
  CHECK(val.name == "t/val");

  // partition: every original record appears exactly once across both halves
  std::vector<CalibrationRecord> merged = dev.records;
  merged.insert(merged.end(), val.records.begin(), val.records.end());
  for (const auto& r : ds.records) {
    auto it = std::find(merged.begin(), merged.end(), r);
    REQUIRE(it != merged.end());
    merged.erase(it);
  }
  CHECK(merged.empty());

  auto [dev2, val2] = split_dev_val(ds, SplitSpec{0.8, 7});
  CHECK(dev2 == dev);
  CHECK(val2 == val);

  auto [dev3, val3] = split_dev_val(ds, SplitSpec{0.8, 8});
  CHECK(dev3.records != dev.records);  // different seed reshuffles
}

TEST_CASE("split_dev_val rejects datasets below two records") {
  Rng rng(1);
  TaskDataset ds = testutil::random_dataset(rng, 1, 2, 2);
  CHECK_THROWS_AS(split_dev_val(ds, SplitSpec{0.5, 0}), std::invalid_argument);
}

TEST_CASE("binary round-trip is bit-identical") {
  TaskDataset ds = small_dataset();
  ds.planted_temperature = 1.75f;
  std::string p1 = temp_path("thermo_rt1.thrm");
  std::string p2 = temp_path("thermo_rt2.thrm");
  save_task(ds, p1, FileFormat::binary);
  TaskDataset loaded = load_task(p1, FileFormat::binary);
  CHECK(loaded.feature_dim == ds.feature_dim);
  CHECK(loaded.records == ds.records);
  CHECK(loaded.planted_temperature == ds.planted_temperature);
  save_task(loaded, p2, FileFormat::binary);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("jsonl round-trip reproduces records") {
  TaskDataset ds = small_dataset();
  std::string p = temp_path("thermo_rt.jsonl");
  save_task(ds, p, FileFormat::jsonl);
  TaskDataset loaded = load_task(p, FileFormat::jsonl);
  CHECK(loaded.name == ds.name);
  REQUIRE(loaded.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(loaded.records[i] == ds.records[i]);  // float values survive exactly
  }
}

TEST_CASE("jsonl dimension mismatch names the line") {
  std::string p = temp_path("thermo_bad.jsonl");
  {
    std::ofstream out(p);
    out << R"({"task":"x","feature_dim":4,"num_classes":2})" << "\n";
    out << R"({"features":[1,2,3],"logits":[0,1],"label":0})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_task(p, FileFormat::jsonl),
                       "dimension mismatch at line 2", IoError);
}

TEST_CASE("binary load rejects a wrong magic") {
  std::string p = temp_path("thermo_bad.thrm");
  {
    std::ofstream out(p, std::ios::binary);
    out << "NOPE____________";
  }
  CHECK_THROWS_AS(load_task(p, FileFormat::binary), IoError);
  try {
    load_task(p, FileFormat::binary);
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }
}

TEST_CASE("binary load reports truncation") {
  TaskDataset ds = small_dataset();
  std::string p = temp_path("thermo_trunc.thrm");
  save_task(ds, p, FileFormat::binary);
  std::string bytes = slurp(p);
  {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_task(p, FileFormat::binary), IoError);
}

TEST_CASE("random datasets round-trip through both formats") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    TaskDataset ds = testutil::random_dataset(rng, 1 + rng.below(30), 2 + rng.below(5),
                                              2 + rng.below(4));
    for (FileFormat fmt : {FileFormat::binary, FileFormat::jsonl}) {
      std::string p = temp_path("thermo_prop.dat");
      save_task(ds, p, fmt);
      TaskDataset loaded = load_task(p, fmt);
      CHECK(loaded.records == ds.records);
    }
  }
}
