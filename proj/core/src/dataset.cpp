#include "thermo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "thermo/rng.hpp"

namespace thermo {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'T', 'H', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kPlantedFlag = 0x80000000u;

bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](float x) { return std::isfinite(x); });
}

template <typename T>
void write_le(std::ostream& os, T value) {
  // assumes a little-endian host, which is all we target
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) {
    throw IoError("truncated payload reading " + what + " at byte offset " +
                  std::to_string(static_cast<long long>(is.tellg())));
  }
  return value;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

TaskDataset load_task_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path);

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError("malformed header at line 1: " + std::string(e.what()));
  }
  if (!header.is_object() || !header.contains("feature_dim") ||
      !header.contains("num_classes")) {
    throw IoError("malformed header at line 1: missing feature_dim/num_classes");
  }

  TaskDataset ds;
  ds.name = header.value("task", stem_of(path));
  ds.feature_dim = header["feature_dim"].get<std::uint32_t>();
  ds.num_classes = header["num_classes"].get<std::uint32_t>();
  if (header.contains("planted_temperature") &&
      !header["planted_temperature"].is_null()) {
    ds.planted_temperature = header["planted_temperature"].get<float>();
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("malformed record at line " + std::to_string(line_no) +
                    ": " + std::string(e.what()));
    }
    CalibrationRecord r;
    r.features = rec.at("features").get<std::vector<float>>();
    r.logits = rec.at("logits").get<std::vector<float>>();
    r.label = rec.at("label").get<std::uint32_t>();
    if (r.features.size() != ds.feature_dim || r.logits.size() != ds.num_classes) {
      throw IoError("dimension mismatch at line " + std::to_string(line_no));
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

void save_task_jsonl(const TaskDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  json header = {{"task", ds.name},
                 {"feature_dim", ds.feature_dim},
                 {"num_classes", ds.num_classes}};
  if (ds.planted_temperature) {
    header["planted_temperature"] = *ds.planted_temperature;
  }
  out << header.dump() << '\n';
  for (const auto& r : ds.records) {
    json rec = {{"features", r.features}, {"logits", r.logits}, {"label", r.label}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

TaskDataset load_task_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("bad magic in " + path);
  }
  std::uint32_t version_field = read_le<std::uint32_t>(in, "version");
  bool has_planted = (version_field & kPlantedFlag) != 0;
  std::uint32_t version = version_field & ~kPlantedFlag;
  if (version != kVersion) {
    throw IoError("unsupported version " + std::to_string(version) + " in " + path);
  }

  TaskDataset ds;
  ds.name = stem_of(path);
  ds.feature_dim = read_le<std::uint32_t>(in, "feature_dim");
  ds.num_classes = read_le<std::uint32_t>(in, "num_classes");
  std::uint64_t n = read_le<std::uint64_t>(in, "record count");

  ds.records.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& r = ds.records[i];
    r.features.resize(ds.feature_dim);
    r.logits.resize(ds.num_classes);
    for (auto& x : r.features) x = read_le<float>(in, "features");
    for (auto& z : r.logits) z = read_le<float>(in, "logits");
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    ds.records[i].label = read_le<std::uint32_t>(in, "labels");
  }
  if (has_planted) {
    ds.planted_temperature = read_le<float>(in, "planted temperature");
  }
  return ds;
}

void save_task_binary(const TaskDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  std::uint32_t version_field = kVersion;
  if (ds.planted_temperature) version_field |= kPlantedFlag;
  write_le(out, version_field);
  write_le(out, ds.feature_dim);
  write_le(out, ds.num_classes);
  write_le(out, static_cast<std::uint64_t>(ds.records.size()));
  for (const auto& r : ds.records) {
    for (float x : r.features) write_le(out, x);
    for (float z : r.logits) write_le(out, z);
  }
  for (const auto& r : ds.records) write_le(out, r.label);
  if (ds.planted_temperature) write_le(out, *ds.planted_temperature);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

FileFormat parse_format(const std::string& name) {
  if (name == "jsonl") return FileFormat::jsonl;
  if (name == "binary") return FileFormat::binary;
  throw std::invalid_argument("unknown format: " + name);
}

const char* format_name(FileFormat format) {
  return format == FileFormat::jsonl ? "jsonl" : "binary";
}

std::vector<std::string> validate_dataset(const TaskDataset& ds) {
  std::vector<std::string> violations;
  if (ds.feature_dim == 0) violations.push_back("feature_dim must be positive");
  if (ds.num_classes < 2) violations.push_back("num_classes must be at least 2");
  if (ds.planted_temperature && !(*ds.planted_temperature > 0.0f)) {
    violations.push_back("planted_temperature must be positive");
  }
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    std::string tag = "record " + std::to_string(i) + ": ";
    if (r.features.size() != ds.feature_dim) {
      violations.push_back(tag + "features length " +
                           std::to_string(r.features.size()) + " != feature_dim " +
                           std::to_string(ds.feature_dim));
    }
    if (r.logits.size() != ds.num_classes) {
      violations.push_back(tag + "logits length " +
                           std::to_string(r.logits.size()) + " != num_classes " +
                           std::to_string(ds.num_classes));
    }
    if (!all_finite(r.features)) violations.push_back(tag + "non-finite features");
    if (!all_finite(r.logits)) violations.push_back(tag + "non-finite logits");
    if (r.label >= ds.num_classes) violations.push_back(tag + "label out of range");
  }
  return violations;
}

std::pair<TaskDataset, TaskDataset> split_dev_val(const TaskDataset& ds,
                                                  const SplitSpec& spec) {
  if (ds.records.size() < 2) throw std::invalid_argument("unsplittable dataset");
  if (!(spec.dev_fraction > 0.0 && spec.dev_fraction < 1.0)) {
    throw std::invalid_argument("dev_fraction must be in (0,1)");
  }

  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  // Fisher-Yates
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }

  std::size_t dev_count = static_cast<std::size_t>(
      std::llround(spec.dev_fraction * static_cast<double>(ds.records.size())));
  dev_count = std::clamp<std::size_t>(dev_count, 1, ds.records.size() - 1);

  TaskDataset dev{ds.name + "/dev", ds.feature_dim, ds.num_classes, {},
                  ds.planted_temperature};
  TaskDataset val{ds.name + "/val", ds.feature_dim, ds.num_classes, {},
                  ds.planted_temperature};
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < dev_count ? dev : val).records.push_back(ds.records[order[i]]);
  }
  return {std::move(dev), std::move(val)};
}

TaskDataset load_task(const std::string& path, FileFormat format) {
  return format == FileFormat::jsonl ? load_task_jsonl(path)
                                     : load_task_binary(path);
}

void save_task(const TaskDataset& ds, const std::string& path,
               FileFormat format) {
  if (format == FileFormat::jsonl) {
    save_task_jsonl(ds, path);
  } else {
    save_task_binary(ds, path);
  }
}

}  // namespace thermo
