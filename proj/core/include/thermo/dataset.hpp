#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermo {

// I/O failures (missing file, bad header, truncation). Everything else that
// is a caller mistake throws std::invalid_argument.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One prompt: precomputed feature vector, logit vector over the answer
// classes, and the gold label index.
struct CalibrationRecord {
  std::vector<float> features;
  std::vector<float> logits;
  std::uint32_t label = 0;

  bool operator==(const CalibrationRecord&) const = default;
};

// A named task: fixed feature/class dimensions plus an ordered record list.
// planted_temperature is only set for synthetic data and records the
// temperature the labels were sampled at.
struct TaskDataset {
  std::string name;
  std::uint32_t feature_dim = 0;
  std::uint32_t num_classes = 0;
  std::vector<CalibrationRecord> records;
  std::optional<float> planted_temperature;

  bool operator==(const TaskDataset&) const = default;
};

struct SplitSpec {
  double dev_fraction = 0.8;  // in (0, 1)
  std::uint64_t seed = 0;
};

enum class FileFormat { jsonl, binary };

FileFormat parse_format(const std::string& name);
const char* format_name(FileFormat format);

// Returns one human-readable violation per broken invariant, empty when the
// dataset is well-formed. Never throws.
std::vector<std::string> validate_dataset(const TaskDataset& ds);

// Seeded shuffle + prefix cut. dev gets round(dev_fraction * N) records; the
// two halves partition the dataset and keep D/V/name (suffixed /dev, /val).
std::pair<TaskDataset, TaskDataset> split_dev_val(const TaskDataset& ds,
                                                  const SplitSpec& spec);

TaskDataset load_task(const std::string& path, FileFormat format);
void save_task(const TaskDataset& ds, const std::string& path,
               FileFormat format);

}  // namespace thermo
