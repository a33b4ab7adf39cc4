#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace thermo {

using ProbVector = std::vector<double>;
using ProbMatrix = std::vector<ProbVector>;
using LabelVector = std::vector<std::uint32_t>;

// Equal-width confidence bins over [0,1]; last bin closed at 1.0.
struct ReliabilityBins {
  int num_bins = 0;
  std::vector<double> edges;            // num_bins + 1
  std::vector<std::size_t> counts;      // per bin
  std::vector<double> accuracy;         // 0 for empty bins
  std::vector<double> mean_confidence;  // 0 for empty bins
};

struct CalibrationReport {
  double ece = 0.0;
  double tl_ece = 0.0;
  double mce = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double accuracy = 0.0;
  std::optional<double> temperature_used;  // absent -> "none"
  int num_bins = 10;
  std::string task;
  std::string method;

  std::string to_json_string() const;
};

ReliabilityBins reliability_bins(const std::vector<double>& confidences,
                                 const std::vector<bool>& correctness, int num_bins);

// probs: one normalized probability vector per sample (sum within 1e-6 of 1).
// Confidence is the max entry; predicted class is the argmax with ties broken
// to the lowest index.
double ece(const ProbMatrix& probs, const LabelVector& labels, int num_bins = 10);
double mce(const ProbMatrix& probs, const LabelVector& labels, int num_bins = 10);
double tl_ece(const ProbMatrix& probs, const LabelVector& labels, int num_bins = 10);
double nll(const ProbMatrix& probs, const LabelVector& labels);
double brier(const ProbMatrix& probs, const LabelVector& labels);
double accuracy(const ProbMatrix& probs, const LabelVector& labels);

std::size_t argmax_lowest(const ProbVector& v);

CalibrationReport make_report(const ProbMatrix& probs, const LabelVector& labels,
                              const std::string& task, const std::string& method,
                              std::optional<double> temperature_used,
                              int num_bins = 10);

}  // namespace thermo
