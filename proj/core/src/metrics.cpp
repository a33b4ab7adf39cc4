#include "thermo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace thermo {
namespace {

constexpr double kProbSumTol = 1e-6;
constexpr double kNllClamp = 1e-12;

void check_inputs(const ProbMatrix& probs, const LabelVector& labels) {
  if (probs.size() != labels.size()) {
    throw std::invalid_argument("probs/labels length mismatch");
  }
  for (std::size_t n = 0; n < probs.size(); ++n) {
    double sum = 0.0;
    for (double p : probs[n]) sum += p;
    if (std::abs(sum - 1.0) > kProbSumTol) {
      throw std::invalid_argument("sample " + std::to_string(n) +
                                  ": probability vector not normalized");
    }
    if (labels[n] >= probs[n].size()) {
      throw std::invalid_argument("sample " + std::to_string(n) +
                                  ": label out of range");
    }
  }
}

int bin_index(double confidence, int num_bins) {
  int idx = static_cast<int>(confidence * num_bins);
  return std::min(idx, num_bins - 1);  // puts 1.0 into the last bin
}

void confidences_and_correctness(const ProbMatrix& probs, const LabelVector& labels,
                                 std::vector<double>& conf, std::vector<bool>& correct) {
  conf.resize(probs.size());
  correct.resize(probs.size());
  for (std::size_t n = 0; n < probs.size(); ++n) {
    std::size_t pred = argmax_lowest(probs[n]);
    conf[n] = probs[n][pred];
    correct[n] = (pred == labels[n]);
  }
}

double binned_gap(const std::vector<double>& conf, const std::vector<bool>& correct,
                  int num_bins, bool take_max) {
  ReliabilityBins bins = reliability_bins(conf, correct, num_bins);
  double total = 0.0, worst = 0.0;
  std::size_t n = conf.size();
  for (int m = 0; m < num_bins; ++m) {
    if (bins.counts[m] == 0) continue;
    double gap = std::abs(bins.accuracy[m] - bins.mean_confidence[m]);
    total += static_cast<double>(bins.counts[m]) / static_cast<double>(n) * gap;
    worst = std::max(worst, gap);
  }
  return take_max ? worst : total;
}

}  // namespace

std::size_t argmax_lowest(const ProbVector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

ReliabilityBins reliability_bins(const std::vector<double>& confidences,
                                 const std::vector<bool>& correctness, int num_bins) {
  if (confidences.size() != correctness.size()) {
    throw std::invalid_argument("confidences/correctness length mismatch");
  }
  if (num_bins < 1) throw std::invalid_argument("num_bins must be >= 1");

  ReliabilityBins bins;
  bins.num_bins = num_bins;
  bins.edges.resize(num_bins + 1);
  for (int m = 0; m <= num_bins; ++m) {
    bins.edges[m] = static_cast<double>(m) / num_bins;
  }
  bins.counts.assign(num_bins, 0);
  bins.accuracy.assign(num_bins, 0.0);
  bins.mean_confidence.assign(num_bins, 0.0);

  for (std::size_t n = 0; n < confidences.size(); ++n) {
    double c = confidences[n];
    if (c < 0.0 || c > 1.0) {
      throw std::invalid_argument("confidence outside [0,1] at sample " +
                                  std::to_string(n));
    }
    int m = bin_index(c, num_bins);
    bins.counts[m] += 1;
    bins.accuracy[m] += correctness[n] ? 1.0 : 0.0;
    bins.mean_confidence[m] += c;
  }
  for (int m = 0; m < num_bins; ++m) {
    if (bins.counts[m] > 0) {
      bins.accuracy[m] /= static_cast<double>(bins.counts[m]);
      bins.mean_confidence[m] /= static_cast<double>(bins.counts[m]);
    }
  }
  return bins;
}

double ece(const ProbMatrix& probs, const LabelVector& labels, int num_bins) {
  check_inputs(probs, labels);
  std::vector<double> conf;
  std::vector<bool> correct;
  confidences_and_correctness(probs, labels, conf, correct);
  return binned_gap(conf, correct, num_bins, /*take_max=*/false);
}

double mce(const ProbMatrix& probs, const LabelVector& labels, int num_bins) {
  check_inputs(probs, labels);
  std::vector<double> conf;
  std::vector<bool> correct;
  confidences_and_correctness(probs, labels, conf, correct);
  return binned_gap(conf, correct, num_bins, /*take_max=*/true);
}

double tl_ece(const ProbMatrix& probs, const LabelVector& labels, int num_bins) {
  check_inputs(probs, labels);
  if (probs.empty()) return 0.0;

  // partition samples by predicted label, bin each partition with the same
  // equal-width edges, weight every cell by |B|/N
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<bool>>> groups;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    std::size_t pred = argmax_lowest(probs[n]);
    auto& g = groups[pred];
    g.first.push_back(probs[n][pred]);
    g.second.push_back(pred == labels[n]);
  }

  double total = 0.0;
  std::size_t n_total = probs.size();
  for (const auto& [pred, g] : groups) {
    ReliabilityBins bins = reliability_bins(g.first, g.second, num_bins);
    for (int m = 0; m < num_bins; ++m) {
      if (bins.counts[m] == 0) continue;
      total += static_cast<double>(bins.counts[m]) / static_cast<double>(n_total) *
               std::abs(bins.accuracy[m] - bins.mean_confidence[m]);
    }
  }
  return total;
}

double nll(const ProbMatrix& probs, const LabelVector& labels) {
  check_inputs(probs, labels);
  if (probs.empty()) throw std::invalid_argument("empty dataset");
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    total += -std::log(std::max(probs[n][labels[n]], kNllClamp));
  }
  return total / static_cast<double>(probs.size());
}

double brier(const ProbMatrix& probs, const LabelVector& labels) {
  check_inputs(probs, labels);
  if (probs.empty()) throw std::invalid_argument("empty dataset");
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    for (std::size_t v = 0; v < probs[n].size(); ++v) {
      double target = (v == labels[n]) ? 1.0 : 0.0;
      double d = probs[n][v] - target;
      total += d * d;
    }
  }
  return total / static_cast<double>(probs.size());
}

double accuracy(const ProbMatrix& probs, const LabelVector& labels) {
  check_inputs(probs, labels);
  if (probs.empty()) throw std::invalid_argument("empty dataset");
  std::size_t correct = 0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (argmax_lowest(probs[n]) == labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

CalibrationReport make_report(const ProbMatrix& probs, const LabelVector& labels,
                              const std::string& task, const std::string& method,
                              std::optional<double> temperature_used, int num_bins) {
  CalibrationReport r;
  r.ece = ece(probs, labels, num_bins);
  r.tl_ece = tl_ece(probs, labels, num_bins);
  r.mce = mce(probs, labels, num_bins);
  r.nll = nll(probs, labels);
  r.brier = brier(probs, labels);
  r.accuracy = accuracy(probs, labels);
  r.temperature_used = temperature_used;
  r.num_bins = num_bins;
  r.task = task;
  r.method = method;
  return r;
}

std::string CalibrationReport::to_json_string() const {
  nlohmann::json j = {{"ece", ece},         {"tl_ece", tl_ece},
                      {"mce", mce},         {"nll", nll},
                      {"brier", brier},     {"accuracy", accuracy},
                      {"num_bins", num_bins}, {"task", task},
                      {"method", method}};
  if (temperature_used) {
    j["temperature_used"] = *temperature_used;
  } else {
    j["temperature_used"] = "none";
  }
  return j.dump();
}

}  // namespace thermo
