#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "naive_metrics.hpp"
#include "test_util.hpp"
#include "thermo/metrics.hpp"

using namespace thermo;

namespace {

// two-class sample with the given top confidence; correct picks whether the
// label matches the predicted class
void push_sample(ProbMatrix& probs, LabelVector& labels, double conf, bool correct) {
  probs.push_back({conf, 1.0 - conf});
  labels.push_back(correct ? 0u : 1u);
}

}  // namespace

TEST_CASE("reliability_bins places boundary confidences correctly") {
  ReliabilityBins bins = reliability_bins({0.05, 0.95}, {true, true}, 10);
  CHECK(bins.counts[0] == 1);
  CHECK(bins.counts[9] == 1);
  CHECK(bins.accuracy[0] == 1.0);
  CHECK(bins.accuracy[9] == 1.0);

  ReliabilityBins top = reliability_bins({1.0}, {true}, 10);
  CHECK(top.counts[9] == 1);  // exact 1.0 falls in the last bin

  ReliabilityBins hand =
      reliability_bins({0.9, 0.8, 0.6, 0.55}, {true, false, true, false}, 10);
  CHECK(hand.counts[5] == 1);
  CHECK(hand.counts[6] == 1);
  CHECK(hand.counts[8] == 1);
  CHECK(hand.counts[9] == 1);
  std::size_t total = std::accumulate(hand.counts.begin(), hand.counts.end(), std::size_t{0});
  CHECK(total == 4);
}

TEST_CASE("reliability_bins rejects mismatched lengths") {
  CHECK_THROWS_AS(reliability_bins({0.5}, {true, false}, 10), std::invalid_argument);
}

TEST_CASE("ece matches the hand-binned example") {
  ProbMatrix probs;
  LabelVector labels;
  push_sample(probs, labels, 0.9, true);
  push_sample(probs, labels, 0.8, false);
  push_sample(probs, labels, 0.6, true);
  push_sample(probs, labels, 0.55, false);
  CHECK(ece(probs, labels) == doctest::Approx(0.4625).epsilon(1e-12));
  CHECK(mce(probs, labels) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("perfectly confident correct predictions have zero ece and mce") {
  ProbMatrix probs = {{1.0, 0.0}, {0.0, 1.0}};
  LabelVector labels = {0, 1};
  CHECK(ece(probs, labels) == 0.0);
  CHECK(mce(probs, labels) == 0.0);
}

TEST_CASE("single wrong sample gives mce equal to its confidence") {
  ProbMatrix probs = {{0.7, 0.3}};
  LabelVector labels = {1};
  CHECK(mce(probs, labels) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("uniform two-class probabilities with the tie rule") {
  // argmax ties break to class 0, so every sample counts as correct
  ProbMatrix probs = {{0.5, 0.5}, {0.5, 0.5}};
  LabelVector labels = {0, 0};
  CHECK(ece(probs, labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tl_ece equals ece when one label dominates and exceeds it otherwise") {
  ProbMatrix probs = {{0.9, 0.1}, {0.8, 0.2}};
  LabelVector labels = {0, 1};
  CHECK(tl_ece(probs, labels) == doctest::Approx(ece(probs, labels)).epsilon(1e-12));

  // split-label example: ECE merges the bin, TL-ECE does not
  ProbMatrix split = {{0.9, 0.1}, {0.1, 0.9}};
  LabelVector split_labels = {0, 0};
  CHECK(ece(split, split_labels) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(tl_ece(split, split_labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nll, brier and accuracy on hand examples") {
  CHECK(nll({{1.0, 0.0}}, {0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(brier({{1.0, 0.0}}, {0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(accuracy({{1.0, 0.0}}, {0}) == 1.0);

  ProbMatrix uniform4 = {{0.25, 0.25, 0.25, 0.25}};
  CHECK(nll(uniform4, {2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(brier(uniform4, {2}) == doctest::Approx(0.75).epsilon(1e-12));

  ProbMatrix two = {{0.8, 0.2}, {0.8, 0.2}};
  LabelVector labels = {0, 1};
  CHECK(nll(two, labels) ==
        doctest::Approx((-std::log(0.8) - std::log(0.2)) / 2.0).epsilon(1e-12));
}

TEST_CASE("non-normalized probability vectors are rejected by name") {
  ProbMatrix probs = {{0.5, 0.5}, {0.9, 0.4}};
  LabelVector labels = {0, 0};
  CHECK_THROWS_WITH_AS(ece(probs, labels),
                       "sample 1: probability vector not normalized",
                       std::invalid_argument);
}

TEST_CASE("metrics agree with the naive reference on random datasets") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.below(50);
    std::size_t v = 2 + rng.below(4);
    ProbMatrix probs = testutil::random_probs(rng, n, v);
    LabelVector labels = testutil::random_labels(rng, n, v);
    CHECK(ece(probs, labels) == doctest::Approx(naive::ece(probs, labels)).epsilon(1e-10));
    CHECK(mce(probs, labels) == doctest::Approx(naive::mce(probs, labels)).epsilon(1e-10));
    CHECK(tl_ece(probs, labels) ==
          doctest::Approx(naive::tl_ece(probs, labels)).epsilon(1e-10));
    CHECK(nll(probs, labels) == doctest::Approx(naive::nll(probs, labels)).epsilon(1e-10));
    CHECK(brier(probs, labels) ==
          doctest::Approx(naive::brier(probs, labels)).epsilon(1e-10));
    CHECK(accuracy(probs, labels) == naive::accuracy(probs, labels));
  }
}

TEST_CASE("metric ordering and invariance properties") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = 2 + rng.below(40);
    std::size_t v = 2 + rng.below(4);
    ProbMatrix probs = testutil::random_probs(rng, n, v);
    LabelVector labels = testutil::random_labels(rng, n, v);

    double e = ece(probs, labels);
    double m = mce(probs, labels);
    CHECK(e >= 0.0);
    CHECK(e <= m + 1e-12);
    CHECK(m <= 1.0);
    CHECK(tl_ece(probs, labels) >= e - 1e-12);

    // permuting sample order
    ProbMatrix shuffled = probs;
    LabelVector shuffled_labels = labels;
    for (std::size_t i = n - 1; i > 0; --i) {
      std::size_t j = rng.below(i + 1);
      std::swap(shuffled[i], shuffled[j]);
      std::swap(shuffled_labels[i], shuffled_labels[j]);
    }
    CHECK(ece(shuffled, shuffled_labels) == doctest::Approx(e).epsilon(1e-12));

    // relabeling classes by a rotation applied to probs and labels alike
    ProbMatrix rotated(n);
    LabelVector rotated_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      rotated[i].resize(v);
      for (std::size_t c = 0; c < v; ++c) rotated[i][(c + 1) % v] = probs[i][c];
      rotated_labels[i] = static_cast<std::uint32_t>((labels[i] + 1) % v);
    }
    CHECK(nll(rotated, rotated_labels) ==
          doctest::Approx(nll(probs, labels)).epsilon(1e-12));
    CHECK(brier(rotated, rotated_labels) ==
          doctest::Approx(brier(probs, labels)).epsilon(1e-12));
    CHECK(accuracy(rotated, rotated_labels) ==
          doctest::Approx(accuracy(probs, labels)).epsilon(1e-12));
  }
}

TEST_CASE("report serializes with the fixed field names") {
  ProbMatrix probs = {{0.9, 0.1}};
  LabelVector labels = {0};
  CalibrationReport r = make_report(probs, labels, "demo", "vanilla", std::nullopt);
  std::string j = r.to_json_string();
  for (const char* key : {"\"ece\"", "\"tl_ece\"", "\"mce\"", "\"nll\"", "\"brier\"",
                          "\"accuracy\"", "\"temperature_used\"", "\"num_bins\"",
                          "\"task\"", "\"method\""}) {
    CHECK(j.find(key) != std::string::npos);
  }
  CHECK(j.find("\"none\"") != std::string::npos);
}
