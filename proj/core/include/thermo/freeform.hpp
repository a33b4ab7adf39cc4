#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "thermo/dataset.hpp"

namespace thermo {

// One free-form QA generation plus the precomputed self-check features and
// the (Yes, No) logit pair for the self-check prompt.
struct GenerationRecord {
  std::string response_text;
  std::vector<std::string> target_texts;  // non-empty, alternatives allowed
  std::vector<float> features;
  std::vector<float> logits;  // exactly 2, ordered (Yes, No)
};

// Lowercase, strip non-alphanumeric characters at token boundaries, split on
// whitespace.
std::vector<std::string> tokenize(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b);

// LCS(response, target) / |response tokens|; empty response gives 0.
double rouge_l_precision(std::string_view response, std::string_view target);

// Label 0 ("Yes") iff any target overlaps the response (max ROUGE-L
// precision > 0), else 1 ("No").
CalibrationRecord build_selfcheck_label(const GenerationRecord& rec);

// JSONL of {response, targets:[...], features:[...], logits:[yes,no]} to a
// binary-choice TaskDataset (V = 2).
TaskDataset convert_freeform(const std::string& input_path, const std::string& task_name);

}  // namespace thermo
