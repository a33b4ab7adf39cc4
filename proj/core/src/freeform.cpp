#include "thermo/freeform.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace thermo {
namespace {

bool is_word_char(unsigned char c) {
  // bytes above 0x7f are kept so multi-byte characters survive
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    // strip punctuation at both ends, lowercase the rest
    std::size_t lo = start, hi = i;
    while (lo < hi && !is_word_char(static_cast<unsigned char>(text[lo]))) ++lo;
    while (hi > lo && !is_word_char(static_cast<unsigned char>(text[hi - 1]))) --hi;
    if (lo == hi) continue;
    std::string tok(text.substr(lo, hi - lo));
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  // rolling one-row DP
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t tmp = row[j];
      row[j] = (a[i - 1] == b[j - 1]) ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = tmp;
    }
  }
  return row[b.size()];
}

double rouge_l_precision(std::string_view response, std::string_view target) {
  std::vector<std::string> resp = tokenize(response);
  if (resp.empty()) return 0.0;
  std::vector<std::string> tgt = tokenize(target);
  return static_cast<double>(lcs_length(resp, tgt)) /
         static_cast<double>(resp.size());
}

CalibrationRecord build_selfcheck_label(const GenerationRecord& rec) {
  if (rec.target_texts.empty()) {
    throw std::invalid_argument("generation record needs at least one target");
  }
  if (rec.logits.size() != 2) {
    throw std::invalid_argument("self-check logits must be a (Yes, No) pair");
  }
  double best = 0.0;
  for (const auto& target : rec.target_texts) {
    best = std::max(best, rouge_l_precision(rec.response_text, target));
  }
  CalibrationRecord out;
  out.features = rec.features;
  out.logits = rec.logits;
  out.label = best > 0.0 ? 0u : 1u;  // class 0 is "Yes"
  return out;
}

TaskDataset convert_freeform(const std::string& input_path,
                             const std::string& task_name) {
  std::ifstream in(input_path);
  if (!in) throw IoError("cannot open " + input_path);

  TaskDataset ds;
  ds.name = task_name;
  ds.num_classes = 2;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed record at line " + std::to_string(line_no) + ": " +
                    std::string(e.what()));
    }
    GenerationRecord rec;
    rec.response_text = j.at("response").get<std::string>();
    rec.target_texts = j.at("targets").get<std::vector<std::string>>();
    rec.features = j.at("features").get<std::vector<float>>();
    rec.logits = j.at("logits").get<std::vector<float>>();

    if (ds.records.empty()) {
      ds.feature_dim = static_cast<std::uint32_t>(rec.features.size());
    } else if (rec.features.size() != ds.feature_dim) {
      throw IoError("dimension mismatch at line " + std::to_string(line_no));
    }
    if (rec.logits.size() != 2) {
      throw IoError("logits must have length 2 at line " + std::to_string(line_no));
    }
    ds.records.push_back(build_selfcheck_label(rec));
  }
  return ds;
}

}  // namespace thermo
