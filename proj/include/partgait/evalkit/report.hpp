#pragma once

#include <map>
#include <string>

#include "partgait/evalkit/metrics.hpp"

namespace partgait::evalkit {

struct retrieval_block {
  std::map<int, double> rank_k;  // fractions in [0,1]
  double mean_ap = 0;
  double mean_inp = 0;
};

struct evaluation_report {
  bool has_retrieval = false;
  retrieval_block retrieval;
  std::map<std::string, retrieval_block> per_condition;

  bool has_classification = false;
  classification_report classification;

  bool has_diversity = false;
  diversity_result diversity;
};

// Writes <path> as JSON (fractions at full precision plus one-decimal
// percent strings, matching table formatting) and, when the diversity
// block is present, <path minus extension>_heatmap.png.
void emit_report(const evaluation_report& report, const std::string& path);

evaluation_report parse_report(const std::string& path);  // io_error

}  // namespace partgait::evalkit
