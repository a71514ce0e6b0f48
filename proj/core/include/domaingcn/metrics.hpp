#pragma once

#include <span>
#include <vector>

namespace domaingcn {

// Mann-Whitney form: (concordant pairs + 0.5 * tied pairs) / (#pos * #neg).
// Throws a metrics error unless both classes are present.
double Auc(std::span<const double> scores, std::span<const int> labels);

struct ClassificationScores {
  double f1_macro = 0.0;   // mean per-class F1 over classes seen in truth or predictions
  double f1_binary = 0.0;  // F1 of the positive class
  double acc = 0.0;
};

ClassificationScores F1Acc(std::span<const int> predicted, std::span<const int> truth);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  friend bool operator==(const MeanSd&, const MeanSd&) = default;
};
MeanSd Summarize(std::span<const double> values);

}  // namespace domaingcn
