#include "domaingcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "domaingcn/error.hpp"

namespace domaingcn {

double Auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    Fail(ErrorKind::kMetrics, "auc: " + std::to_string(scores.size()) + " scores for " +
                                  std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0.0;
  double neg = 0.0;
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) {
      const int label = labels[order[m]];
      if (label == 1) {
        pos += 1.0;
        pos_rank_sum += avg_rank;
      } else if (label == 0) {
        neg += 1.0;
      } else {
        Fail(ErrorKind::kMetrics, "auc: label " + std::to_string(label) + " is not 0 or 1");
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) {
    Fail(ErrorKind::kMetrics, "auc needs both classes, got " + std::to_string(int(pos)) +
                                  " positive and " + std::to_string(int(neg)) + " negative");
  }
  return (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClassificationScores F1Acc(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    Fail(ErrorKind::kMetrics, "f1/acc: need equal nonempty inputs, got " +
                                  std::to_string(predicted.size()) + " and " +
                                  std::to_string(truth.size()));
  }
  // confusion[t][p]
  double confusion[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if ((truth[i] != 0 && truth[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
      Fail(ErrorKind::kMetrics, "f1/acc: labels must be 0 or 1");
    }
    confusion[truth[i]][predicted[i]] += 1.0;
  }
  const auto class_f1 = [&confusion](int c) {
    const double tp = confusion[c][c];
    const double fp = confusion[1 - c][c];
    const double fn = confusion[c][1 - c];
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
  };
  ClassificationScores s;
  s.acc = (confusion[0][0] + confusion[1][1]) / static_cast<double>(truth.size());
  s.f1_binary = class_f1(1);
  double total = 0.0;
  int seen = 0;
  for (int c = 0; c < 2; ++c) {
    const bool present = confusion[c][0] + confusion[c][1] + confusion[1 - c][c] > 0.0;
    if (!present) continue;
    total += class_f1(c);
    ++seen;
  }
  s.f1_macro = total / seen;
  return s;
}

MeanSd Summarize(std::span<const double> values) {
  MeanSd r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

}  // namespace domaingcn
