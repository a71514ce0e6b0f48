#pragma once

#include <span>
#include <string>
#include <vector>

#include "domaingcn/autodiff.hpp"
#include "domaingcn/graph.hpp"

namespace domaingcn {

// Thresholds turning tissue probabilities into an integer ulcer weight:
// base, +1 for scarce epithelium, +1 for abundant lymphocytes, +1 for
// abundant debris. All comparisons are strict.
struct WeightRule {
  double epithelium_max = 0.1;
  double lymphocyte_min = 0.3;
  double debris_min = 0.3;
  int base = 1;

  void Validate() const;
};

int UlcerWeight(const TissueProbs& probs, const WeightRule& rule = {});
std::vector<int> UlcerWeights(std::span<const PatchRecord> records, const WeightRule& rule = {});

// Row i scaled by weights[i]. Weights are constants, so the gradient w.r.t.
// row i is scaled by the same factor.
Var ApplyWeights(Var node_features, std::span<const int> weights);

// Two-sided Mann-Whitney rank-sum test, normal approximation with tie and
// continuity correction. u_statistic is reported for the second sample.
struct RankSumResult {
  double u_statistic = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};
RankSumResult RankSumTest(std::span<const double> first, std::span<const double> second);

double Median(std::vector<double> values);

struct HighWeightStats {
  std::vector<std::string> wsi_ids;
  std::vector<int> labels;
  std::vector<double> fractions;  // per graph, share of nodes with weight >= threshold
  double median_non_ulcer = 0.0;
  double median_ulcer = 0.0;
  RankSumResult test;  // non-ulcer vs ulcer
};

// Throws a statistics error when either label group is empty.
HighWeightStats HighWeightFraction(std::span<const WsiGraph> graphs, int threshold = 3);

}  // namespace domaingcn
