#include "domaingcn/domain_weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "domaingcn/error.hpp"

namespace domaingcn {

namespace {

void CheckProbability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    Fail(ErrorKind::kData, std::string(name) + " probability " + std::to_string(p) +
                               " outside [0,1]");
  }
}

}  // namespace

void WeightRule::Validate() const {
  const auto check = [](double v, const char* key) {
    if (!(v >= 0.0 && v <= 1.0)) {
      Fail(ErrorKind::kConfig, std::string(key) + " must lie in [0,1], got " + std::to_string(v));
    }
  };
  check(epithelium_max, "epithelium_max");
  check(lymphocyte_min, "lymphocyte_min");
  check(debris_min, "debris_min");
}

int UlcerWeight(const TissueProbs& probs, const WeightRule& rule) {
  CheckProbability(probs.epithelium, "epithelium");
  CheckProbability(probs.lymphocyte, "lymphocyte");
  CheckProbability(probs.debris, "debris");
  return rule.base + (probs.epithelium < rule.epithelium_max ? 1 : 0) +
         (probs.lymphocyte > rule.lymphocyte_min ? 1 : 0) +
         (probs.debris > rule.debris_min ? 1 : 0);
}

std::vector<int> UlcerWeights(std::span<const PatchRecord> records, const WeightRule& rule) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    try {
      out.push_back(UlcerWeight(rec.tissue, rule));
    } catch (const Error& e) {
      Fail(e.kind(), "patch " + rec.patch_id + ": " + e.what());
    }
  }
  return out;
}

Var ApplyWeights(Var node_features, std::span<const int> weights) {
  if (weights.size() != static_cast<std::size_t>(node_features.rows())) {
    Fail(ErrorKind::kContract, "apply_weights: " + std::to_string(weights.size()) +
                                   " weights for " + ShapeString(node_features.value()));
  }
  std::vector<double> factors(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 1) {
      Fail(ErrorKind::kContract, "apply_weights: weight " + std::to_string(weights[i]) +
                                     " at node " + std::to_string(i) + " is below 1");
    }
    factors[i] = weights[i];
  }
  return ScaleRows(node_features, factors);
}

double Median(std::vector<double> values) {
  if (values.empty()) Fail(ErrorKind::kStatistics, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RankSumResult RankSumTest(std::span<const double> first, std::span<const double> second) {
  if (first.empty() || second.empty()) {
    Fail(ErrorKind::kStatistics, "rank-sum test needs two nonempty samples");
  }
  struct Item {
    double value;
    bool in_second;
  };
  std::vector<Item> items;
  items.reserve(first.size() + second.size());
  for (double v : first) items.push_back({v, false});
  for (double v : second) items.push_back({v, true});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.value < b.value; });

  const double n = static_cast<double>(items.size());
  double rank_sum_second = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t m = i; m < j; ++m) {
      if (items[m].in_second) rank_sum_second += avg_rank;
    }
    i = j;
  }

  const double n1 = static_cast<double>(first.size());
  const double n2 = static_cast<double>(second.size());
  RankSumResult r;
  r.u_statistic = rank_sum_second - n2 * (n2 + 1.0) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.z = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = r.u_statistic - mean;
  const double corrected = std::max(0.0, std::abs(diff) - 0.5);
  r.z = std::copysign(corrected, diff) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
  return r;
}

HighWeightStats HighWeightFraction(std::span<const WsiGraph> graphs, int threshold) {
  if (graphs.empty()) Fail(ErrorKind::kStatistics, "no graphs given");
  HighWeightStats s;
  std::vector<double> group[2];
  for (const auto& g : graphs) {
    if (g.node_weights.empty()) Fail(ErrorKind::kStatistics, "graph " + g.wsi_id + " has no nodes");
    const auto high = std::count_if(g.node_weights.begin(), g.node_weights.end(),
                                    [threshold](int w) { return w >= threshold; });
    const double frac = static_cast<double>(high) / static_cast<double>(g.node_weights.size());
    s.wsi_ids.push_back(g.wsi_id);
    s.labels.push_back(g.label);
    s.fractions.push_back(frac);
    group[g.label == 1 ? 1 : 0].push_back(frac);
  }
  if (group[0].empty() || group[1].empty()) {
    Fail(ErrorKind::kStatistics, std::string("label group ") + (group[0].empty() ? "0" : "1") +
                                     " is empty; both ulcer and non-ulcer graphs are required");
  }
  s.median_non_ulcer = Median(group[0]);
  s.median_ulcer = Median(group[1]);
  s.test = RankSumTest(group[0], group[1]);
  return s;
}

}  // namespace domaingcn
