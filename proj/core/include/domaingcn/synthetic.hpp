#pragma once

// Planted-signal cohort generator.
//
// Each WSI is a random 4-connected blob of patches. Positive WSIs carry one
// 4-connected planted region whose embeddings are shifted by delta along a
// fixed random unit direction and whose tissue probabilities follow the
// ulcer profile; every other patch uses the background profile.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "domaingcn/graph.hpp"

namespace domaingcn {

struct SyntheticSpec {
  int n_wsis = 200;
  int min_nodes = 150;
  int max_nodes = 400;
  double min_region_frac = 0.1;
  double max_region_frac = 0.3;
  double delta = 1.0;
  // Per-channel standard deviation of the embeddings.
  double feature_noise = 0.25;
  // Dirichlet concentrations over (epithelium, lymphocyte, debris, other).
  std::array<double, 4> background_profile{5.0, 1.5, 1.0, 4.5};
  std::array<double, 4> ulcer_profile{0.5, 4.5, 4.0, 2.0};
  // When false, planted patches draw tissue from the background profile.
  bool informative_tissue = true;
  double positive_frac = 0.4;
  std::uint64_t seed = 0;

  void Validate() const;
  std::map<std::string, std::string> ToKeyValues() const;
  // Returns false for keys this struct does not own. Profiles are written
  // as four comma-separated numbers.
  bool Set(const std::string& key, const std::string& value);

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticWsi {
  std::string wsi_id;
  int label = 0;
  std::vector<PatchRecord> records;
  std::vector<bool> planted;  // per record
};

// Fixed unit direction used for the planted shift.
std::vector<float> SignalDirection(std::uint64_t seed);

// Number of positive WSIs: round(n_wsis * positive_frac).
int PositiveCount(const SyntheticSpec& spec);

// Exactly PositiveCount(spec) ones, placed by a seeded shuffle.
std::vector<int> GenerateLabels(const SyntheticSpec& spec);

// Deterministic in (spec.seed, index, label); WSIs can be produced
// independently. `direction` is SignalDirection(spec.seed).
SyntheticWsi GenerateWsi(const SyntheticSpec& spec, int index, int label,
                         const std::vector<float>& direction);

std::vector<SyntheticWsi> GenerateCohort(const SyntheticSpec& spec);

}  // namespace domaingcn
