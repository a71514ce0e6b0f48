#include "domaingcn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"
#include "domaingcn/training.hpp"

namespace domaingcn {

namespace {

constexpr std::uint64_t kDirectionStream = 0x6469726563ULL;
constexpr std::uint64_t kLabelStream = 0x6c6162656cULL;
constexpr std::uint64_t kWsiStream = 0x777369ULL;

std::string ProfileText(const std::array<double, 4>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0) s += ',';
    s += FormatDouble(p[i]);
  }
  return s;
}

std::array<double, 4> ParseProfile(const std::string& key, const std::string& value) {
  const auto parts = Split(value, ',');
  std::array<double, 4> out{};
  if (parts.size() != out.size()) {
    Fail(ErrorKind::kConfig, key + " needs 4 comma-separated values, got '" + value + "'");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto v = ParseDouble(Trim(parts[i]));
    if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
    out[i] = *v;
  }
  return out;
}

double RequireDouble(const std::string& key, const std::string& value) {
  const auto v = ParseDouble(value);
  if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  return *v;
}

int RequireInt(const std::string& key, const std::string& value) {
  const auto v = ParseInt(value);
  if (!v || *v < INT32_MIN || *v > INT32_MAX) {
    Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  }
  return static_cast<int>(*v);
}

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

std::array<double, 4> Dirichlet(std::mt19937_64& rng, const std::array<double, 4>& alpha) {
  std::array<double, 4> x{};
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    x[i] = gamma(rng);
    total += x[i];
  }
  for (double& v : x) v /= total;
  return x;
}

// Grows a 4-connected set of `target` cells from `start`, drawing the next
// cell uniformly from the current frontier. `allowed(c)` limits the cells.
template <typename Allowed>
std::vector<GridCoord> GrowRegion(std::mt19937_64& rng, GridCoord start, std::size_t target,
                                  Allowed allowed) {
  std::vector<GridCoord> region{start};
  std::set<GridCoord> taken{start};
  std::vector<GridCoord> frontier;
  std::set<GridCoord> in_frontier;
  const auto push_neighbors = [&](GridCoord c) {
    const GridCoord around[4] = {
        {c.col + 1, c.row}, {c.col - 1, c.row}, {c.col, c.row + 1}, {c.col, c.row - 1}};
    for (const GridCoord& n : around) {
      if (!allowed(n) || taken.count(n) != 0 || in_frontier.count(n) != 0) continue;
      frontier.push_back(n);
      in_frontier.insert(n);
    }
  };
  push_neighbors(start);
  while (region.size() < target && !frontier.empty()) {
    const std::size_t pick = UniformIndex(rng, frontier.size());
    const GridCoord c = frontier[pick];
    frontier[pick] = frontier.back();
    frontier.pop_back();
    in_frontier.erase(c);
    taken.insert(c);
    region.push_back(c);
    push_neighbors(c);
  }
  return region;
}

}  // namespace

void SyntheticSpec::Validate() const {
  if (n_wsis < 1) Fail(ErrorKind::kConfig, "n_wsis must be >= 1");
  if (min_nodes < 2 || max_nodes < min_nodes) {
    Fail(ErrorKind::kConfig, "node range must satisfy 2 <= min_nodes <= max_nodes");
  }
  if (!(min_region_frac > 0.0) || max_region_frac < min_region_frac) {
    Fail(ErrorKind::kConfig, "region fraction range must satisfy 0 < min <= max");
  }
  if (!(max_region_frac < 1.0)) {
    Fail(ErrorKind::kConfig, "planted region fraction must be below 1, got " +
                                 FormatDouble(max_region_frac));
  }
  if (!std::isfinite(delta)) Fail(ErrorKind::kConfig, "delta must be finite");
  if (!(feature_noise > 0.0) || !std::isfinite(feature_noise)) {
    Fail(ErrorKind::kConfig, "feature_noise must be positive");
  }
  for (const auto* profile : {&background_profile, &ulcer_profile}) {
    for (double a : *profile) {
      if (!(a > 0.0) || !std::isfinite(a)) {
        Fail(ErrorKind::kConfig, "tissue profile concentrations must be positive");
      }
    }
  }
  if (!(positive_frac >= 0.0 && positive_frac <= 1.0)) {
    Fail(ErrorKind::kConfig, "positive_frac must lie in [0, 1]");
  }
}

std::map<std::string, std::string> SyntheticSpec::ToKeyValues() const {
  return {
      {"n_wsis", std::to_string(n_wsis)},
      {"min_nodes", std::to_string(min_nodes)},
      {"max_nodes", std::to_string(max_nodes)},
      {"min_region_frac", FormatDouble(min_region_frac)},
      {"max_region_frac", FormatDouble(max_region_frac)},
      {"delta", FormatDouble(delta)},
      {"feature_noise", FormatDouble(feature_noise)},
      {"background_profile", ProfileText(background_profile)},
      {"ulcer_profile", ProfileText(ulcer_profile)},
      {"informative_tissue", informative_tissue ? "true" : "false"},
      {"positive_frac", FormatDouble(positive_frac)},
      {"seed", std::to_string(seed)},
  };
}

bool SyntheticSpec::Set(const std::string& key, const std::string& value) {
  if (key == "n_wsis") {
    n_wsis = RequireInt(key, value);
  } else if (key == "min_nodes") {
    min_nodes = RequireInt(key, value);
  } else if (key == "max_nodes") {
    max_nodes = RequireInt(key, value);
  } else if (key == "min_region_frac") {
    min_region_frac = RequireDouble(key, value);
  } else if (key == "max_region_frac") {
    max_region_frac = RequireDouble(key, value);
  } else if (key == "delta") {
    delta = RequireDouble(key, value);
  } else if (key == "feature_noise") {
    feature_noise = RequireDouble(key, value);
  } else if (key == "background_profile") {
    background_profile = ParseProfile(key, value);
  } else if (key == "ulcer_profile") {
    ulcer_profile = ParseProfile(key, value);
  } else if (key == "informative_tissue") {
    const auto v = ParseBool(value);
    if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
    informative_tissue = *v;
  } else if (key == "positive_frac") {
    positive_frac = RequireDouble(key, value);
  } else if (key == "seed") {
    const auto v = ParseUint(value);
    if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for seed");
    seed = *v;
  } else {
    return false;
  }
  return true;
}

std::vector<float> SignalDirection(std::uint64_t seed) {
  std::mt19937_64 rng(MixSeed(seed, kDirectionStream));
  std::normal_distribution<double> normal;
  std::vector<double> d(kEmbeddingDim);
  double norm = 0.0;
  for (double& v : d) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(kEmbeddingDim);
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = static_cast<float>(d[i] / norm);
  return out;
}

int PositiveCount(const SyntheticSpec& spec) {
  return static_cast<int>(std::lround(spec.n_wsis * spec.positive_frac));
}

std::vector<int> GenerateLabels(const SyntheticSpec& spec) {
  spec.Validate();
  std::vector<int> labels(static_cast<std::size_t>(spec.n_wsis), 0);
  std::fill_n(labels.begin(), PositiveCount(spec), 1);
  std::mt19937_64 rng(MixSeed(spec.seed, kLabelStream));
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[UniformIndex(rng, i)]);
  }
  return labels;
}

SyntheticWsi GenerateWsi(const SyntheticSpec& spec, int index, int label,
                         const std::vector<float>& direction) {
  if (direction.size() != kEmbeddingDim) {
    Fail(ErrorKind::kContract, "signal direction must have 1024 entries");
  }
  std::mt19937_64 rng(MixSeed(spec.seed, kWsiStream, static_cast<std::uint64_t>(index)));
  const auto span = static_cast<std::size_t>(spec.max_nodes - spec.min_nodes + 1);
  const std::size_t n = static_cast<std::size_t>(spec.min_nodes) + UniformIndex(rng, span);

  // Tissue blob inside a square box with room to spare.
  const int side = static_cast<int>(std::ceil(std::sqrt(2.0 * static_cast<double>(n)))) + 2;
  const auto in_box = [side](GridCoord c) {
    return c.col >= 0 && c.row >= 0 && c.col < side && c.row < side;
  };
  std::vector<GridCoord> cells =
      GrowRegion(rng, GridCoord{side / 2, side / 2}, n, in_box);
  std::sort(cells.begin(), cells.end(), [](GridCoord a, GridCoord b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  std::set<GridCoord> planted_cells;
  if (label == 1) {
    const double frac =
        spec.min_region_frac + (spec.max_region_frac - spec.min_region_frac) * Uniform01(rng);
    const std::size_t size =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * n)));
    const std::set<GridCoord> tissue(cells.begin(), cells.end());
    const GridCoord start = cells[UniformIndex(rng, cells.size())];
    const auto in_tissue = [&tissue](GridCoord c) { return tissue.count(c) != 0; };
    for (GridCoord c : GrowRegion(rng, start, size, in_tissue)) planted_cells.insert(c);
  }

  SyntheticWsi wsi;
  char id[32];
  std::snprintf(id, sizeof id, "wsi%04d", index);
  wsi.wsi_id = id;
  wsi.label = label;
  wsi.records.reserve(n);
  wsi.planted.reserve(n);
  std::normal_distribution<double> normal(0.0, spec.feature_noise);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const bool planted = planted_cells.count(cells[i]) != 0;
    PatchRecord r;
    std::snprintf(id, sizeof id, "p%04zu", i);
    r.patch_id = id;
    r.coord = cells[i];
    r.embedding.resize(kEmbeddingDim);
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
      double v = normal(rng);
      if (planted) v += spec.delta * direction[d];
      r.embedding[d] = static_cast<float>(v);
    }
    const auto& profile =
        planted && spec.informative_tissue ? spec.ulcer_profile : spec.background_profile;
    const auto p = Dirichlet(rng, profile);
    r.tissue = {p[0], p[1], p[2]};
    wsi.records.push_back(std::move(r));
    wsi.planted.push_back(planted);
  }
  return wsi;
}

std::vector<SyntheticWsi> GenerateCohort(const SyntheticSpec& spec) {
  const std::vector<int> labels = GenerateLabels(spec);
  const std::vector<float> direction = SignalDirection(spec.seed);
  std::vector<SyntheticWsi> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back(GenerateWsi(spec, static_cast<int>(i), labels[i], direction));
  }
  return out;
}

}  // namespace domaingcn
