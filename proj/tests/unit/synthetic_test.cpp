#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "domaingcn/dataset.hpp"
#include "domaingcn/error.hpp"
#include "domaingcn/synthetic.hpp"

using namespace domaingcn;
namespace fs = std::filesystem;

namespace {

SyntheticSpec SmallSpec(std::uint64_t seed) {
  SyntheticSpec s;
  s.n_wsis = 12;
  s.min_nodes = 20;
  s.max_nodes = 40;
  s.seed = seed;
  return s;
}

bool FourConnected(const std::vector<GridCoord>& cells) {
  if (cells.empty()) return false;
  const std::set<GridCoord> all(cells.begin(), cells.end());
  std::set<GridCoord> seen = {cells[0]};
  std::queue<GridCoord> q;
  q.push(cells[0]);
  while (!q.empty()) {
    const GridCoord c = q.front();
    q.pop();
    for (const GridCoord d : {GridCoord{c.col + 1, c.row}, GridCoord{c.col - 1, c.row},
                              GridCoord{c.col, c.row + 1}, GridCoord{c.col, c.row - 1}}) {
      if (all.count(d) && seen.insert(d).second) q.push(d);
    }
  }
  return seen.size() == all.size();
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Synthetic, LabelBalanceWithinOne) {
  for (int n : {10, 37, 200, 305}) {
    SyntheticSpec s;
    s.n_wsis = n;
    const auto labels = GenerateLabels(s);
    const int pos = std::accumulate(labels.begin(), labels.end(), 0);
    EXPECT_LE(std::abs(pos - 0.4 * n), 1.0) << n;
    EXPECT_EQ(pos, PositiveCount(s));
  }
}

TEST(Synthetic, DirectionIsUnitLength) {
  const auto u = SignalDirection(4);
  ASSERT_EQ(u.size(), kEmbeddingDim);
  double norm = 0.0;
  for (float v : u) norm += static_cast<double>(v) * v;
  EXPECT_NEAR(norm, 1.0, 1e-5);
}

TEST(Synthetic, CohortStructure) {
  const SyntheticSpec spec = SmallSpec(5);
  const auto cohort = GenerateCohort(spec);
  ASSERT_EQ(cohort.size(), 12u);
  const auto u = SignalDirection(spec.seed);
  for (const auto& w : cohort) {
    const auto n = static_cast<int>(w.records.size());
    EXPECT_GE(n, spec.min_nodes);
    EXPECT_LE(n, spec.max_nodes);
    std::vector<GridCoord> tissue, region;
    for (std::size_t i = 0; i < w.records.size(); ++i) {
      tissue.push_back(w.records[i].coord);
      if (w.planted[i]) region.push_back(w.records[i].coord);
    }
    EXPECT_TRUE(FourConnected(tissue)) << w.wsi_id;
    if (w.label == 0) {
      EXPECT_TRUE(region.empty()) << w.wsi_id;
      continue;
    }
    EXPECT_TRUE(FourConnected(region)) << w.wsi_id;
    const double frac = static_cast<double>(region.size()) / n;
    EXPECT_GE(frac, spec.min_region_frac - 1.0 / n);
    EXPECT_LE(frac, spec.max_region_frac + 1.0 / n);
    // Planted patches project further along the signal direction on average.
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < w.records.size(); ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < kEmbeddingDim; ++k) dot += w.records[i].embedding[k] * u[k];
      (w.planted[i] ? in : out) += dot;
    }
    EXPECT_GT(in / region.size() - out / (n - region.size()), 0.5 * spec.delta);
  }
}

TEST(Synthetic, DeterministicGivenSeed) {
  const auto a = GenerateCohort(SmallSpec(6));
  const auto b = GenerateCohort(SmallSpec(6));
  const auto c = GenerateCohort(SmallSpec(7));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].records, b[i].records);
    EXPECT_EQ(a[i].planted, b[i].planted);
  }
  EXPECT_NE(a[0].records, c[0].records);
}

TEST(Synthetic, RegionFractionAtLeastOneIsConfigError) {
  SyntheticSpec s;
  s.max_region_frac = 1.0;
  try {
    s.Validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Synthetic, SpecKeyValuesRoundTrip) {
  SyntheticSpec s = SmallSpec(8);
  s.ulcer_profile = {0.25, 3.0, 2.5, 1.0};
  SyntheticSpec back;
  for (const auto& [k, v] : s.ToKeyValues()) EXPECT_TRUE(back.Set(k, v)) << k;
  EXPECT_EQ(back, s);
}

TEST(Synthetic, NullSpecCarriesNoSignal) {
  SyntheticSpec s = SmallSpec(9);
  s.delta = 0.0;
  s.informative_tissue = false;
  for (const auto& w : GenerateCohort(s)) {
    for (std::size_t i = 0; i < w.records.size(); ++i) {
      if (!w.planted[i]) continue;
      // A planted patch is drawn exactly like the background.
      const SyntheticWsi twin = GenerateWsi(s, std::stoi(w.wsi_id.substr(3)), w.label,
                                            SignalDirection(s.seed));
      EXPECT_EQ(twin.records[i], w.records[i]);
    }
  }
}

TEST(SyntheticDataset, FilesAreByteIdenticalAcrossRuns) {
  const fs::path root = fs::temp_directory_path() / "domaingcn_synth_test";
  fs::remove_all(root);
  const SyntheticSpec spec = SmallSpec(10);
  const DatasetManifest m1 = WriteSyntheticDataset(root / "a", spec);
  const DatasetManifest m2 = WriteSyntheticDataset(root / "b", spec);
  EXPECT_EQ(m1, m2);
  EXPECT_EQ(ReadAll(root / "a" / "manifest.csv"), ReadAll(root / "b" / "manifest.csv"));
  EXPECT_EQ(ReadAll(root / "a" / "planted.csv"), ReadAll(root / "b" / "planted.csv"));
  for (const auto& e : m1.entries) {
    EXPECT_EQ(ReadAll(m1.resolve(e)), ReadAll(m2.resolve(e))) << e.wsi_id;
  }
  EXPECT_EQ(m1.provenance.at("generator.seed"), "10");
  const DatasetManifest loaded = LoadManifest(root / "a" / "manifest.csv");
  EXPECT_EQ(loaded, m1);
  const PlantedRegions planted = LoadPlantedRegions(root / "a" / "planted.csv");
  for (const auto& e : m1.entries) EXPECT_EQ(planted.count(e.wsi_id) > 0, e.label == 1);
  fs::remove_all(root);
}
