#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "domaingcn/error.hpp"
#include "domaingcn/graph.hpp"

using namespace domaingcn;

namespace {

std::vector<GridCoord> RandomUniqueCoords(std::size_t n, int extent, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, extent - 1);
  std::set<GridCoord> seen;
  std::vector<GridCoord> out;
  while (out.size() < n) {
    GridCoord c{d(rng), d(rng)};
    if (seen.insert(c).second) out.push_back(c);
  }
  return out;
}

std::vector<Edge> BruteForceKnn(const std::vector<GridCoord>& coords, int k) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    std::vector<std::tuple<long long, int, int, std::size_t>> cand;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (j == i) continue;
      const long long dc = coords[j].col - coords[i].col;
      const long long dr = coords[j].row - coords[i].row;
      cand.emplace_back(dc * dc + dr * dr, coords[j].row, coords[j].col, j);
    }
    std::sort(cand.begin(), cand.end());
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
    for (std::size_t r = 0; r < take; ++r) edges.push_back({i, std::get<3>(cand[r])});
  }
  return edges;
}

std::vector<PatchRecord> GridRecords(int cols, int rows) {
  std::vector<PatchRecord> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      PatchRecord rec;
      rec.patch_id = "p" + std::to_string(out.size());
      rec.coord = {c, r};
      rec.embedding.assign(kEmbeddingDim, static_cast<float>(out.size()));
      out.push_back(rec);
    }
  }
  return out;
}

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kUsage;
}

}  // namespace

TEST(PatchGrid, ExactDivision) {
  const std::vector<PixelOrigin> origins = {{0, 0}, {1024, 512}};
  const auto grid = PatchGridFromCoords(origins, 512);
  EXPECT_EQ(grid[0], (GridCoord{0, 0}));
  EXPECT_EQ(grid[1], (GridCoord{2, 1}));
}

TEST(PatchGrid, IndivisibleOriginIsFormatError) {
  const std::vector<PixelOrigin> origins = {{100, 0}};
  EXPECT_EQ(KindOf([&] { PatchGridFromCoords(origins, 512); }), ErrorKind::kFormat);
}

TEST(Knn, SingleNodeHasNoEdges) {
  const std::vector<GridCoord> one = {{3, 4}};
  EXPECT_TRUE(KnnEdges(one, 8).empty());
}

TEST(Knn, CenterOfFullGridSeesAllEight) {
  std::vector<GridCoord> grid;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) grid.push_back({c, r});
  const auto edges = KnnEdges(grid, 8);
  std::set<std::size_t> center;
  for (const auto& e : edges)
    if (e.src == 4) center.insert(e.dst);
  EXPECT_EQ(center, (std::set<std::size_t>{0, 1, 2, 3, 5, 6, 7, 8}));
}

TEST(Knn, TwentyRandomPointsMatchBruteForce) {
  std::mt19937_64 rng(20);
  const auto coords = RandomUniqueCoords(20, 12, rng);
  EXPECT_EQ(KnnEdges(coords, 8), BruteForceKnn(coords, 8));
}

TEST(Knn, FiveHundredRandomSetsMatchBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(1, 60);
  std::uniform_int_distribution<int> kd(1, 10);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = size(rng);
    const int extent = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))) + 3;
    const auto coords = RandomUniqueCoords(n, extent, rng);
    const int k = kd(rng);
    ASSERT_EQ(KnnEdges(coords, k), BruteForceKnn(coords, k)) << "trial " << trial;
  }
}

TEST(Knn, DuplicateCoordinatesAreDataError) {
  const std::vector<GridCoord> coords = {{0, 0}, {1, 0}, {0, 0}};
  EXPECT_EQ(KindOf([&] { KnnEdges(coords, 2); }), ErrorKind::kData);
}

TEST(Knn, DistinctDistancesGiveOrderIndependentEdgeSets) {
  // Coordinates along a line with pairwise distances all distinct.
  const std::vector<GridCoord> coords = {{0, 0}, {1, 0}, {3, 0}, {7, 0}, {15, 0}, {31, 0}};
  std::vector<std::size_t> perm = {4, 2, 0, 5, 1, 3};
  std::vector<GridCoord> shuffled;
  for (std::size_t p : perm) shuffled.push_back(coords[p]);
  std::set<std::pair<GridCoord, GridCoord>> a, b;
  for (const auto& e : KnnEdges(coords, 2)) a.insert({coords[e.src], coords[e.dst]});
  for (const auto& e : KnnEdges(shuffled, 2)) b.insert({shuffled[e.src], shuffled[e.dst]});
  EXPECT_EQ(a, b);
}

TEST(Symmetrize, AddsReverseEdgesOnce) {
  const std::vector<Edge> edges = {{0, 1}, {1, 0}, {2, 0}};
  EXPECT_EQ(SymmetrizeEdges(edges), (std::vector<Edge>{{0, 1}, {0, 2}, {1, 0}, {2, 0}}));
}

TEST(PositionalEncoding, OriginAlternatesZeroOne) {
  const std::vector<GridCoord> origin = {{0, 0}};
  const Tensor pe = PositionalEncoding(origin, 32);
  for (int c = 0; c < 32; ++c) EXPECT_EQ(pe(0, c), c % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, Definition) {
  const std::vector<GridCoord> coords = {{1, 7}, {250, 3}};
  const Tensor pe = PositionalEncoding(coords, 32);
  EXPECT_NEAR(pe(0, 0), 0.841471, 1e-6);
  for (int i = 0; i < 2; ++i) {
    for (int t = 0; t < 8; ++t) {
      const double freq = std::pow(10000.0, -4.0 * t / 32.0);
      EXPECT_DOUBLE_EQ(pe(i, 2 * t), std::sin(coords[i].col * freq));
      EXPECT_DOUBLE_EQ(pe(i, 2 * t + 1), std::cos(coords[i].col * freq));
      EXPECT_DOUBLE_EQ(pe(i, 16 + 2 * t), std::sin(coords[i].row * freq));
      EXPECT_DOUBLE_EQ(pe(i, 16 + 2 * t + 1), std::cos(coords[i].row * freq));
    }
  }
}

TEST(PositionalEncoding, RangeAndInjectivity) {
  std::mt19937_64 rng(22);
  const auto coords = RandomUniqueCoords(2000, 10000, rng);
  const Tensor pe = PositionalEncoding(coords, 32);
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < pe.rows(); ++i) {
    rows.insert(std::vector<double>(pe.row(i).data(), pe.row(i).data() + pe.cols()));
  }
  EXPECT_EQ(rows.size(), coords.size());
}

TEST(PositionalEncoding, DimensionMustBeMultipleOfFour) {
  const std::vector<GridCoord> origin = {{0, 0}};
  EXPECT_EQ(KindOf([&] { PositionalEncoding(origin, 30); }), ErrorKind::kConfig);
}

TEST(AssembleGraph, SingleRecord) {
  const auto recs = GridRecords(1, 1);
  const auto g = AssembleGraph("w", recs, 1, {1});
  EXPECT_EQ(g.num_nodes(), 1u);
  EXPECT_TRUE(g.edges.empty());
}

TEST(AssembleGraph, ThreeByThreeGridHasEightEdgesPerNode) {
  const auto recs = GridRecords(3, 3);
  const auto g = AssembleGraph("w", recs, 0, std::vector<int>(9, 1));
  EXPECT_EQ(g.num_nodes(), 9u);
  EXPECT_EQ(g.edges.size(), 72u);
  EXPECT_EQ(g.node_features.rows(), 9);
  EXPECT_EQ(g.node_features.cols(), static_cast<Eigen::Index>(kEmbeddingDim));
  EXPECT_EQ(g.positional.cols(), 32);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(g.node_features(i, 0), static_cast<double>(i));
  EXPECT_NO_THROW(ValidateGraph(g));
}

TEST(AssembleGraph, WeightLengthMismatchIsContractViolation) {
  const auto recs = GridRecords(2, 2);
  EXPECT_EQ(KindOf([&] { AssembleGraph("w", recs, 0, {1, 1}); }), ErrorKind::kContract);
}

TEST(ValidateGraph, RejectsBrokenGraphs) {
  const auto recs = GridRecords(2, 2);
  const auto good = AssembleGraph("w", recs, 0, std::vector<int>(4, 1));
  auto self_edge = good;
  self_edge.edges.push_back({1, 1});
  EXPECT_EQ(KindOf([&] { ValidateGraph(self_edge); }), ErrorKind::kData);
  auto bad_weight = good;
  bad_weight.node_weights[0] = 0;
  EXPECT_EQ(KindOf([&] { ValidateGraph(bad_weight); }), ErrorKind::kData);
  auto out_of_range = good;
  out_of_range.edges.push_back({0, 9});
  EXPECT_EQ(KindOf([&] { ValidateGraph(out_of_range); }), ErrorKind::kData);
}
