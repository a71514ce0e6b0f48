#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "domaingcn/autodiff.hpp"

namespace domaingcn {

inline constexpr std::size_t kEmbeddingDim = 1024;

struct GridCoord {
  int col = 0;
  int row = 0;
  friend auto operator<=>(const GridCoord&, const GridCoord&) = default;
};

struct PixelOrigin {
  long long x_px = 0;
  long long y_px = 0;
};

// Tissue-class probabilities from the upstream patch classifier.
struct TissueProbs {
  double epithelium = 0.0;
  double lymphocyte = 0.0;
  double debris = 0.0;
  friend bool operator==(const TissueProbs&, const TissueProbs&) = default;
};

struct PatchRecord {
  std::string patch_id;
  GridCoord coord;
  std::vector<float> embedding;  // kEmbeddingDim entries
  TissueProbs tissue;
  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

// Directed edge: dst is one of src's nearest neighbors, so messages flow
// dst -> src during aggregation.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct GraphOptions {
  int k_neighbors = 8;
  int pe_dim = 32;
  bool symmetrize_edges = false;
  bool pe_normalized = false;
};

struct WsiGraph {
  std::string wsi_id;
  std::vector<std::string> patch_ids;
  std::vector<GridCoord> coords;
  Tensor node_features;  // N x kEmbeddingDim
  Tensor positional;     // N x pe_dim
  std::vector<Edge> edges;
  std::vector<int> node_weights;
  int label = 0;

  std::size_t num_nodes() const { return coords.size(); }
  friend bool operator==(const WsiGraph&, const WsiGraph&) = default;
};

// Converts pixel origins of non-overlapping patches to grid indices. Origins
// must be nonnegative multiples of the patch size.
std::vector<GridCoord> PatchGridFromCoords(std::span<const PixelOrigin> origins,
                                           long long patch_size_px,
                                           std::span<const std::string> patch_ids = {});

// For every node, edges to its min(k, N-1) nearest other nodes by squared
// Euclidean grid distance. Ties break on (distance, row, col). Output is
// grouped by src in ascending order and, within a src, by neighbor rank.
std::vector<Edge> KnnEdges(std::span<const GridCoord> coords, int k);

// Adds the reverse of every edge and removes duplicates; sorted by (src, dst).
std::vector<Edge> SymmetrizeEdges(std::span<const Edge> edges);

// Sinusoidal encoding: the first dim/2 channels encode col, the rest row.
// For pair t: sin(p / 10000^(4t/dim)), cos(p / 10000^(4t/dim)).
Tensor PositionalEncoding(std::span<const GridCoord> coords, int dim, bool normalized = false);

WsiGraph AssembleGraph(std::string wsi_id, std::span<const PatchRecord> records, int label,
                       std::vector<int> node_weights, const GraphOptions& options = {});

// Checks structural invariants of a graph read from outside; throws a data
// error on the first violation.
void ValidateGraph(const WsiGraph& graph);

}  // namespace domaingcn
