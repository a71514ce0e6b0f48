#include "domaingcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "domaingcn/error.hpp"

namespace domaingcn {

namespace {

std::string CoordString(const GridCoord& c) {
  return "(" + std::to_string(c.col) + "," + std::to_string(c.row) + ")";
}

long long SquaredDistance(const GridCoord& a, const GridCoord& b) {
  const long long dc = static_cast<long long>(a.col) - b.col;
  const long long dr = static_cast<long long>(a.row) - b.row;
  return dc * dc + dr * dr;
}

struct Candidate {
  long long dist2;
  int row;
  int col;
  std::size_t index;

  bool operator<(const Candidate& o) const {
    return std::tie(dist2, row, col, index) < std::tie(o.dist2, o.row, o.col, o.index);
  }
};

void RejectDuplicates(std::span<const GridCoord> coords) {
  std::map<GridCoord, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < coords.size(); ++i) seen[coords[i]].push_back(i);
  std::ostringstream dups;
  bool any = false;
  for (const auto& [coord, idx] : seen) {
    if (idx.size() < 2) continue;
    dups << (any ? "; " : "") << CoordString(coord) << " at nodes";
    for (std::size_t i : idx) dups << " " << i;
    any = true;
  }
  if (any) Fail(ErrorKind::kData, "duplicate patch coordinates: " + dups.str());
}

void BruteForceNeighbors(std::span<const GridCoord> coords, std::size_t i, std::size_t kk,
                         std::vector<Candidate>& scratch, std::vector<Edge>& out) {
  scratch.clear();
  for (std::size_t j = 0; j < coords.size(); ++j) {
    if (j == i) continue;
    scratch.push_back({SquaredDistance(coords[i], coords[j]), coords[j].row, coords[j].col, j});
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk),
                    scratch.end());
  for (std::size_t t = 0; t < kk; ++t) out.push_back({i, scratch[t].index});
}

// Ring search over a dense occupancy grid. Every cell at Chebyshev radius R
// lies at Euclidean distance >= R, so once the k-th best squared distance is
// below (R+1)^2 no unvisited cell can enter or tie into the result.
class OccupancyGrid {
 public:
  OccupancyGrid(std::span<const GridCoord> coords, int min_col, int min_row, int width,
                int height)
      : min_col_(min_col),
        min_row_(min_row),
        width_(width),
        height_(height),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), -1) {
    for (std::size_t i = 0; i < coords.size(); ++i) {
      cells_[Offset(coords[i].col - min_col_, coords[i].row - min_row_)] =
          static_cast<long long>(i);
    }
  }

  void Neighbors(std::span<const GridCoord> coords, std::size_t i, std::size_t kk,
                 std::vector<Candidate>& found, std::vector<Edge>& out) const {
    found.clear();
    const int c0 = coords[i].col - min_col_;
    const int r0 = coords[i].row - min_row_;
    const int max_radius = std::max(width_, height_);
    for (int radius = 1; radius <= max_radius; ++radius) {
      const auto visit = [&](int c, int r) {
        if (c < 0 || r < 0 || c >= width_ || r >= height_) return;
        const long long j = cells_[Offset(c, r)];
        if (j < 0) return;
        const auto& cj = coords[static_cast<std::size_t>(j)];
        found.push_back({SquaredDistance(coords[i], cj), cj.row, cj.col,
                         static_cast<std::size_t>(j)});
      };
      for (int c = c0 - radius; c <= c0 + radius; ++c) {
        visit(c, r0 - radius);
        visit(c, r0 + radius);
      }
      for (int r = r0 - radius + 1; r <= r0 + radius - 1; ++r) {
        visit(c0 - radius, r);
        visit(c0 + radius, r);
      }
      if (found.size() >= kk) {
        std::sort(found.begin(), found.end());
        const long long bound = static_cast<long long>(radius + 1) * (radius + 1);
        if (found[kk - 1].dist2 < bound) break;
      }
    }
    std::sort(found.begin(), found.end());
    for (std::size_t t = 0; t < kk; ++t) out.push_back({i, found[t].index});
  }

 private:
  std::size_t Offset(int c, int r) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c);
  }

  int min_col_;
  int min_row_;
  int width_;
  int height_;
  std::vector<long long> cells_;
};

}  // namespace

std::vector<GridCoord> PatchGridFromCoords(std::span<const PixelOrigin> origins,
                                           long long patch_size_px,
                                           std::span<const std::string> patch_ids) {
  if (patch_size_px <= 0) {
    Fail(ErrorKind::kConfig, "patch size must be positive, got " + std::to_string(patch_size_px));
  }
  std::vector<GridCoord> out;
  out.reserve(origins.size());
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto& o = origins[i];
    if (o.x_px < 0 || o.y_px < 0 || o.x_px % patch_size_px != 0 || o.y_px % patch_size_px != 0) {
      const std::string name = i < patch_ids.size() ? patch_ids[i] : "#" + std::to_string(i);
      Fail(ErrorKind::kFormat, "patch " + name + " origin (" + std::to_string(o.x_px) + "," +
                                   std::to_string(o.y_px) + ") is not a nonnegative multiple of " +
                                   std::to_string(patch_size_px));
    }
    out.push_back({static_cast<int>(o.x_px / patch_size_px),
                   static_cast<int>(o.y_px / patch_size_px)});
  }
  return out;
}

std::vector<Edge> KnnEdges(std::span<const GridCoord> coords, int k) {
  if (coords.empty()) Fail(ErrorKind::kContract, "knn_edges: no nodes");
  if (k < 1) Fail(ErrorKind::kConfig, "knn_edges: k must be >= 1, got " + std::to_string(k));
  RejectDuplicates(coords);

  const std::size_t n = coords.size();
  const std::size_t kk = std::min(static_cast<std::size_t>(k), n - 1);
  std::vector<Edge> edges;
  edges.reserve(n * kk);
  if (kk == 0) return edges;

  int min_col = coords[0].col, max_col = coords[0].col;
  int min_row = coords[0].row, max_row = coords[0].row;
  for (const auto& c : coords) {
    min_col = std::min(min_col, c.col);
    max_col = std::max(max_col, c.col);
    min_row = std::min(min_row, c.row);
    max_row = std::max(max_row, c.row);
  }
  const long long width = static_cast<long long>(max_col) - min_col + 1;
  const long long height = static_cast<long long>(max_row) - min_row + 1;
  std::vector<Candidate> scratch;
  if (width * height <= 64 * static_cast<long long>(n) + 1024) {
    OccupancyGrid grid(coords, min_col, min_row, static_cast<int>(width),
                       static_cast<int>(height));
    for (std::size_t i = 0; i < n; ++i) grid.Neighbors(coords, i, kk, scratch, edges);
  } else {
    for (std::size_t i = 0; i < n; ++i) BruteForceNeighbors(coords, i, kk, scratch, edges);
  }
  return edges;
}

std::vector<Edge> SymmetrizeEdges(std::span<const Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size() * 2);
  for (const Edge& e : edges) {
    out.push_back(e);
    out.push_back({e.dst, e.src});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Tensor PositionalEncoding(std::span<const GridCoord> coords, int dim, bool normalized) {
  if (dim <= 0 || dim % 4 != 0) {
    Fail(ErrorKind::kConfig,
         "positional encoding dim must be a positive multiple of 4, got " + std::to_string(dim));
  }
  const int half = dim / 2;
  const int pairs = dim / 4;
  std::vector<double> inv_freq(static_cast<std::size_t>(pairs));
  for (int t = 0; t < pairs; ++t) {
    inv_freq[static_cast<std::size_t>(t)] =
        1.0 / std::pow(10000.0, 4.0 * t / static_cast<double>(dim));
  }

  double col_min = 0, col_span = 1, row_min = 0, row_span = 1;
  if (normalized && !coords.empty()) {
    auto [cmin, cmax] = std::minmax_element(coords.begin(), coords.end(),
                                            [](auto& a, auto& b) { return a.col < b.col; });
    auto [rmin, rmax] = std::minmax_element(coords.begin(), coords.end(),
                                            [](auto& a, auto& b) { return a.row < b.row; });
    col_min = cmin->col;
    row_min = rmin->row;
    col_span = std::max(1, cmax->col - cmin->col);
    row_span = std::max(1, rmax->row - rmin->row);
  }

  Tensor pe(static_cast<Eigen::Index>(coords.size()), dim);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double axis[2] = {(coords[i].col - col_min) / col_span,
                            (coords[i].row - row_min) / row_span};
    for (int a = 0; a < 2; ++a) {
      for (int t = 0; t < pairs; ++t) {
        const double angle = axis[a] * inv_freq[static_cast<std::size_t>(t)];
        pe(row, a * half + 2 * t) = std::sin(angle);
        pe(row, a * half + 2 * t + 1) = std::cos(angle);
      }
    }
  }
  return pe;
}

WsiGraph AssembleGraph(std::string wsi_id, std::span<const PatchRecord> records, int label,
                       std::vector<int> node_weights, const GraphOptions& options) {
  if (records.empty()) Fail(ErrorKind::kData, "wsi " + wsi_id + " has no patches");
  if (node_weights.size() != records.size()) {
    Fail(ErrorKind::kContract, "wsi " + wsi_id + ": " + std::to_string(node_weights.size()) +
                                   " weights for " + std::to_string(records.size()) + " patches");
  }
  if (label != 0 && label != 1) {
    Fail(ErrorKind::kData, "wsi " + wsi_id + ": label must be 0 or 1, got " +
                               std::to_string(label));
  }
  WsiGraph g;
  g.wsi_id = std::move(wsi_id);
  g.label = label;
  g.node_weights = std::move(node_weights);
  const auto n = static_cast<Eigen::Index>(records.size());
  g.node_features.resize(n, static_cast<Eigen::Index>(kEmbeddingDim));
  g.patch_ids.reserve(records.size());
  g.coords.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.embedding.size() != kEmbeddingDim) {
      Fail(ErrorKind::kData, "patch " + rec.patch_id + ": embedding has " +
                                 std::to_string(rec.embedding.size()) + " values, expected " +
                                 std::to_string(kEmbeddingDim));
    }
    g.patch_ids.push_back(rec.patch_id);
    g.coords.push_back(rec.coord);
    g.node_features.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(rec.embedding.data(),
                                             static_cast<Eigen::Index>(kEmbeddingDim))
            .cast<double>();
  }
  g.positional = PositionalEncoding(g.coords, options.pe_dim, options.pe_normalized);
  g.edges = KnnEdges(g.coords, options.k_neighbors);
  if (options.symmetrize_edges) g.edges = SymmetrizeEdges(g.edges);
  return g;
}

void ValidateGraph(const WsiGraph& g) {
  const std::size_t n = g.num_nodes();
  const std::string where = "graph " + g.wsi_id + ": ";
  if (n == 0) Fail(ErrorKind::kData, where + "no nodes");
  if (g.patch_ids.size() != n || g.node_weights.size() != n ||
      static_cast<std::size_t>(g.node_features.rows()) != n ||
      static_cast<std::size_t>(g.positional.rows()) != n) {
    Fail(ErrorKind::kData, where + "per-node arrays disagree on node count");
  }
  if (g.node_features.cols() != static_cast<Eigen::Index>(kEmbeddingDim)) {
    Fail(ErrorKind::kData, where + "node features have " +
                               std::to_string(g.node_features.cols()) + " columns");
  }
  if (g.label != 0 && g.label != 1) Fail(ErrorKind::kData, where + "label must be 0 or 1");
  for (int w : g.node_weights) {
    if (w < 1) Fail(ErrorKind::kData, where + "node weight " + std::to_string(w) + " < 1");
  }
  std::vector<Edge> sorted = g.edges;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t e = 0; e < sorted.size(); ++e) {
    const Edge& edge = sorted[e];
    if (edge.src >= n || edge.dst >= n) Fail(ErrorKind::kData, where + "edge out of range");
    if (edge.src == edge.dst) Fail(ErrorKind::kData, where + "self edge at node " +
                                                         std::to_string(edge.src));
    if (e > 0 && sorted[e - 1] == edge) {
      Fail(ErrorKind::kData, where + "duplicate edge " + std::to_string(edge.src) + "->" +
                                 std::to_string(edge.dst));
    }
  }
}

}  // namespace domaingcn
