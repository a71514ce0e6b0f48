#pragma once

// Attention maps: per-patch scores with the top-quantile mask, written as a
// table and as a one-pixel-per-patch PPM raster.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "domaingcn/graph.hpp"

namespace domaingcn {

// ceil(q * n) for n >= 1.
std::size_t MaskSize(std::size_t n, double q = 0.25);

// The MaskSize(n, q) patches with the highest scores; ties are ordered by
// row, then col.
std::vector<bool> TopQuantileMask(std::span<const double> scores,
                                  std::span<const GridCoord> coords, double q = 0.25);

// 2|A and B| / (|A| + |B|); 0 when both are empty.
double Dice(const std::vector<bool>& a, const std::vector<bool>& b);

struct AttentionEntry {
  std::string patch_id;
  GridCoord coord;
  double attention = 0.0;
  int ulcer_weight = 1;
  bool in_mask = false;
  friend bool operator==(const AttentionEntry&, const AttentionEntry&) = default;
};

struct AttentionMap {
  std::string wsi_id;
  std::vector<AttentionEntry> entries;
  friend bool operator==(const AttentionMap&, const AttentionMap&) = default;
};

AttentionMap BuildAttentionMap(const WsiGraph& graph, std::span<const double> scores,
                               double q = 0.25);

// Header "patch_id,col,row,attention,ulcer_weight,in_mask"; a leading
// "# wsi_id = <id>" line names the slide.
void WriteAttentionTable(std::ostream& out, const AttentionMap& map);
AttentionMap ReadAttentionTable(std::istream& in, const std::string& source);

// Binary PPM over the bounding box of the patches. Attention maps to gray
// levels relative to the maximum score, cells without a patch are dark blue
// and masked patches on the mask boundary are red.
void WriteAttentionRaster(std::ostream& out, const AttentionMap& map);

// Writes <prefix>.csv and <prefix>.ppm.
void ExportAttention(const std::filesystem::path& prefix, const AttentionMap& map);

}  // namespace domaingcn
