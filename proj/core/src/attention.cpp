#include "domaingcn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

std::size_t MaskSize(std::size_t n, double q) {
  if (!(q > 0.0 && q <= 1.0)) Fail(ErrorKind::kConfig, "mask quantile must lie in (0, 1]");
  const auto size = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  return std::min(n, size);
}

std::vector<bool> TopQuantileMask(std::span<const double> scores,
                                  std::span<const GridCoord> coords, double q) {
  if (scores.size() != coords.size()) {
    Fail(ErrorKind::kContract, "attention mask: " + std::to_string(scores.size()) +
                                   " scores for " + std::to_string(coords.size()) + " patches");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (coords[a].row != coords[b].row) return coords[a].row < coords[b].row;
    return coords[a].col < coords[b].col;
  });
  std::vector<bool> mask(scores.size(), false);
  const std::size_t k = MaskSize(scores.size(), q);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
  return mask;
}

double Dice(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) {
    Fail(ErrorKind::kContract, "dice: sets over " + std::to_string(a.size()) + " and " +
                                   std::to_string(b.size()) + " elements");
  }
  std::size_t both = 0;
  std::size_t na = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    both += a[i] && b[i];
  }
  return na + nb == 0 ? 0.0 : 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

AttentionMap BuildAttentionMap(const WsiGraph& graph, std::span<const double> scores, double q) {
  const std::size_t n = graph.num_nodes();
  if (scores.size() != n) {
    Fail(ErrorKind::kContract, "attention export: " + std::to_string(scores.size()) +
                                   " scores for " + std::to_string(n) + " patches");
  }
  const std::vector<bool> mask = TopQuantileMask(scores, graph.coords, q);
  AttentionMap map;
  map.wsi_id = graph.wsi_id;
  for (std::size_t i = 0; i < n; ++i) {
    map.entries.push_back({graph.patch_ids[i], graph.coords[i], scores[i],
                           graph.node_weights.empty() ? 1 : graph.node_weights[i], mask[i]});
  }
  return map;
}

void WriteAttentionTable(std::ostream& out, const AttentionMap& map) {
  out << "# wsi_id = " << map.wsi_id << '\n';
  out << "patch_id,col,row,attention,ulcer_weight,in_mask\n";
  for (const AttentionEntry& e : map.entries) {
    out << e.patch_id << ',' << e.coord.col << ',' << e.coord.row << ','
        << FormatDouble(e.attention) << ',' << e.ulcer_weight << ',' << (e.in_mask ? 1 : 0)
        << '\n';
  }
}

AttentionMap ReadAttentionTable(std::istream& in, const std::string& source) {
  AttentionMap map;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  const auto fail = [&](const std::string& message) {
    Fail(ErrorKind::kFormat, source + ":" + std::to_string(number) + ": " + message);
  };
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = Trim(std::string_view(line).substr(1));
      if (body.rfind("wsi_id", 0) == 0) {
        const auto eq = body.find('=');
        if (eq != std::string_view::npos) map.wsi_id = std::string(Trim(body.substr(eq + 1)));
      }
      continue;
    }
    if (!header) {
      if (line != "patch_id,col,row,attention,ulcer_weight,in_mask") fail("unexpected header");
      header = true;
      continue;
    }
    const auto c = Split(line, ',');
    if (c.size() != 6) fail("expected 6 columns, found " + std::to_string(c.size()));
    const auto col = ParseInt(c[1]);
    const auto row = ParseInt(c[2]);
    const auto score = ParseDouble(c[3]);
    const auto weight = ParseInt(c[4]);
    const auto mask = ParseInt(c[5]);
    if (!col || !row || !score || !weight || !mask || (*mask != 0 && *mask != 1)) {
      fail("malformed attention row");
    }
    map.entries.push_back({std::string(c[0]), {static_cast<int>(*col), static_cast<int>(*row)},
                           *score, static_cast<int>(*weight), *mask == 1});
  }
  if (!header) Fail(ErrorKind::kFormat, source + ": missing attention table header");
  return map;
}

void WriteAttentionRaster(std::ostream& out, const AttentionMap& map) {
  if (map.entries.empty()) Fail(ErrorKind::kContract, "attention raster: no patches");
  int min_col = map.entries[0].coord.col, max_col = min_col;
  int min_row = map.entries[0].coord.row, max_row = min_row;
  double max_score = 0.0;
  for (const AttentionEntry& e : map.entries) {
    min_col = std::min(min_col, e.coord.col);
    max_col = std::max(max_col, e.coord.col);
    min_row = std::min(min_row, e.coord.row);
    max_row = std::max(max_row, e.coord.row);
    max_score = std::max(max_score, e.attention);
  }
  const int width = max_col - min_col + 1;
  const int height = max_row - min_row + 1;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t p = 0; p < pixels.size(); p += 3) {
    pixels[p] = 0;
    pixels[p + 1] = 0;
    pixels[p + 2] = 64;
  }
  std::set<GridCoord> masked;
  for (const AttentionEntry& e : map.entries) {
    if (e.in_mask) masked.insert(e.coord);
  }
  for (const AttentionEntry& e : map.entries) {
    const std::size_t p =
        3 * (static_cast<std::size_t>(e.coord.row - min_row) * width + (e.coord.col - min_col));
    bool boundary = false;
    if (e.in_mask) {
      const GridCoord around[4] = {{e.coord.col + 1, e.coord.row},
                                   {e.coord.col - 1, e.coord.row},
                                   {e.coord.col, e.coord.row + 1},
                                   {e.coord.col, e.coord.row - 1}};
      for (const GridCoord& n : around) boundary = boundary || masked.count(n) == 0;
    }
    if (boundary) {
      pixels[p] = 255;
      pixels[p + 1] = 0;
      pixels[p + 2] = 0;
    } else {
      const double level = max_score > 0.0 ? e.attention / max_score : 0.0;
      const auto v = static_cast<unsigned char>(std::lround(std::clamp(level, 0.0, 1.0) * 255.0));
      pixels[p] = pixels[p + 1] = pixels[p + 2] = v;
    }
  }
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void ExportAttention(const std::filesystem::path& prefix, const AttentionMap& map) {
  for (const char* ext : {".csv", ".ppm"}) {
    const std::filesystem::path path = prefix.string() + ext;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
    if (std::string(ext) == ".csv") {
      WriteAttentionTable(out, map);
    } else {
      WriteAttentionRaster(out, map);
    }
    out.flush();
    if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
  }
}

}  // namespace domaingcn
