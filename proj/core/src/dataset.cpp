#include "domaingcn/dataset.hpp"

#include <fstream>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

namespace fs = std::filesystem;

WsiGraph GraphFromRecords(const std::string& wsi_id, int label,
                          std::span<const PatchRecord> records, const HyperParams& hyper,
                          const WeightRule& rule) {
  return AssembleGraph(wsi_id, records, label, UlcerWeights(records, rule),
                       hyper.graph_options());
}

std::vector<WsiGraph> LoadCohortGraphs(const DatasetManifest& manifest, const HyperParams& hyper,
                                       const WeightRule& rule) {
  std::vector<WsiGraph> graphs;
  graphs.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    const std::vector<PatchRecord> records = LoadPatchTable(manifest.resolve(e));
    graphs.push_back(GraphFromRecords(e.wsi_id, e.label, records, hyper, rule));
  }
  return graphs;
}

DatasetManifest WriteSyntheticDataset(const fs::path& dir, const SyntheticSpec& spec) {
  spec.Validate();
  fs::create_directories(dir / "tables");
  const std::vector<int> labels = GenerateLabels(spec);
  const std::vector<float> direction = SignalDirection(spec.seed);

  DatasetManifest manifest;
  manifest.base_dir = dir;
  for (const auto& [key, value] : spec.ToKeyValues()) manifest.provenance["generator." + key] = value;

  const fs::path planted_path = dir / "planted.csv";
  std::ofstream planted(planted_path, std::ios::binary | std::ios::trunc);
  if (!planted) Fail(ErrorKind::kIo, "cannot open " + planted_path.string() + " for writing");
  planted << "wsi_id,patch_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const SyntheticWsi wsi = GenerateWsi(spec, static_cast<int>(i), labels[i], direction);
    const std::string rel = "tables/" + wsi.wsi_id + ".csv";
    SavePatchTable(dir / rel, wsi.records);
    manifest.entries.push_back({wsi.wsi_id, wsi.label, rel});
    for (std::size_t p = 0; p < wsi.records.size(); ++p) {
      if (wsi.planted[p]) planted << wsi.wsi_id << ',' << wsi.records[p].patch_id << '\n';
    }
  }
  planted.flush();
  if (!planted) Fail(ErrorKind::kIo, "write failed for " + planted_path.string());
  SaveManifest(dir / "manifest.csv", manifest);
  return manifest;
}

PlantedRegions LoadPlantedRegions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for reading");
  PlantedRegions regions;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1) {
      if (line != "wsi_id,patch_id") {
        Fail(ErrorKind::kFormat, path.string() + ":1: expected header 'wsi_id,patch_id'");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto c = Split(line, ',');
    if (c.size() != 2) {
      Fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(number) +
                                   ": expected 2 columns");
    }
    regions[std::string(c[0])].insert(std::string(c[1]));
  }
  return regions;
}

void SaveGraphCollection(const fs::path& dir, const std::vector<WsiGraph>& graphs) {
  fs::create_directories(dir);
  DatasetManifest index;
  index.base_dir = dir;
  for (const WsiGraph& g : graphs) {
    const std::string rel = g.wsi_id + ".graph";
    SaveGraph(dir / rel, g);
    index.entries.push_back({g.wsi_id, g.label, rel});
  }
  SaveManifest(dir / "graphs.csv", index);
}

std::vector<WsiGraph> LoadGraphCollection(const fs::path& index_path) {
  const DatasetManifest index = LoadManifest(index_path);
  std::vector<WsiGraph> graphs;
  for (const ManifestEntry& e : index.entries) {
    WsiGraph g = LoadGraph(index.resolve(e));
    if (g.wsi_id != e.wsi_id || g.label != e.label) {
      Fail(ErrorKind::kData, index_path.string() + ": entry " + e.wsi_id +
                                 " does not match the graph file it names");
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace domaingcn
