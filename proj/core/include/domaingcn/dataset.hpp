#pragma once

// Dataset-level helpers tying the file formats to graphs.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "domaingcn/domain_weights.hpp"
#include "domaingcn/io.hpp"
#include "domaingcn/model.hpp"
#include "domaingcn/synthetic.hpp"

namespace domaingcn {

WsiGraph GraphFromRecords(const std::string& wsi_id, int label,
                          std::span<const PatchRecord> records, const HyperParams& hyper,
                          const WeightRule& rule);

// Loads every patch table of the manifest and assembles its graph.
std::vector<WsiGraph> LoadCohortGraphs(const DatasetManifest& manifest, const HyperParams& hyper,
                                       const WeightRule& rule);

// Writes <dir>/manifest.csv, <dir>/tables/<wsi_id>.csv and
// <dir>/planted.csv (wsi_id,patch_id of every planted patch). The manifest
// records the generator settings as provenance.
DatasetManifest WriteSyntheticDataset(const std::filesystem::path& dir,
                                      const SyntheticSpec& spec);

using PlantedRegions = std::map<std::string, std::set<std::string>>;
PlantedRegions LoadPlantedRegions(const std::filesystem::path& path);

// Graph files listed in a manifest-style index (wsi_id,label,path).
void SaveGraphCollection(const std::filesystem::path& dir, const std::vector<WsiGraph>& graphs);
std::vector<WsiGraph> LoadGraphCollection(const std::filesystem::path& index);

}  // namespace domaingcn
