#pragma once

// Text file formats: patch tables, dataset manifests, serialized graphs,
// checkpoints and fold reports. Every writer's output reads back to an
// identical value.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "domaingcn/graph.hpp"
#include "domaingcn/model.hpp"
#include "domaingcn/training.hpp"

namespace domaingcn {

// Patch table: comma-separated, header
//   patch_id,col,row,p_epithelium,p_lymphocyte,p_debris,f0,...,f1023
// col and row are nonnegative grid indices, probabilities lie in [0, 1],
// features are finite. patch_id is nonempty without commas or whitespace.
// (col, row) and patch_id are unique. Violations raise a format error
// "<source>:<line>: ...".
std::vector<PatchRecord> ReadPatchTable(std::istream& in, const std::string& source);
std::vector<PatchRecord> LoadPatchTable(const std::filesystem::path& path);
void WritePatchTable(std::ostream& out, std::span<const PatchRecord> records);
void SavePatchTable(const std::filesystem::path& path, std::span<const PatchRecord> records);

struct ManifestEntry {
  std::string wsi_id;
  int label = 0;
  std::string path;  // as written; relative paths resolve against the manifest
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Header "wsi_id,label,path". Lines "# key = value" before the header hold
// generator provenance.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::string> provenance;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.entries == b.entries && a.provenance == b.provenance;
  }
};

// Checks unique ids, labels in {0, 1} and that every table exists.
DatasetManifest ReadManifest(std::istream& in, const std::string& source,
                             const std::filesystem::path& base_dir);
DatasetManifest LoadManifest(const std::filesystem::path& path);
void WriteManifest(std::ostream& out, const DatasetManifest& manifest);
void SaveManifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// "dgcn-graph 1" text format.
void WriteGraph(std::ostream& out, const WsiGraph& graph);
WsiGraph ReadGraph(std::istream& in, const std::string& source);
void SaveGraph(const std::filesystem::path& path, const WsiGraph& graph);
WsiGraph LoadGraph(const std::filesystem::path& path);

// "dgcn-checkpoint 1": hyperparameters followed by every parameter matrix.
struct Checkpoint {
  HyperParams hyper;
  ModelParams params;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};
void WriteCheckpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint ReadCheckpoint(std::istream& in, const std::string& source);
void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Fold reports. The table is tab-separated with one row per fold and rows
// "mean" and "sd"; the curve table lists fold, epoch, train_loss, val_loss.
// The summary is a human-readable rendering of the same numbers.
void WriteFoldTable(std::ostream& out, const FoldReport& report);
void WriteCurveTable(std::ostream& out, const FoldReport& report);
void WriteReportSummary(std::ostream& out, const FoldReport& report);
FoldReport ReadFoldReport(std::istream& fold_table, std::istream& curve_table,
                          const std::string& source);

// Writes <dir>/report.txt, <dir>/folds.tsv and <dir>/curves.tsv.
void SaveFoldReport(const std::filesystem::path& dir, const FoldReport& report);
FoldReport LoadFoldReport(const std::filesystem::path& dir);

}  // namespace domaingcn
