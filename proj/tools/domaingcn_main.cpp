#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "domaingcn/attention.hpp"
#include "domaingcn/audit.hpp"
#include "domaingcn/config.hpp"
#include "domaingcn/dataset.hpp"
#include "domaingcn/domain_weights.hpp"
#include "domaingcn/error.hpp"
#include "domaingcn/io.hpp"
#include "domaingcn/runtime.hpp"
#include "domaingcn/text_format.hpp"
#include "domaingcn/training.hpp"

namespace fs = std::filesystem;
using namespace domaingcn;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> assignments;

  void Attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "Configuration file (key = value lines)");
    app->add_option("-s,--set", assignments, "Override a configuration key: key=value")
        ->allow_extra_args(false);
  }

  RunConfig Resolve() const {
    RunConfig config;
    if (!config_path.empty()) LoadConfig(config_path, config);
    for (const std::string& a : assignments) config.SetAssignment(a);
    config.Validate();
    return config;
  }
};

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<WsiGraph> LoadInputs(const std::string& manifest, const std::string& graphs,
                                 const RunConfig& config) {
  if (manifest.empty() == graphs.empty()) {
    Fail(ErrorKind::kUsage, "give exactly one of --manifest or --graphs");
  }
  if (!graphs.empty()) return LoadGraphCollection(graphs);
  return LoadCohortGraphs(LoadManifest(manifest), config.hyper, config.rule);
}

int RunGenerate(const CommonOptions& common, const std::string& out) {
  const RunConfig config = common.Resolve();
  const DatasetManifest m = WriteSyntheticDataset(out, config.synthetic);
  int positives = 0;
  for (const ManifestEntry& e : m.entries) positives += e.label;
  std::cout << "wrote " << m.entries.size() << " WSIs (" << positives << " positive) to "
            << out << "\n";
  return 0;
}

int RunBuildGraphs(const CommonOptions& common, const std::string& manifest,
                   const std::string& out) {
  const RunConfig config = common.Resolve();
  const std::vector<WsiGraph> graphs =
      LoadCohortGraphs(LoadManifest(manifest), config.hyper, config.rule);
  SaveGraphCollection(out, graphs);
  std::size_t nodes = 0;
  std::size_t edges = 0;
  for (const WsiGraph& g : graphs) {
    nodes += g.num_nodes();
    edges += g.edges.size();
  }
  std::cout << "wrote " << graphs.size() << " graphs (" << nodes << " nodes, " << edges
            << " edges) to " << (fs::path(out) / "graphs.csv").string() << "\n";
  return 0;
}

int RunWeightsStats(const CommonOptions& common, const std::string& manifest,
                    const std::string& graphs_index, int threshold, const std::string& out) {
  const RunConfig config = common.Resolve();
  const std::vector<WsiGraph> graphs = LoadInputs(manifest, graphs_index, config);
  const HighWeightStats s = HighWeightFraction(graphs, threshold);
  std::cout << "high-weight threshold: " << threshold << "\n"
            << "median fraction, non-ulcer: " << FormatDouble(s.median_non_ulcer) << "\n"
            << "median fraction, ulcer: " << FormatDouble(s.median_ulcer) << "\n"
            << "rank-sum U: " << FormatDouble(s.test.u_statistic)
            << "  z: " << FormatDouble(s.test.z) << "  p: " << FormatDouble(s.test.p_value)
            << "\n";
  if (!out.empty()) {
    std::string text = "wsi_id\tlabel\thigh_weight_fraction\n";
    for (std::size_t i = 0; i < s.wsi_ids.size(); ++i) {
      text += s.wsi_ids[i] + '\t' + std::to_string(s.labels[i]) + '\t' +
              FormatDouble(s.fractions[i]) + '\n';
    }
    WriteTextFile(out, text);
  }
  return 0;
}

int RunTrain(const CommonOptions& common, const std::string& manifest,
             const std::string& graphs_index, const std::string& out, bool quiet,
             bool export_attention) {
  const RunConfig config = common.Resolve();
  const std::vector<WsiGraph> graphs = LoadInputs(manifest, graphs_index, config);
  const fs::path dir(out);
  fs::create_directories(dir);

  const auto start = std::chrono::steady_clock::now();
  const CvResult cv = RunCrossValidation(
      graphs, config.train, config.hyper, [&](int fold, const EpochRecord& r) {
        if (quiet) return;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "fold %d epoch %3d  train_loss %.6f  val_loss %.6f  [%.0fs]\n", fold,
                     r.epoch, r.train_loss, r.val_loss, secs);
      });

  SaveFoldReport(dir, cv.report);
  std::ostringstream cfg;
  WriteConfig(cfg, config);
  WriteTextFile(dir / "config.txt", cfg.str());

  std::string predictions = "wsi_id\tfold\tlabel\tlogit0\tlogit1\tprobability\tpredicted\n";
  for (std::size_t f = 0; f < cv.outcomes.size(); ++f) {
    const FoldOutcome& o = cv.outcomes[f];
    SaveCheckpoint(dir / ("fold" + std::to_string(f) + ".ckpt"), {config.hyper, o.best_params});
    for (std::size_t v = 0; v < cv.splits[f].val.size(); ++v) {
      const WsiGraph& g = graphs[cv.splits[f].val[v]];
      const Prediction& p = o.val_predictions[v];
      predictions += g.wsi_id + '\t' + std::to_string(f) + '\t' + std::to_string(g.label) + '\t' +
                     FormatDouble(p.logit0) + '\t' + FormatDouble(p.logit1) + '\t' +
                     FormatDouble(p.positive_probability()) + '\t' +
                     std::to_string(p.predicted_label()) + '\n';
      if (export_attention) {
        fs::create_directories(dir / "attention");
        ExportAttention(dir / "attention" / g.wsi_id, BuildAttentionMap(g, p.attention));
      }
    }
  }
  WriteTextFile(dir / "predictions.tsv", predictions);

  std::ostringstream summary;
  WriteReportSummary(summary, cv.report);
  std::cout << summary.str();
  return 0;
}

int RunInfer(const CommonOptions& common, const std::string& checkpoint_path,
             const std::string& table, const std::string& out, std::string wsi_id) {
  const RunConfig config = common.Resolve();
  const Checkpoint checkpoint = LoadCheckpoint(checkpoint_path);
  const std::vector<PatchRecord> records = LoadPatchTable(table);
  if (wsi_id.empty()) wsi_id = fs::path(table).stem().string();
  const WsiGraph graph = GraphFromRecords(wsi_id, 0, records, checkpoint.hyper, config.rule);
  const PreparedGraph prepared(graph);
  const Prediction p = Predict(prepared, checkpoint.params, checkpoint.hyper);
  std::cout << "wsi_id: " << wsi_id << "\n"
            << "logits: " << FormatDouble(p.logit0) << " " << FormatDouble(p.logit1) << "\n"
            << "ulcer probability: " << FormatDouble(p.positive_probability()) << "\n"
            << "predicted label: " << p.predicted_label() << "\n";
  if (!out.empty()) {
    ExportAttention(out, BuildAttentionMap(graph, p.attention));
    std::cout << "attention: " << out << ".csv, " << out << ".ppm\n";
  }
  return 0;
}

int RunGradcheck(const CommonOptions& common, std::uint64_t seed, int nodes, int edges,
                 double h, double tolerance, bool verbose) {
  const RunConfig config = common.Resolve();
  const auto start = std::chrono::steady_clock::now();
  const AuditPoint point = DrawAuditPoint(seed, config.hyper, nodes, edges);
  const ModelAudit audit = AuditModelGradients(point.graph, point.params, config.hyper, h);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (verbose) {
    for (const ParameterAudit& p : audit.parameters) {
      std::printf("%-16s %7zu  max rel. err %.3e  max abs. err %.3e\n", p.name.c_str(), p.count,
                  p.max_relative_error, p.max_absolute_error);
    }
  }
  std::printf("checked %zu parameters on a %d-node, %d-edge graph in %.1fs\n", audit.checked,
              nodes, edges, secs);
  std::printf("draw %d, smallest |relu input| %.3e\n", point.draw, point.margin);
  std::printf("max rel. err %.3e (%s[%zu])\n", audit.max_relative_error,
              audit.worst_parameter.c_str(), audit.worst_index);
  std::printf("max abs. err %.3e\n", audit.max_absolute_error);
  if (!(audit.max_relative_error < tolerance)) {
    std::fprintf(stderr, "domaingcn: gradient check failed: %.3e >= %.1e\n",
                 audit.max_relative_error, tolerance);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  TuneAllocatorForTraining();
  CLI::App app{"Graph classification of whole-slide images with domain-knowledge node weights"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "domaingcn 0.1.0");

  CommonOptions common;

  std::string out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic planted-signal cohort");
  common.Attach(generate);
  generate->add_option("-o,--out", out, "Output directory")->required();

  std::string manifest;
  auto* build = app.add_subcommand("build-graphs", "Assemble and save graphs for a manifest");
  common.Attach(build);
  build->add_option("-m,--manifest", manifest, "Dataset manifest")->required();
  build->add_option("-o,--out", out, "Output directory")->required();

  std::string graphs;
  int threshold = 3;
  auto* stats = app.add_subcommand("weights-stats", "Compare high-weight node fractions by label");
  common.Attach(stats);
  stats->add_option("-m,--manifest", manifest, "Dataset manifest");
  stats->add_option("-g,--graphs", graphs, "Graph index written by build-graphs");
  stats->add_option("-t,--threshold", threshold, "Minimum ulcer weight counted as high")
      ->check(CLI::Range(1, 1000));
  stats->add_option("-o,--out", out, "Per-WSI table (TSV)");

  bool quiet = false;
  bool export_attention = false;
  auto* train = app.add_subcommand("train", "Stratified cross-validation");
  common.Attach(train);
  train->add_option("-m,--manifest", manifest, "Dataset manifest");
  train->add_option("-g,--graphs", graphs, "Graph index written by build-graphs");
  train->add_option("-o,--out", out, "Output directory")->required();
  train->add_flag("-q,--quiet", quiet, "No per-epoch progress");
  train->add_flag("--export-attention", export_attention,
                  "Write attention maps for every validation WSI");

  std::string checkpoint;
  std::string table;
  std::string wsi_id;
  auto* infer = app.add_subcommand("infer", "Classify one patch table with a checkpoint");
  common.Attach(infer);
  infer->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  infer->add_option("-t,--table", table, "Patch table")->required();
  infer->add_option("-o,--out", out, "Attention export prefix (.csv and .ppm)");
  infer->add_option("--wsi-id", wsi_id, "Slide identifier (default: table file stem)");

  std::uint64_t audit_seed = 0;
  int nodes = 10;
  int edges = 8;
  double h = 1e-5;
  double tolerance = 1e-4;
  bool verbose = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference audit of all gradients");
  common.Attach(gradcheck);
  gradcheck->add_option("--graph-seed", audit_seed, "Seed of the audit graph");
  gradcheck->add_option("--nodes", nodes, "Audit graph nodes")->check(CLI::Range(2, 10000));
  gradcheck->add_option("--edges", edges, "Audit graph edges")->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--step", h, "Central-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");
  gradcheck->add_flag("-v,--verbose", verbose, "Per-parameter errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "domaingcn: usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  }

  try {
    if (generate->parsed()) return RunGenerate(common, out);
    if (build->parsed()) return RunBuildGraphs(common, manifest, out);
    if (stats->parsed()) return RunWeightsStats(common, manifest, graphs, threshold, out);
    if (train->parsed()) return RunTrain(common, manifest, graphs, out, quiet, export_attention);
    if (infer->parsed()) return RunInfer(common, checkpoint, table, out, wsi_id);
    if (gradcheck->parsed()) {
      return RunGradcheck(common, audit_seed, nodes, edges, h, tolerance, verbose);
    }
  } catch (const Error& e) {
    std::cerr << "domaingcn: " << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "domaingcn: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
