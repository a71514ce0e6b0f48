#include "domaingcn/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kFixedColumns = 6;
constexpr const char* kFixedNames[kFixedColumns] = {
    "patch_id", "col", "row", "p_epithelium", "p_lymphocyte", "p_debris"};

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool Next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::size_t line() const { return line_; }

  [[noreturn]] void Error(const std::string& message) const {
    Fail(ErrorKind::kFormat, source_ + ":" + std::to_string(line_) + ": " + message);
  }

  // Next line, or a format error mentioning what was expected.
  std::string Require(const std::string& what) {
    std::string line;
    if (!Next(line)) {
      ++line_;
      Error("unexpected end of file, expected " + what);
    }
    return line;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

std::ifstream OpenIn(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for reading");
  return in;
}

template <typename Writer>
void WriteFile(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

bool ValidId(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

std::vector<std::string_view> Tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double TokenDouble(const LineReader& r, std::string_view token, const std::string& what) {
  const auto v = ParseDouble(token);
  if (!v) r.Error(what + ": '" + std::string(token) + "' is not a number");
  return *v;
}

long long TokenInt(const LineReader& r, std::string_view token, const std::string& what) {
  const auto v = ParseInt(token);
  if (!v) r.Error(what + ": '" + std::string(token) + "' is not an integer");
  return *v;
}

// "<keyword> <value>" line.
std::string KeywordValue(LineReader& r, const std::string& keyword) {
  const std::string line = r.Require(keyword);
  if (line.rfind(keyword + " ", 0) != 0) r.Error("expected '" + keyword + " ...'");
  return line.substr(keyword.size() + 1);
}

void WriteRow(std::ostream& out, const double* data, Eigen::Index n) {
  std::string line;
  for (Eigen::Index c = 0; c < n; ++c) {
    if (c > 0) line += ' ';
    line += FormatDouble(data[c]);
  }
  line += '\n';
  out << line;
}

void ReadMatrixRows(LineReader& r, Tensor& t, const std::string& what) {
  std::string line;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    line = r.Require(what + " row " + std::to_string(i));
    const auto tokens = Tokens(line);
    if (static_cast<Eigen::Index>(tokens.size()) != t.cols()) {
      r.Error(what + " row has " + std::to_string(tokens.size()) + " values, expected " +
              std::to_string(t.cols()));
    }
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      t(i, c) = TokenDouble(r, tokens[static_cast<std::size_t>(c)], what);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Patch tables

std::vector<PatchRecord> ReadPatchTable(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::string line;
  if (!r.Next(line)) {
    Fail(ErrorKind::kFormat, source + ":1: empty file, expected a header row");
  }
  const auto header = Split(line, ',');
  for (std::size_t i = 0; i < kFixedColumns; ++i) {
    if (i >= header.size() || Trim(header[i]) != kFixedNames[i]) {
      r.Error("missing column " + std::string(kFixedNames[i]) + " at position " +
              std::to_string(i + 1));
    }
  }
  const std::size_t features = header.size() - kFixedColumns;
  for (std::size_t f = 0; f < features; ++f) {
    if (Trim(header[kFixedColumns + f]) != "f" + std::to_string(f)) {
      r.Error("expected column f" + std::to_string(f) + ", found '" +
              std::string(Trim(header[kFixedColumns + f])) + "'");
    }
  }
  if (features != kEmbeddingDim) {
    r.Error("expected " + std::to_string(kEmbeddingDim) + " feature columns f0..f" +
            std::to_string(kEmbeddingDim - 1) + ", found " + std::to_string(features));
  }

  std::vector<PatchRecord> records;
  std::set<GridCoord> coords;
  std::set<std::string> ids;
  while (r.Next(line)) {
    if (Trim(line).empty()) continue;
    const auto cells = Split(line, ',');
    if (cells.size() != header.size()) {
      r.Error("expected " + std::to_string(header.size()) + " columns, found " +
              std::to_string(cells.size()));
    }
    PatchRecord rec;
    rec.patch_id = std::string(Trim(cells[0]));
    if (!ValidId(rec.patch_id)) r.Error("invalid patch_id '" + rec.patch_id + "'");
    if (!ids.insert(rec.patch_id).second) r.Error("duplicate patch_id " + rec.patch_id);

    int grid[2];
    for (int k = 0; k < 2; ++k) {
      const auto v = ParseInt(Trim(cells[1 + k]));
      if (!v) {
        r.Error(std::string(kFixedNames[1 + k]) + ": '" + std::string(Trim(cells[1 + k])) +
                "' is not an integer");
      }
      if (*v < 0 || *v > INT32_MAX) {
        r.Error(std::string(kFixedNames[1 + k]) + " out of range: " + std::to_string(*v));
      }
      grid[k] = static_cast<int>(*v);
    }
    rec.coord = {grid[0], grid[1]};
    if (!coords.insert(rec.coord).second) {
      r.Error("duplicate (col,row) (" + std::to_string(rec.coord.col) + "," +
              std::to_string(rec.coord.row) + ")");
    }

    double probs[3];
    for (int k = 0; k < 3; ++k) {
      const auto v = ParseDouble(Trim(cells[3 + k]));
      if (!v) {
        r.Error(std::string(kFixedNames[3 + k]) + ": '" + std::string(Trim(cells[3 + k])) +
                "' is not a number");
      }
      if (!(*v >= 0.0 && *v <= 1.0)) {
        r.Error(std::string(kFixedNames[3 + k]) + " out of range [0,1]: " +
                std::string(Trim(cells[3 + k])));
      }
      probs[k] = *v;
    }
    rec.tissue = {probs[0], probs[1], probs[2]};

    rec.embedding.resize(kEmbeddingDim);
    for (std::size_t f = 0; f < kEmbeddingDim; ++f) {
      const auto cell = Trim(cells[kFixedColumns + f]);
      const auto v = ParseFloat(cell);
      if (!v || !std::isfinite(*v)) {
        r.Error("f" + std::to_string(f) + ": '" + std::string(cell) +
                "' is not a finite number");
      }
      rec.embedding[f] = *v;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) r.Error("no patch rows");
  return records;
}

std::vector<PatchRecord> LoadPatchTable(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadPatchTable(in, path.string());
}

void WritePatchTable(std::ostream& out, std::span<const PatchRecord> records) {
  std::string line;
  for (std::size_t i = 0; i < kFixedColumns; ++i) {
    if (i > 0) line += ',';
    line += kFixedNames[i];
  }
  for (std::size_t f = 0; f < kEmbeddingDim; ++f) line += ",f" + std::to_string(f);
  line += '\n';
  out << line;
  for (const PatchRecord& rec : records) {
    if (rec.embedding.size() != kEmbeddingDim) {
      Fail(ErrorKind::kContract, "patch " + rec.patch_id + " has " +
                                     std::to_string(rec.embedding.size()) + " features");
    }
    line = rec.patch_id;
    line += ',' + std::to_string(rec.coord.col) + ',' + std::to_string(rec.coord.row);
    line += ',' + FormatDouble(rec.tissue.epithelium);
    line += ',' + FormatDouble(rec.tissue.lymphocyte);
    line += ',' + FormatDouble(rec.tissue.debris);
    for (float v : rec.embedding) {
      line += ',';
      line += FormatFloat(v);
    }
    line += '\n';
    out << line;
  }
}

void SavePatchTable(const fs::path& path, std::span<const PatchRecord> records) {
  WriteFile(path, [&](std::ostream& out) { WritePatchTable(out, records); });
}

// ---------------------------------------------------------------------------
// Manifests

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest ReadManifest(std::istream& in, const std::string& source,
                             const fs::path& base_dir) {
  LineReader r(in, source);
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  bool header = false;
  std::set<std::string> ids;
  while (r.Next(line)) {
    const std::string_view t = Trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (header) continue;
      const auto body = Trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        m.provenance[std::string(Trim(body.substr(0, eq)))] =
            std::string(Trim(body.substr(eq + 1)));
      }
      continue;
    }
    if (!header) {
      if (t != "wsi_id,label,path") r.Error("expected header 'wsi_id,label,path'");
      header = true;
      continue;
    }
    const auto cells = Split(t, ',');
    if (cells.size() != 3) {
      r.Error("expected 3 columns, found " + std::to_string(cells.size()));
    }
    ManifestEntry e;
    e.wsi_id = std::string(Trim(cells[0]));
    if (!ValidId(e.wsi_id)) r.Error("invalid wsi_id '" + e.wsi_id + "'");
    if (!ids.insert(e.wsi_id).second) r.Error("duplicate wsi_id " + e.wsi_id);
    const auto label = ParseInt(Trim(cells[1]));
    if (!label || (*label != 0 && *label != 1)) {
      r.Error("label must be 0 or 1, found '" + std::string(Trim(cells[1])) + "'");
    }
    e.label = static_cast<int>(*label);
    e.path = std::string(Trim(cells[2]));
    if (e.path.empty()) r.Error("empty path");
    const fs::path resolved = m.resolve(e);
    if (!fs::is_regular_file(resolved)) {
      r.Error("patch table not found: " + resolved.string());
    }
    m.entries.push_back(std::move(e));
  }
  if (!header) Fail(ErrorKind::kFormat, source + ": missing header 'wsi_id,label,path'");
  return m;
}

DatasetManifest LoadManifest(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadManifest(in, path.string(), path.parent_path());
}

void WriteManifest(std::ostream& out, const DatasetManifest& manifest) {
  for (const auto& [key, value] : manifest.provenance) {
    out << "# " << key << " = " << value << '\n';
  }
  out << "wsi_id,label,path\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.wsi_id << ',' << e.label << ',' << e.path << '\n';
  }
}

void SaveManifest(const fs::path& path, const DatasetManifest& manifest) {
  WriteFile(path, [&](std::ostream& out) { WriteManifest(out, manifest); });
}

// ---------------------------------------------------------------------------
// Graphs

void WriteGraph(std::ostream& out, const WsiGraph& g) {
  const std::size_t n = g.num_nodes();
  if (g.patch_ids.size() != n || g.node_weights.size() != n ||
      static_cast<std::size_t>(g.node_features.rows()) != n ||
      static_cast<std::size_t>(g.positional.rows()) != n) {
    Fail(ErrorKind::kContract, "graph " + g.wsi_id + ": per-node arrays disagree in length");
  }
  out << "dgcn-graph 1\n";
  out << "wsi_id " << g.wsi_id << '\n';
  out << "label " << g.label << '\n';
  out << "nodes " << n << '\n';
  out << "feature_dim " << g.node_features.cols() << '\n';
  out << "pe_dim " << g.positional.cols() << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << g.patch_ids[i] << ' ' << g.coords[i].col << ' ' << g.coords[i].row << ' '
        << g.node_weights[i] << '\n';
  }
  for (std::size_t i = 0; i < n; ++i) {
    WriteRow(out, g.node_features.row(static_cast<Eigen::Index>(i)).data(),
             g.node_features.cols());
  }
  for (std::size_t i = 0; i < n; ++i) {
    WriteRow(out, g.positional.row(static_cast<Eigen::Index>(i)).data(), g.positional.cols());
  }
  out << "edges " << g.edges.size() << '\n';
  for (const Edge& e : g.edges) out << e.src << ' ' << e.dst << '\n';
  out << "end\n";
}

WsiGraph ReadGraph(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (r.Require("'dgcn-graph 1'") != "dgcn-graph 1") r.Error("expected 'dgcn-graph 1'");
  WsiGraph g;
  g.wsi_id = KeywordValue(r, "wsi_id");
  g.label = static_cast<int>(TokenInt(r, KeywordValue(r, "label"), "label"));
  const long long n = TokenInt(r, KeywordValue(r, "nodes"), "nodes");
  const long long fdim = TokenInt(r, KeywordValue(r, "feature_dim"), "feature_dim");
  const long long pdim = TokenInt(r, KeywordValue(r, "pe_dim"), "pe_dim");
  if (n < 1 || fdim < 1 || pdim < 0) r.Error("invalid graph dimensions");
  for (long long i = 0; i < n; ++i) {
    const std::string line = r.Require("node line");
    const auto t = Tokens(line);
    if (t.size() != 4) r.Error("node line needs patch_id col row weight");
    g.patch_ids.emplace_back(t[0]);
    g.coords.push_back({static_cast<int>(TokenInt(r, t[1], "col")),
                        static_cast<int>(TokenInt(r, t[2], "row"))});
    g.node_weights.push_back(static_cast<int>(TokenInt(r, t[3], "weight")));
  }
  g.node_features.resize(n, fdim);
  ReadMatrixRows(r, g.node_features, "feature");
  g.positional.resize(n, pdim);
  ReadMatrixRows(r, g.positional, "positional");
  const long long e = TokenInt(r, KeywordValue(r, "edges"), "edges");
  if (e < 0) r.Error("negative edge count");
  for (long long i = 0; i < e; ++i) {
    const std::string line = r.Require("edge line");
    const auto t = Tokens(line);
    if (t.size() != 2) r.Error("edge line needs src dst");
    const long long s = TokenInt(r, t[0], "src");
    const long long d = TokenInt(r, t[1], "dst");
    if (s < 0 || d < 0 || s >= n || d >= n) r.Error("edge endpoint out of range");
    g.edges.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(d)});
  }
  if (r.Require("'end'") != "end") r.Error("expected 'end'");
  ValidateGraph(g);
  return g;
}

void SaveGraph(const fs::path& path, const WsiGraph& graph) {
  WriteFile(path, [&](std::ostream& out) { WriteGraph(out, graph); });
}

WsiGraph LoadGraph(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadGraph(in, path.string());
}

// ---------------------------------------------------------------------------
// Checkpoints

void WriteCheckpoint(std::ostream& out, const Checkpoint& c) {
  out << "dgcn-checkpoint 1\n";
  for (const auto& [key, value] : c.hyper.ToKeyValues()) {
    out << "hyper " << key << ' ' << value << '\n';
  }
  c.params.ForEach([&out](const std::string& name, const Tensor& t) {
    out << "matrix " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index i = 0; i < t.rows(); ++i) WriteRow(out, t.row(i).data(), t.cols());
  });
  out << "end\n";
}

Checkpoint ReadCheckpoint(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (r.Require("'dgcn-checkpoint 1'") != "dgcn-checkpoint 1") {
    r.Error("expected 'dgcn-checkpoint 1'");
  }
  Checkpoint c;
  std::string line = r.Require("hyper or matrix line");
  while (line.rfind("hyper ", 0) == 0) {
    const auto t = Tokens(line);
    if (t.size() != 3) r.Error("hyper line needs a key and a value");
    try {
      if (!c.hyper.Set(std::string(t[1]), std::string(t[2]))) {
        r.Error("unknown hyperparameter " + std::string(t[1]));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kFormat) throw;
      r.Error(e.what());
    }
    line = r.Require("hyper or matrix line");
  }
  c.hyper.Validate();
  c.params = ModelParams::Zeros(c.hyper);
  auto named = c.params.Named();
  for (auto& [name, tensor] : named) {
    const auto t = Tokens(line);
    if (t.size() != 4 || t[0] != "matrix" || t[1] != name) {
      r.Error("expected 'matrix " + name + " <rows> <cols>'");
    }
    if (TokenInt(r, t[2], "rows") != tensor->rows() || TokenInt(r, t[3], "cols") != tensor->cols()) {
      r.Error("matrix " + name + " has shape " + std::string(t[2]) + "x" + std::string(t[3]) +
              ", expected " + ShapeString(*tensor));
    }
    ReadMatrixRows(r, *tensor, name);
    line = r.Require(named.back().first == name ? "'end'" : "matrix line");
  }
  if (line != "end") r.Error("expected 'end'");
  return c;
}

void SaveCheckpoint(const fs::path& path, const Checkpoint& checkpoint) {
  WriteFile(path, [&](std::ostream& out) { WriteCheckpoint(out, checkpoint); });
}

Checkpoint LoadCheckpoint(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadCheckpoint(in, path.string());
}

// ---------------------------------------------------------------------------
// Fold reports

namespace {

constexpr const char* kFoldHeader = "fold\tauc\tf1_macro\tf1_binary\tacc\tbest_epoch\tepochs_run";
constexpr const char* kCurveHeader = "fold\tepoch\ttrain_loss\tval_loss";

std::string SummaryRow(const char* name, const FoldReport& r, bool sd) {
  const auto pick = [sd](const MeanSd& m) { return FormatDouble(sd ? m.sd : m.mean); };
  return std::string(name) + '\t' + pick(r.auc) + '\t' + pick(r.f1_macro) + '\t' +
         pick(r.f1_binary) + '\t' + pick(r.acc) + "\t-\t-";
}

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void WriteFoldTable(std::ostream& out, const FoldReport& report) {
  out << kFoldHeader << '\n';
  for (const FoldMetrics& f : report.folds) {
    out << f.fold << '\t' << FormatDouble(f.auc) << '\t' << FormatDouble(f.f1_macro) << '\t'
        << FormatDouble(f.f1_binary) << '\t' << FormatDouble(f.acc) << '\t' << f.best_epoch
        << '\t' << f.epochs_run << '\n';
  }
  out << SummaryRow("mean", report, false) << '\n';
  out << SummaryRow("sd", report, true) << '\n';
}

void WriteCurveTable(std::ostream& out, const FoldReport& report) {
  out << kCurveHeader << '\n';
  for (const FoldMetrics& f : report.folds) {
    for (const EpochRecord& e : f.curve) {
      out << f.fold << '\t' << e.epoch << '\t' << FormatDouble(e.train_loss) << '\t'
          << FormatDouble(e.val_loss) << '\n';
    }
  }
}

void WriteReportSummary(std::ostream& out, const FoldReport& report) {
  out << "Cross-validation report (" << report.folds.size() << " folds)\n\n";
  out << "fold  auc     f1_macro  f1_binary  acc     best_epoch  epochs_run\n";
  for (const FoldMetrics& f : report.folds) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-5d %-7s %-9s %-10s %-7s %-11d %d\n", f.fold,
                  Fixed(f.auc).c_str(), Fixed(f.f1_macro).c_str(), Fixed(f.f1_binary).c_str(),
                  Fixed(f.acc).c_str(), f.best_epoch, f.epochs_run);
    out << buf;
  }
  out << "\nmean (sd)\n";
  out << "  auc       " << Fixed(report.auc.mean) << " (" << Fixed(report.auc.sd) << ")\n";
  out << "  f1_macro  " << Fixed(report.f1_macro.mean) << " (" << Fixed(report.f1_macro.sd)
      << ")\n";
  out << "  f1_binary " << Fixed(report.f1_binary.mean) << " ("
      << Fixed(report.f1_binary.sd) << ")\n";
  out << "  acc       " << Fixed(report.acc.mean) << " (" << Fixed(report.acc.sd) << ")\n";
}

FoldReport ReadFoldReport(std::istream& fold_table, std::istream& curve_table,
                          const std::string& source) {
  FoldReport report;
  LineReader r(fold_table, source + "/folds.tsv");
  if (r.Require("header") != kFoldHeader) r.Error("unexpected fold table header");
  std::string line;
  bool saw_mean = false;
  bool saw_sd = false;
  while (r.Next(line)) {
    if (line.empty()) continue;
    const auto c = Split(line, '\t');
    if (c.size() != 7) r.Error("expected 7 columns, found " + std::to_string(c.size()));
    if (c[0] == "mean" || c[0] == "sd") {
      const bool sd = c[0] == "sd";
      (sd ? saw_sd : saw_mean) = true;
      MeanSd* targets[4] = {&report.auc, &report.f1_macro, &report.f1_binary, &report.acc};
      for (int k = 0; k < 4; ++k) {
        (sd ? targets[k]->sd : targets[k]->mean) = TokenDouble(r, c[1 + k], std::string(c[0]));
      }
      continue;
    }
    FoldMetrics f;
    f.fold = static_cast<int>(TokenInt(r, c[0], "fold"));
    f.auc = TokenDouble(r, c[1], "auc");
    f.f1_macro = TokenDouble(r, c[2], "f1_macro");
    f.f1_binary = TokenDouble(r, c[3], "f1_binary");
    f.acc = TokenDouble(r, c[4], "acc");
    f.best_epoch = static_cast<int>(TokenInt(r, c[5], "best_epoch"));
    f.epochs_run = static_cast<int>(TokenInt(r, c[6], "epochs_run"));
    report.folds.push_back(std::move(f));
  }
  if (!saw_mean || !saw_sd) r.Error("missing mean or sd row");

  LineReader cr(curve_table, source + "/curves.tsv");
  if (cr.Require("header") != kCurveHeader) cr.Error("unexpected curve table header");
  while (cr.Next(line)) {
    if (line.empty()) continue;
    const auto c = Split(line, '\t');
    if (c.size() != 4) cr.Error("expected 4 columns, found " + std::to_string(c.size()));
    const int fold = static_cast<int>(TokenInt(cr, c[0], "fold"));
    FoldMetrics* target = nullptr;
    for (FoldMetrics& f : report.folds) {
      if (f.fold == fold) target = &f;
    }
    if (target == nullptr) cr.Error("curve row for unknown fold " + std::to_string(fold));
    target->curve.push_back({static_cast<int>(TokenInt(cr, c[1], "epoch")),
                             TokenDouble(cr, c[2], "train_loss"),
                             TokenDouble(cr, c[3], "val_loss")});
  }
  return report;
}

void SaveFoldReport(const fs::path& dir, const FoldReport& report) {
  fs::create_directories(dir);
  WriteFile(dir / "folds.tsv", [&](std::ostream& out) { WriteFoldTable(out, report); });
  WriteFile(dir / "curves.tsv", [&](std::ostream& out) { WriteCurveTable(out, report); });
  WriteFile(dir / "report.txt", [&](std::ostream& out) { WriteReportSummary(out, report); });
}

FoldReport LoadFoldReport(const fs::path& dir) {
  std::ifstream folds = OpenIn(dir / "folds.tsv");
  std::ifstream curves = OpenIn(dir / "curves.tsv");
  return ReadFoldReport(folds, curves, dir.string());
}

}  // namespace domaingcn
