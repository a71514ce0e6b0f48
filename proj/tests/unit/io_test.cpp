#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "domaingcn/config.hpp"
#include "domaingcn/domain_weights.hpp"
#include "domaingcn/error.hpp"
#include "domaingcn/io.hpp"

using namespace domaingcn;
namespace fs = std::filesystem;

namespace {

std::vector<PatchRecord> RandomRecords(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PatchRecord> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    PatchRecord& r = out[static_cast<std::size_t>(i)];
    r.patch_id = "patch_" + std::to_string(i);
    r.coord = {i % 5, i / 5};
    r.embedding.resize(kEmbeddingDim);
    for (float& v : r.embedding) v = normal(rng) * 1e3f;
    r.tissue = {unit(rng), unit(rng), unit(rng)};
  }
  out[0].embedding[0] = 1e-40f;  // subnormal
  out[0].tissue = {0.0, 1.0, 0.1};
  return out;
}

std::string TableText(const std::vector<PatchRecord>& records) {
  std::ostringstream out;
  WritePatchTable(out, records);
  return out.str();
}

std::string ErrorOf(const std::function<void()>& f, ErrorKind expected) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error";
  return {};
}

std::string ReplaceLine(const std::string& text, int line, const std::string& replacement) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string l;
  for (int i = 1; std::getline(in, l); ++i) out << (i == line ? replacement : l) << '\n';
  return out.str();
}

std::string LineOf(const std::string& text, int line) {
  std::istringstream in(text);
  std::string l;
  for (int i = 1; std::getline(in, l); ++i)
    if (i == line) return l;
  return {};
}

class IoFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("domaingcn_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(PatchTable, RoundTripsBitExactly) {
  const auto records = RandomRecords(12, 1);
  const std::string text = TableText(records);
  std::istringstream in(text);
  const auto back = ReadPatchTable(in, "t.csv");
  EXPECT_EQ(back, records);
  EXPECT_EQ(TableText(back), text);
}

TEST(PatchTable, ShortHeaderIsRejectedOnLineOne) {
  std::string header = "patch_id,col,row,p_epithelium,p_lymphocyte,p_debris";
  for (int i = 0; i < 1023; ++i) header += ",f" + std::to_string(i);
  std::istringstream in(header + "\n");
  const std::string msg = ErrorOf([&] { ReadPatchTable(in, "t.csv"); }, ErrorKind::kFormat);
  EXPECT_NE(msg.find("t.csv:1:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("1023"), std::string::npos) << msg;
}

TEST(PatchTable, RowViolationsNameTheirLine) {
  const auto records = RandomRecords(4, 2);
  const std::string text = TableText(records);
  const std::string row3 = LineOf(text, 3);
  const auto comma = [&](int n) {
    std::size_t pos = 0;
    for (int i = 0; i < n; ++i) pos = row3.find(',', pos) + 1;
    return pos;
  };
  struct Case {
    const char* what;
    std::string line;
  };
  const std::string rest_after_col = row3.substr(comma(2) - 1);
  const std::vector<Case> cases = {
      {"negative col", "patch_x,-1" + rest_after_col},
      {"non-integer col", "patch_x,1.5" + rest_after_col},
      {"probability above one", row3.substr(0, comma(3)) + "1.5" + row3.substr(comma(4) - 1)},
      {"nan feature", row3.substr(0, comma(6)) + "nan" + row3.substr(comma(7) - 1)},
      {"missing column", row3.substr(0, row3.rfind(','))},
      {"duplicate id", LineOf(text, 2).substr(0, comma(1) - 1) + row3.substr(comma(1) - 1)},
      {"duplicate coordinate", "fresh_id" + LineOf(text, 2).substr(LineOf(text, 2).find(','))},
  };
  for (const auto& c : cases) {
    std::istringstream in(ReplaceLine(text, 3, c.line));
    const std::string msg = ErrorOf([&] { ReadPatchTable(in, "t.csv"); }, ErrorKind::kFormat);
    EXPECT_NE(msg.find("t.csv:3:"), std::string::npos) << c.what << ": " << msg;
  }
}

TEST(PatchTable, EmptyTableIsRejected) {
  std::string text = TableText(RandomRecords(1, 3));
  text = text.substr(0, text.find('\n') + 1);
  std::istringstream in(text);
  ErrorOf([&] { ReadPatchTable(in, "t.csv"); }, ErrorKind::kFormat);
}

TEST_F(IoFiles, ManifestRoundTripAndChecks) {
  SavePatchTable(dir_ / "a.csv", RandomRecords(3, 4));
  SavePatchTable(dir_ / "b.csv", RandomRecords(3, 5));
  DatasetManifest m;
  m.entries = {{"a", 0, "a.csv"}, {"b", 1, "b.csv"}};
  m.provenance = {{"generator.seed", "7"}, {"generator.delta", "1"}};
  SaveManifest(dir_ / "manifest.csv", m);
  const DatasetManifest back = LoadManifest(dir_ / "manifest.csv");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.resolve(back.entries[1]), dir_ / "b.csv");

  std::ostringstream text;
  WriteManifest(text, m);
  const std::string good = text.str();
  const auto reject = [&](const std::string& bad) {
    std::istringstream in(bad);
    return ErrorOf([&] { ReadManifest(in, "m.csv", dir_); }, ErrorKind::kFormat);
  };
  EXPECT_NE(reject(good + "a,1,a.csv\n").find("m.csv:6:"), std::string::npos);
  EXPECT_NE(reject(good + "c,2,a.csv\n").find("m.csv:6:"), std::string::npos);
  EXPECT_NE(reject(good + "c,1,missing.csv\n").find("m.csv:6:"), std::string::npos);
}

TEST(Graph, RoundTripsBitExactly) {
  const auto records = RandomRecords(13, 6);
  GraphOptions options;
  const WsiGraph g = AssembleGraph("slide-1", records, 1, UlcerWeights(records), options);
  std::ostringstream out;
  WriteGraph(out, g);
  std::istringstream in(out.str());
  const WsiGraph back = ReadGraph(in, "g");
  EXPECT_EQ(back, g);
  std::ostringstream again;
  WriteGraph(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Graph, TruncatedFileIsRejected) {
  const auto records = RandomRecords(4, 7);
  const WsiGraph g = AssembleGraph("s", records, 0, UlcerWeights(records));
  std::ostringstream out;
  WriteGraph(out, g);
  const std::string text = out.str();
  std::istringstream in(text.substr(0, text.size() / 2));
  EXPECT_THROW(ReadGraph(in, "g"), Error);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  HyperParams h;
  h.hidden = 8;
  h.pe_dim = 8;
  h.layers = 2;
  h.weight_mode = WeightMode::kScaleMessage;
  const Checkpoint c{h, InitParams(h, 9)};
  std::ostringstream out;
  WriteCheckpoint(out, c);
  std::istringstream in(out.str());
  EXPECT_EQ(ReadCheckpoint(in, "c"), c);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  HyperParams h;
  h.hidden = 8;
  h.pe_dim = 8;
  h.layers = 1;
  const Checkpoint c{h, InitParams(h, 9)};
  std::ostringstream out;
  WriteCheckpoint(out, c);
  std::string text = out.str();
  const auto pos = text.find("hyper hidden 8");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 14, "hyper hidden 9");
  std::istringstream in(text);
  EXPECT_THROW(ReadCheckpoint(in, "c"), Error);
}

TEST_F(IoFiles, FoldReportRoundTripsBitExactly) {
  FoldReport r;
  for (int f = 0; f < 3; ++f) {
    FoldMetrics m;
    m.fold = f;
    m.auc = 0.1 * f + 1.0 / 3.0;
    m.f1_macro = 0.7;
    m.f1_binary = 2.0 / 3.0;
    m.acc = 0.9 - 0.01 * f;
    m.best_epoch = f + 1;
    m.epochs_run = f + 6;
    for (int e = 1; e <= m.epochs_run; ++e) m.curve.push_back({e, 1.0 / e, 0.5 + 1.0 / (e * 7.0)});
    r.folds.push_back(m);
  }
  r.Aggregate();
  SaveFoldReport(dir_, r);
  EXPECT_TRUE(fs::exists(dir_ / "report.txt"));
  EXPECT_EQ(LoadFoldReport(dir_), r);
}

TEST(Config, ReadsKeysAndReportsLines) {
  RunConfig c;
  std::istringstream in("# comment\nlr = 0.001\n\nseed = 5 # trailing\nepithelium_max=0.2\ndelta = 0.5\n");
  ReadConfig(in, "run.cfg", c);
  EXPECT_EQ(c.train.lr, 0.001);
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.hyper.seed, 5u);
  EXPECT_EQ(c.synthetic.seed, 5u);
  EXPECT_EQ(c.rule.epithelium_max, 0.2);
  EXPECT_EQ(c.synthetic.delta, 0.5);

  std::istringstream bad("lr = 0.1\nno_such_key = 3\n");
  const std::string msg = ErrorOf([&] { ReadConfig(bad, "run.cfg", c); }, ErrorKind::kConfig);
  EXPECT_NE(msg.find("run.cfg:2"), std::string::npos) << msg;
  EXPECT_THROW(c.SetAssignment("patience=abc"), Error);
}

TEST(Config, WriteReadRoundTrip) {
  RunConfig c;
  c.SetAssignment("hidden=16");
  c.SetAssignment("domain_weights_enabled=false");
  c.SetAssignment("max_region_frac=0.4");
  std::ostringstream out;
  WriteConfig(out, c);
  RunConfig back;
  std::istringstream in(out.str());
  ReadConfig(in, "x", back);
  EXPECT_EQ(back.ToKeyValues(), c.ToKeyValues());
  EXPECT_EQ(back.hyper, c.hyper);
}
