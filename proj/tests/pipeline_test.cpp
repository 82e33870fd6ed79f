#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <regex>

namespace cogsub {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int status = 0;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cogsub_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(COGSUB_CLI) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

// Small enough to run every stage in a few seconds.
const std::string kSmallRun = " --n-samples 300 --n-iter 300 --threads 1";

TEST(Config, RoundTripsThroughJson) {
  PipelineConfig cfg;
  cfg.seed = 9;
  cfg.tsne.perplexity = 12;
  cfg.segmentation.raster.resolution = 200;
  cfg.selection.wrapper.min_gain = 0.01;
  cfg.generator.shift = 0.5;
  cfg.segmentation.markers = {{1.5, -2}};
  auto back = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()));
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.tsne.perplexity, 12);
  EXPECT_EQ(back.segmentation.raster.resolution, 200);
  EXPECT_EQ(back.selection.wrapper.min_gain, 0.01);
  EXPECT_EQ(back.generator.shift, 0.5);
  EXPECT_EQ(back.segmentation.markers, cfg.segmentation.markers);
  EXPECT_EQ(back.selection.kinds.size(), 7u);

  cfg.segmentation.raster.resolution.reset();
  EXPECT_EQ(config_to_json(cfg)["segmentation"]["resolution"], "auto");
  EXPECT_FALSE(config_from_json(nlohmann::json::parse(config_to_json(cfg).dump())).segmentation.raster.resolution);
}

TEST(Config, UnknownKeyIsConfigError) {
  try {
    config_from_json(nlohmann::json::parse(R"({"tsne": {"perplexity": 5, "preplexity": 6}})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("tsne.preplexity"), std::string::npos);
  }
}

TEST(Config, ShippedDefaultConfigLoads) {
  const auto cfg = load_config(fs::path(COGSUB_DATA_DIR).parent_path() / "configs" / "default.json");
  EXPECT_EQ(cfg.tsne.perplexity, 30);
  EXPECT_EQ(cfg.segmentation.connectivity, 8);
  EXPECT_EQ(cfg.selection.wrapper.k_folds, 10);
}

TEST(Census, ReingestedCountsKeepTheirStructure) {
  // Cluster sizes of a reference three-subgroup split, as (CN, MCI) pairs.
  const std::vector<std::pair<std::size_t, std::size_t>> counts = {{752, 1143}, {3660, 3452}, {4437, 4192}};
  std::vector<Label> labels;
  std::vector<int> cluster_of;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c].first; ++i, labels.push_back(Label::CN)) cluster_of.push_back(static_cast<int>(c));
    for (std::size_t i = 0; i < counts[c].second; ++i, labels.push_back(Label::MCI)) cluster_of.push_back(static_cast<int>(c));
  }
  nlohmann::json j = {{"cluster_of", cluster_of}, {"n_clusters", 3}};
  const auto a = clusters_from_json(j, labels);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(a.census[c].cn, counts[c].first);
    EXPECT_EQ(a.census[c].mci, counts[c].second);
    EXPECT_EQ(a.census[c].total, counts[c].first + counts[c].second);
  }
}

TEST(Profiles, UndersizedClusterIsIndeterminateNotFatal) {
  auto [ds, truth] = generate_synthetic(three_subtype_config(), 2);
  ClusterAssignment a;
  a.cluster_of = truth.cluster_of;
  a.n_clusters = 4;
  a.census.resize(4);
  // Move three CN samples into a fourth cluster.
  for (std::size_t i = 0, moved = 0; moved < 3; ++i)
    if (ds.labels()[i] == Label::CN) {
      a.cluster_of[i] = 3;
      ++moved;
    }
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    auto& c = a.census[static_cast<std::size_t>(a.cluster_of[i])];
    (ds.labels()[i] == Label::MCI ? c.mci : c.cn) += 1;
    c.total += 1;
  }
  const auto dir = scratch("indeterminate");
  OutputRecorder out(dir);
  PipelineConfig cfg;
  std::vector<std::string> warnings;
  const auto profiles = stage_profile(cfg, ds, FeatureMask(ds.n_features(), true), a, nullptr, out,
                                      [&](const std::string& w) { warnings.push_back(w); });
  ASSERT_EQ(profiles.size(), 4u);
  EXPECT_EQ(profiles[3].subtype, "indeterminate");
  EXPECT_EQ(warnings.size(), 1u);
  const auto j = read_json(dir / "profiles.json");
  EXPECT_TRUE(j["clusters"][3].contains("warning"));
  for (const auto& c : j["clusters"]) {
    EXPECT_TRUE(c["cluster"].is_string());
    EXPECT_TRUE(c["large_effect_features"].is_array());
    EXPECT_TRUE(c["affected_domains"].is_array());
    EXPECT_TRUE(c["subtype"].is_string());
    ASSERT_TRUE(c["features"].is_array());
    for (const auto& f : c["features"]) {
      EXPECT_TRUE(f["feature"].is_string());
      EXPECT_TRUE(f["U"].is_number());
      const double p = f["p_value"].get<double>();
      EXPECT_TRUE(p >= 0 && p <= 1);
      EXPECT_EQ(f["significant"].get<bool>(), p < cfg.alpha);
      EXPECT_TRUE(f["d"].is_number() || f["d"] == "inf" || f["d"] == "-inf");
      EXPECT_TRUE(f["effect"].is_string());
    }
  }
}

TEST(Cli, GenerateIsDeterministicAndRecordsTruth) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(cli("generate --seed 7 -o " + a.string(), a).status, 0);
  ASSERT_EQ(cli("generate --seed 7 -o " + b.string(), b).status, 0);
  EXPECT_EQ(sha256_hex(read_text_file(a / "cohort.csv")), sha256_hex(read_text_file(b / "cohort.csv")));
  const auto truth = read_json(a / "ground_truth.json");
  EXPECT_EQ(truth["impaired_domains"].size(), 3u);
}

TEST(Cli, UnwritableOutputIsIoError) {
  const auto dir = scratch("unwritable");
  write_text_file(dir / "blocker", "x");
  const auto r = cli("generate -o " + (dir / "blocker" / "sub").string(), dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("io_error"), std::string::npos) << r.err;
}

TEST(Cli, EmptyConsensusFails) {
  const auto dir = scratch("empty");
  ASSERT_EQ(cli("generate --n-samples 200 -o " + dir.string(), dir).status, 0);
  const auto r = cli("select --min-gain inf -o " + dir.string(), dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("empty consensus"), std::string::npos) << r.err;
}

TEST(Cli, BadArgumentsAreReported) {
  const auto dir = scratch("badargs");
  auto r = cli("run --resolution big -o " + dir.string(), dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("argument_error"), std::string::npos) << r.err;
  r = cli("run --marker=1:2 -o " + dir.string(), dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("argument_error"), std::string::npos) << r.err;
}

class CliRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    first_ = new fs::path(scratch("run_a"));
    second_ = new fs::path(scratch("run_b"));
    status_a_ = cli("run --seed 3" + kSmallRun + " -o " + first_->string(), *first_).status;
    status_b_ = cli("run --seed 3" + kSmallRun + " -o " + second_->string(), *second_).status;
  }
  static void TearDownTestSuite() {
    delete first_;
    delete second_;
  }
  static fs::path* first_;
  static fs::path* second_;
  static int status_a_, status_b_;
};
fs::path* CliRun::first_ = nullptr;
fs::path* CliRun::second_ = nullptr;
int CliRun::status_a_ = -1;
int CliRun::status_b_ = -1;

TEST_F(CliRun, IdenticalRunsGiveIdenticalHashes) {
  ASSERT_EQ(status_a_, 0);
  ASSERT_EQ(status_b_, 0);
  const auto a = read_json(*first_ / "manifest.json"), b = read_json(*second_ / "manifest.json");
  EXPECT_EQ(a["output_hashes"], b["output_hashes"]);
  EXPECT_GE(a["output_hashes"].size(), 10u);
  for (const auto& [file, hash] : a["output_hashes"].items())
    EXPECT_EQ(sha256_hex(read_text_file(*first_ / file)), hash.get<std::string>()) << file;
}

TEST_F(CliRun, ScatterHasOneCirclePerSample) {
  ASSERT_EQ(status_a_, 0);
  const auto svg = read_text_file(*first_ / "scatter.svg");
  const std::regex circle("<circle ");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), circle), std::sregex_iterator()), 300);
}

TEST_F(CliRun, SelectionReportListsAllSevenKinds) {
  ASSERT_EQ(status_a_, 0);
  const auto j = read_json(*first_ / "selection_report.json");
  EXPECT_EQ(j["classifier_order"].size(), 7u);
  EXPECT_EQ(j["baseline_accuracy"].size(), 7u);
  EXPECT_FALSE(j["consensus"].empty());
}

TEST_F(CliRun, CensusSumsToNonNoiseSamples) {
  ASSERT_EQ(status_a_, 0);
  const auto j = read_json(*first_ / "clusters.json");
  std::size_t total = 0;
  for (const auto& c : j["census"]) total += c["total"].get<std::size_t>();
  EXPECT_EQ(total + j["noise"].get<std::size_t>(), 300u);
  EXPECT_EQ(j["grid"]["width"], auto_resolution(300));
}

TEST_F(CliRun, TwoMarkersGiveTwoClusters) {
  ASSERT_EQ(status_a_, 0);
  const auto emb = read_text_file(*first_ / "embedding.csv");
  // Markers sit on one sample from each of the first two automatic clusters.
  std::vector<std::pair<double, double>> pts;
  std::istringstream in(emb);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    pts.emplace_back(std::stod(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1)));
  }
  // Small runs form one blob at the automatic resolution; a finer raster
  // splits it into separate components to place markers in.
  ASSERT_EQ(cli("segment --resolution 96 -o " + first_->string(), *first_).status, 0);
  const auto seg = read_json(*first_ / "clusters.json");
  const auto cluster_of = seg["cluster_of"].get<std::vector<int>>();
  std::size_t i0 = 0, i1 = 0;
  for (std::size_t i = 0; i < cluster_of.size(); ++i) {
    if (cluster_of[i] == 0) i0 = i;
    if (cluster_of[i] == 1) i1 = i;
  }
  ASSERT_GE(seg["n_clusters"].get<int>(), 2) << "need two auto clusters to place markers in";
  auto marker = [&](std::size_t i) { return " --marker=" + std::to_string(pts[i].first) + "," + std::to_string(pts[i].second); };
  const auto r = cli("segment --resolution 96" + marker(i0) + marker(i1) + " -o " + first_->string(), *first_);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(read_json(*first_ / "clusters.json")["n_clusters"], 2);
  // Restore the automatic segmentation for the other tests.
  ASSERT_EQ(cli("segment -o " + first_->string(), *first_).status, 0);
}

TEST_F(CliRun, MarkerOnBackgroundIsInvalid) {
  ASSERT_EQ(status_a_, 0);
  const auto r = cli("segment --marker=1e6,1e6 -o " + first_->string(), *first_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("invalid_marker"), std::string::npos) << r.err;
}

TEST_F(CliRun, SkipSelectReusesReport) {
  ASSERT_EQ(status_a_, 0);
  const auto before = sha256_hex(read_text_file(*first_ / "selection_report.json"));
  const auto r = cli("run --seed 3 --skip-select" + kSmallRun + " -o " + first_->string(), *first_);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(sha256_hex(read_text_file(*first_ / "selection_report.json")), before);
  EXPECT_FALSE(read_json(*first_ / "manifest.json")["output_hashes"].contains("selection_report.json"));
}

TEST_F(CliRun, StageCommandsReproduceRun) {
  ASSERT_EQ(status_a_, 0);
  const auto dir = scratch("stages");
  const std::string common = " --seed 3 --threads 1 -o " + dir.string();
  ASSERT_EQ(cli("generate --n-samples 300" + common, dir).status, 0);
  ASSERT_EQ(cli("select" + common, dir).status, 0);
  ASSERT_EQ(cli("embed --n-iter 300" + common, dir).status, 0);
  ASSERT_EQ(cli("segment" + common, dir).status, 0);
  const auto r = cli("profile" + common, dir);
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"cohort.csv", "selection_report.json", "embedding.csv", "clusters.json", "profiles.json"})
    EXPECT_EQ(read_text_file(dir / f), read_text_file(*second_ / f)) << f;
}

}  // namespace
}  // namespace cogsub
