#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "voterdyn/voterdyn.hpp"

using namespace voterdyn;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
[run]
model = one_way
seed = 5
replications = 3
times = 0.5, 1

[model]
n = 10
p0 = 0.2

[patterns]
pattern = V=2;opinions=+-;edges=0-1
)";

int config_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("voterdyn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VOTERDYN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesAndFillsDefaults) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.model, ModelKind::one_way);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.replications, 3u);
  EXPECT_EQ(c.times, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.n, 10u);
  EXPECT_EQ(c.p0, 0.2);
  EXPECT_EQ(c.pi_plus, 0.8);
  ASSERT_EQ(c.patterns.size(), 1u);
  EXPECT_EQ(c.patterns[0], to_literal(edge_pattern(Opinion::plus, Opinion::minus)));
  EXPECT_EQ(c.acceptance.k_se, 3.0);
}

TEST(Config, RoundTripIsIdentity) {
  auto c = parse_config(kMinimal);
  c.gamma_mp = 0.1 + 0.2;  // not exactly representable in short decimal
  c.acceptance.weights = {1.0, -0.5, 1.0 / 3.0, 2.0};
  c.patterns.push_back(to_literal(triangle_pattern(Opinion::plus, Opinion::minus, Opinion::minus)));
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
  for (const auto& entry : fs::directory_iterator(VOTERDYN_CONFIG_DIR)) {
    const auto once = load_config(entry.path().string());
    EXPECT_EQ(parse_config(serialize_config(once)), once) << entry.path();
  }
}

TEST(Config, DiagnosticsCarryLineNumbers) {
  EXPECT_EQ(config_error_line("[run]\nseed = 1\nbogus = 2\n"), 3);
  EXPECT_EQ(config_error_line("[nope]\n"), 1);
  EXPECT_EQ(config_error_line("[model]\np0 = abc\n"), 2);
  EXPECT_EQ(config_error_line("[model]\nn = -3\n"), 2);
  EXPECT_EQ(config_error_line("[run]\nseed = 1\nseed = 2\n"), 3);
  EXPECT_EQ(config_error_line("[patterns]\n\npattern = V=2; opinions=++; edges=0-0\n"), 3);
  EXPECT_EQ(config_error_line("[run]\nmodel = three_way\n"), 2);
  EXPECT_EQ(config_error_line("seed = 1\n"), 1);
  EXPECT_EQ(config_error_line("[run]\njust text\n"), 2);
  EXPECT_EQ(config_error_line("[model]\nhorizon = 1\n[run]\ntimes = 0.5, 2\n"), 4);
  EXPECT_EQ(config_error_line("[run]\ntimes = 1, 0.5\n[model]\nhorizon=2\n"), 2);
  EXPECT_EQ(config_error_line("[model]\np0 = 1.5\n"), 0);  // cross-field: no single line
  try {
    parse_config("[model]\np0 = abc\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.p0"), std::string::npos);
  }
}

TEST(Config, TwoWayTableNeedsRoomForDisjointCopies) {
  const std::string text = "[run]\nmodel = two_way\n[two_way_table]\nn_values = 100, 5\nz = 3\n";
  EXPECT_EQ(config_error_line(text), 4);
  EXPECT_NO_THROW(parse_config("[run]\nmodel = two_way\n[two_way_table]\nn_values = 6\nz = 3\n"));
}

TEST(Records, JsonLinesAndCsv) {
  std::vector<EstimateRecord> recs{EstimateRecord::from("mean_count", {{"t", 1.0}, {"pattern", "V=2; x"}},
                                                        {0.1 + 0.2, 0.25, 10}, 42)};
  recs[0].wall_time = 3.5;
  const auto line = to_jsonl(recs);
  EXPECT_EQ(line.find("wall_time"), std::string::npos);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["value"].get<double>(), 0.1 + 0.2);
  EXPECT_EQ(j["seed"].get<std::uint64_t>(), 42u);
  EXPECT_EQ(recs[0].to_json(true)["wall_time"].get<double>(), 3.5);
  const auto csv = to_csv(recs);
  EXPECT_EQ(csv.rfind("# voterdyn-estimates v1\n", 0), 0u);
  EXPECT_NE(csv.find("0.30000000000000004"), std::string::npos);
  EXPECT_NE(csv.find("\"{\"\"t\"\":1.0"), std::string::npos);
}

TEST(Manifest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Cli, SimulateWritesOneRowPerCheckpoint) {
  const auto dir = scratch("sim1");
  write_file(dir / "c.ini", "[run]\nreplications = 2\ntimes = 0, 0.5, 1\n[model]\nn = 10\n");
  ASSERT_EQ(run_cli("simulate --config " + (dir / "c.ini").string() + " --replications 1 --out " + (dir / "o").string()),
            0);
  const auto csv = read_file(dir / "o" / "counts.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 3);
  EXPECT_EQ(csv.rfind("# voterdyn-counts v1\nreplication,time,pattern,count\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "o" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "o" / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "o" / "estimates.jsonl"));
}

TEST(Cli, OutputsAreIdenticalAcrossRunsAndWorkerCounts) {
  const auto dir = scratch("sim2");
  const std::string cfg = std::string(VOTERDYN_CONFIG_DIR) + "/simulate.ini";
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --workers 1 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --workers 1 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --workers 8 --out " + (dir / "c").string()), 0);
  auto checksums = [&](const char* sub) {
    return nlohmann::json::parse(read_file(dir / sub / "manifest.json"))["checksums"];
  };
  EXPECT_EQ(checksums("a"), checksums("b"));
  EXPECT_EQ(checksums("a"), checksums("c"));
  EXPECT_EQ(checksums("a").size(), 3u);
  EXPECT_EQ(read_file(dir / "a" / "counts.csv"), read_file(dir / "c" / "counts.csv"));
  EXPECT_EQ(read_file(dir / "a" / "estimates.jsonl"), read_file(dir / "c" / "estimates.jsonl"));
  const auto csv = read_file(dir / "a" / "counts.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 100 * 3 * 2);
  const auto manifest = nlohmann::json::parse(read_file(dir / "c" / "manifest.json"));
  EXPECT_EQ(manifest["workers"].get<int>(), 8);
  auto expected = load_config(cfg);
  expected.workers = 8;
  expected.out = (dir / "c").string();
  EXPECT_EQ(parse_config(manifest["config"].get<std::string>()), expected);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  write_file(dir / "bad.ini", "[model]\np0 = two\n");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.ini").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "missing.ini").string()), 3);
  EXPECT_EQ(run_cli("simulate"), 2);
  write_file(dir / "ok.ini", "[run]\nreplications = 2\n[model]\nn = 5\n");
  write_file(dir / "blocker", "");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "ok.ini").string() + " --out " + (dir / "blocker" / "sub").string()),
            3);
  const std::string fclt = std::string(VOTERDYN_CONFIG_DIR) + "/fclt.ini";
  EXPECT_EQ(run_cli("fclt-check --config " + fclt + " --replications 50 --out " + (dir / "f").string()), 2);
  EXPECT_EQ(run_cli("fclt-check --config " + (dir / "ok.ini").string() + " --out " + (dir / "f").string()), 2);
  write_file(dir / "small.ini", "[run]\nmodel = two_way\n[two_way_table]\nn_values = 4\n");
  EXPECT_EQ(run_cli("two-way-table --config " + (dir / "small.ini").string()), 2);
  EXPECT_EQ(run_cli("graphon-check --config " + (dir / "small.ini").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "ok.ini").string() + " --workers 0"), 2);
}

TEST(Cli, GraphonChecksPassAndReportSkippedCells) {
  const auto dir = scratch("graphon");
  const std::string cfgdir = VOTERDYN_CONFIG_DIR;
  EXPECT_EQ(run_cli("graphon-check --config " + cfgdir + "/graphon_flat.ini --replications 20000 --out " +
                    (dir / "flat").string()),
            0);
  EXPECT_EQ(run_cli("graphon-check --config " + cfgdir + "/graphon_early.ini --replications 20000 --out " +
                    (dir / "early").string()),
            0);
  const auto csv = read_file(dir / "early" / "graphon.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 100);
  EXPECT_NE(read_file(dir / "early" / "report.txt").find("skipped"), std::string::npos);
}
