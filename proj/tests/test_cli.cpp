#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "app.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using polyeit::cli::run;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("polyeit_cli_" + std::string(
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const json& j, const std::string& name = "c.json") {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  static json base() {
    return json::parse(R"({
      "domain": {"kind": "unit_square"},
      "inclusion": {"vertices": [[-0.3, -0.2], [0.35, -0.25], [0.05, 0.4]], "k": 2.0},
      "mesh": {"h": 0.1, "h_min": 0.0125},
      "data": {"f": {"type": "x"}, "g": {"type": "y"}},
      "study": {"V": [[0.18, -0.3], [0.42, 0.12], [-0.24, 0.36]], "t_list": [0.1, 0.05, 0.025, 0.0125]}
    })");
  }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  json manifest(const fs::path& d) { return json::parse(std::ifstream(d / "manifest.json")); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(CliHash, Sha256KnownVector) {
  EXPECT_EQ(polyeit::cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(Cli, MeshWritesFileAndManifest) {
  const auto cfg = config(base());
  const auto out = (dir_ / "run1").string();
  ASSERT_EQ(call({"mesh", cfg, "--out", out}), 0) << err_.str();
  ASSERT_TRUE(fs::exists(dir_ / "run1" / "mesh.txt"));
  const auto m = manifest(dir_ / "run1");
  EXPECT_EQ(m["subcommand"], "mesh");
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["path"], "mesh.txt");
  EXPECT_EQ(m["outputs"][0]["sha256"], polyeit::cli::sha256_hex(slurp(dir_ / "run1" / "mesh.txt")));
  EXPECT_EQ(slurp(dir_ / "run1" / "mesh.txt").rfind("NODES ", 0), 0u);
}

TEST_F(Cli, RerunGivesIdenticalChecksums) {
  const auto cfg = config(base());
  for (const std::string sub : {"mesh", "deriv-check"}) {
    ASSERT_EQ(call({sub, cfg, "--out", (dir_ / (sub + "a")).string()}), 0) << err_.str();
    ASSERT_EQ(call({sub, cfg, "--out", (dir_ / (sub + "b")).string()}), 0) << err_.str();
    const auto a = manifest(dir_ / (sub + "a")), b = manifest(dir_ / (sub + "b"));
    EXPECT_EQ(a["config_hash"], b["config_hash"]);
    ASSERT_EQ(a["outputs"].size(), b["outputs"].size());
    for (std::size_t i = 0; i < a["outputs"].size(); ++i) EXPECT_EQ(a["outputs"][i]["sha256"], b["outputs"][i]["sha256"]) << sub;
  }
}

TEST_F(Cli, MissingInclusionNamesField) {
  json j = base();
  j.erase("inclusion");
  EXPECT_EQ(call({"deriv-check", config(j), "--out", (dir_ / "x").string()}), 2);
  EXPECT_NE(err_.str().find("inclusion"), std::string::npos) << err_.str();
}

TEST_F(Cli, BadValueNamesField) {
  json j = base();
  j["mesh"]["h"] = -0.1;
  EXPECT_EQ(call({"mesh", config(j), "--out", (dir_ / "x").string()}), 2);
  EXPECT_NE(err_.str().find("h"), std::string::npos) << err_.str();
  j = base();
  j["inclusion"]["vertices"] = "oops";
  EXPECT_EQ(call({"mesh", config(j), "--out", (dir_ / "x").string()}), 2);
  EXPECT_NE(err_.str().find("inclusion.vertices"), std::string::npos) << err_.str();
}

TEST_F(Cli, InadmissibleInclusionIsInvalid) {
  json j = base();
  j["inclusion"]["vertices"] = json::parse("[[0.98, 0.0], [0.6, -0.3], [0.6, 0.3]]");
  EXPECT_EQ(call({"solve", config(j), "--out", (dir_ / "x").string()}), 2);
  EXPECT_NE(err_.str().find("margin"), std::string::npos) << err_.str();
}

TEST_F(Cli, UsageErrors) {
  const auto cfg = config(base());
  EXPECT_EQ(call({"bogus", cfg}), 1);
  EXPECT_NE(err_.str().find("unknown subcommand"), std::string::npos);
  EXPECT_EQ(call({}), 1);
  EXPECT_EQ(call({"mesh", cfg, "--no-such-flag"}), 1);
  EXPECT_EQ(call({"mesh", (dir_ / "missing.json").string()}), 2);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(call({"mesh", (dir_ / "broken.json").string()}), 2);
}

TEST_F(Cli, DryRunWritesNothing) {
  const auto out = dir_ / "dry";
  EXPECT_EQ(call({"deriv-check", config(base()), "--out", out.string(), "--dry-run"}), 0) << err_.str();
  EXPECT_FALSE(out_.str().empty());
  EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST_F(Cli, OverridesChangeTheConfig) {
  const auto cfg = config(base());
  ASSERT_EQ(call({"mesh", cfg, "--out", (dir_ / "a").string()}), 0);
  ASSERT_EQ(call({"mesh", cfg, "--out", (dir_ / "b").string(), "--set", "mesh.h=0.2", "--set", "mesh.h_min=0.05"}), 0)
      << err_.str();
  const auto a = manifest(dir_ / "a"), b = manifest(dir_ / "b");
  EXPECT_NE(a["config_hash"], b["config_hash"]);
  EXPECT_EQ(b["config"]["mesh"]["h"], 0.2);
  EXPECT_LT(fs::file_size(dir_ / "b" / "mesh.txt"), fs::file_size(dir_ / "a" / "mesh.txt"));
}

TEST_F(Cli, SolveAndOperators) {
  const auto cfg = config(base());
  ASSERT_EQ(call({"solve", cfg, "--out", (dir_ / "s").string()}), 0) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "s" / "field.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "s" / "norms.csv"));
  ASSERT_EQ(call({"dtn", cfg, "--out", (dir_ / "d").string(), "--set", "basis.n_max=2"}), 0) << err_.str();
  const std::string dtn = slurp(dir_ / "d" / "dtn.csv");
  EXPECT_EQ(dtn.rfind("i,j,value\n", 0), 0u);
  EXPECT_EQ(std::count(dtn.begin(), dtn.end(), '\n'), 1 + 25);
}
