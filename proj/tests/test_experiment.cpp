#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pwsampling/experiment.hpp"

using namespace pws;

namespace {

ExperimentConfig parse(const std::string& text) { return parse_config_text(text, "test.json"); }

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::string file_contents(const RunOutput& out, const std::string& name) {
  for (const auto& [n, c] : out.files)
    if (n == name) return c;
  return "";
}

}  // namespace

TEST(Config, MinimalCircle) {
  const auto c = parse(R"({"seed": 3, "backend": "circle", "circle": {"n": 16}})");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.op.backend, Backend::circle);
  EXPECT_EQ(c.op.n, 16);
  EXPECT_EQ(c.op.h, 1.0);
  EXPECT_EQ(c.schedule, (std::vector<int>{4, 8, 16, 32}));
}

TEST(Config, Rejections) {
  EXPECT_NE(error_of(R"({"backend": "circle", "circle": {"n": 8}})").find("seed"), std::string::npos);
  EXPECT_NE(error_of(R"({"seed": -1, "backend": "circle", "circle": {"n": 8}})").find("seed"), std::string::npos);
  EXPECT_NE(error_of(R"({"seed": 1, "backend": "circle", "circle": {"n": 8, "size": 3}})").find("circle.size"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"seed": 1, "backend": "circle", "circle": {"n": 8}, "colour": 1})").find("colour"),
            std::string::npos);
  EXPECT_NE(error_of("{\"seed\": 1,\n \"backend\": }").find("test.json:2:"), std::string::npos);
  EXPECT_NE(error_of(R"({"seed": 1, "backend": "circle", "circle": {"n": "eight"}})").find("circle.n"),
            std::string::npos);
  EXPECT_FALSE(error_of(R"({"seed": 1, "backend": "circle", "circle": {"n": 8}, "omega": 1, "band_dimension": 2})")
                   .empty());
  EXPECT_FALSE(error_of(R"({"seed": 1, "backend": "circle", "circle": {"n": 8}, "verify": {"suites": ["x"]}})")
                   .empty());
  EXPECT_FALSE(error_of(R"({"seed": 1, "backend": "graph", "graph": {"n": 4}})").empty());
}

TEST(Config, ResolvedConfigRoundTrips) {
  const auto c = parse(R"({"seed": 11, "backend": "heisenberg",
      "heisenberg": {"t_extent": 2, "xy_extent": 2, "h": 0.5},
      "sampling": {"levels": [1, 0]}, "band_dimension": 5, "schedule": [1, 2]})");
  const Json r = resolved_config(c);
  const auto again = parse_config(r);
  EXPECT_EQ(resolved_config(again).dump(), r.dump());
  EXPECT_EQ(config_hash(again), config_hash(c));
  auto other = c;
  other.seed = 12;
  EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Commands, BuildIsDeterministic) {
  const auto c = parse(R"({"seed": 1, "backend": "circle", "circle": {"n": 8}})");
  const auto a = cmd_build(c), b = cmd_build(c);
  const std::string mtx = file_contents(a, "operator.mtx");
  EXPECT_EQ(mtx, file_contents(b, "operator.mtx"));
  EXPECT_NE(mtx.find("\n8 8 16\n"), std::string::npos);
  EXPECT_EQ(a.operator_fingerprint, b.operator_fingerprint);
}

TEST(Commands, ReconstructFullSampling) {
  const auto c = parse(R"({"seed": 4, "backend": "circle", "circle": {"n": 32}, "band_dimension": 9,
      "schedule": [1, 2, 4]})");
  const auto out = cmd_reconstruct(c, true);
  EXPECT_EQ(out.exit_code, 0);
  const auto report = Json::parse(file_contents(out, "report.json"));
  EXPECT_EQ(report["verdict"], "converged");
}

TEST(Commands, ReconstructAliasedFailsWhenConvergenceExpected) {
  const auto c = parse(R"({"seed": 4, "backend": "circle", "circle": {"n": 32}, "band_dimension": 9,
      "sampling": {"levels": [2]}, "schedule": [1, 2, 4]})");
  EXPECT_EQ(cmd_reconstruct(c, true).exit_code, 1);
  EXPECT_EQ(cmd_reconstruct(c, false).exit_code, 0);
}

TEST(Commands, VerifyDefaultSuitesPass) {
  const auto c = parse(R"({"seed": 2, "backend": "circle", "circle": {"n": 32}, "band_dimension": 7,
      "sampling": {"levels": [1]},
      "verify": {"suites": ["symmetry", "power_inequality", "bernstein", "uniqueness", "plancherel_polya",
                            "norm_equivalence"],
                 "power_inequality": {"count": 10, "n": 12},
                 "norm_equivalence": {"trials": 50}}})");
  const auto out = cmd_verify(c);
  EXPECT_EQ(out.exit_code, 0) << file_contents(out, "verify.csv");
  EXPECT_EQ(file_contents(out, "verify.csv").rfind("suite,property,parameter,value,asserted,pass\n", 0), 0u);
}

TEST(Commands, CommitWritesManifest) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "pws_commit_test";
  fs::remove_all(dir);
  RunOutput out;
  out.add("a.csv", "index,value\n0,1\n");
  const auto names = commit_outputs(dir.string(), "test", Json{{"seed", 1}}, out);
  EXPECT_EQ(names, (std::vector<std::string>{"a.csv", "config.resolved.json", "manifest.json"}));
  std::ifstream is(dir / "manifest.json");
  const auto manifest = Json::parse(is);
  EXPECT_EQ(manifest["files"].size(), 2u);
  EXPECT_EQ(manifest["files"][0]["name"], "a.csv");
  EXPECT_EQ(manifest["files"][0]["bytes"], 16);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".partial");
  fs::remove_all(dir);
}
