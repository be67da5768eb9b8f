#include "homog/study.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

using namespace homog;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// The error validate() raises, if any.
std::optional<ErrorKind> kind_of(const StudyConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

/// A constant-coefficient run small enough for a unit test.
StudyConfig small_constant() {
  StudyConfig c;
  c.name = "constant";
  c.tensor = "constant:2,0.3,0.3,1.5";
  c.epsilons = {0.025, 0.02};
  c.two_scale_cells = 16;
  c.fiber_modes = 8;
  c.test_functions = {"1", "sin(2*pi*x1)"};
  return c;
}

}  // namespace

TEST(StudyConfig, JsonRoundTripKeepsTheHash) {
  StudyConfig c;
  c.epsilons = {0.02, 0.01};
  c.seeds = {1, 7};
  c.model = "warped";
  const auto back = StudyConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
  auto moved = c;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(moved.hash(), c.hash());
  c.alpha = 0.75;
  EXPECT_NE(back.hash(), c.hash());
}

TEST(StudyConfig, PartialJsonFillsDefaults) {
  const auto c = StudyConfig::from_json(Json::parse(R"({"name": "x", "epsilons": [0.02]})"));
  EXPECT_EQ(c.name, "x");
  EXPECT_EQ(c.epsilons.size(), 1u);
  EXPECT_EQ(c.tensor, StudyConfig{}.tensor);
}

TEST(StudyConfig, UnknownKeyIsRejected) {
  try {
    (void)StudyConfig::from_json(Json::parse(R"({"epsilon": [0.02]})"));
    FAIL() << "expected an InvalidConfig error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
  }
}

TEST(StudyConfig, ValidationGuards) {
  EXPECT_EQ(kind_of(StudyConfig{}), std::nullopt);  // the defaults are valid

  auto coarse = StudyConfig{};
  coarse.points_per_epsilon = 4;
  EXPECT_EQ(kind_of(coarse), ErrorKind::InvalidConfig);

  auto big = StudyConfig{};
  big.epsilons = {0.002};
  EXPECT_EQ(kind_of(big), ErrorKind::InvalidConfig);  // a 4000^2 mesh needs about 11 GB
  big.memory_limit_mb = 1e6;
  EXPECT_EQ(kind_of(big), std::nullopt);

  auto loose = StudyConfig{};
  loose.epsilons = {0.1};
  EXPECT_EQ(kind_of(loose), ErrorKind::ScaleOrderViolated);

  auto exponents = StudyConfig{};
  exponents.alpha = 0.5;  // alpha must exceed beta
  EXPECT_EQ(kind_of(exponents), ErrorKind::ExponentOrderViolated);

  auto load = StudyConfig{};
  load.load = "sin(";
  EXPECT_EQ(kind_of(load), ErrorKind::InvalidConfig);
}

TEST(Study, MeshFollowsPointsPerEpsilon) {
  StudyConfig c;
  EXPECT_EQ(c.mesh_cells(0.02), 400);
  EXPECT_EQ(c.mesh_cells(0.005), 1600);
  c.points_per_epsilon = 10;
  EXPECT_EQ(c.mesh_cells(0.02), 500);
}

TEST(Study, VerdictRules) {
  StudyConfig c;
  c.test_functions = {"1"};
  auto row = [](double gap, double pairing) {
    StudyRow r;
    r.l2_gap = gap;
    r.pairings = {pairing};
    return r;
  };
  EXPECT_TRUE(judge_study(c, {row(1.0, 1.0), row(0.5, 0.5), row(0.3, 0.2)}, true).passed);
  EXPECT_FALSE(judge_study(c, {row(1.0, 1.0), row(0.5, 0.5), row(0.4, 0.2)}, true).passed);  // ratio 0.4
  EXPECT_FALSE(judge_study(c, {row(1.0, 1.0), row(0.5, 1.1), row(0.3, 0.2)}, true).passed);  // pairing up
  EXPECT_TRUE(judge_study(c, {row(1e-12, 1.0), row(2e-12, 1.0)}, false).passed);
  EXPECT_FALSE(judge_study(c, {row(1e-12, 1.0), row(1e-6, 1.0)}, false).passed);
}

TEST(Study, ConstantTensorRunIsExactAndReproducible) {
  const auto dir = std::filesystem::temp_directory_path() / "homog_test_study";
  std::filesystem::remove_all(dir);
  auto c = small_constant();
  c.output_dir = (dir / "a").string();
  const auto first = run_homogenization_study(c);
  c.output_dir = (dir / "b").string();
  const auto second = run_homogenization_study(c);

  EXPECT_TRUE(first.passed);
  ASSERT_EQ(first.rows.size(), 2u);
  for (const auto& r : first.rows) {
    EXPECT_LT(r.l2_gap, 1e-9);
    EXPECT_GT(r.star_norm, 0.0);
  }
  EXPECT_LT(first.two_scale.residual, 1e-9);

  const std::string csv = read_file(dir / "a" / "constant.csv");
  EXPECT_EQ(csv, read_file(dir / "b" / "constant.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), study_csv_header(c));
  const auto j = Json::parse(read_file(dir / "a" / "constant.json"));
  EXPECT_EQ(j["config_hash"], c.hash());
  EXPECT_TRUE(j["passed"].get<bool>());
  std::filesystem::remove_all(dir);
}

TEST(Study, FailedRunRecordsTheError) {
  const auto dir = std::filesystem::temp_directory_path() / "homog_test_study_error";
  std::filesystem::remove_all(dir);
  auto c = small_constant();
  c.name = "broken";
  c.model = "no-such-model";
  c.output_dir = dir.string();
  EXPECT_THROW(run_homogenization_study(c), Error);
  const auto j = Json::parse(read_file(dir / "broken.json"));
  EXPECT_NE(j["error"].get<std::string>().find("no-such-model"), std::string::npos);
  std::filesystem::remove_all(dir);
}
