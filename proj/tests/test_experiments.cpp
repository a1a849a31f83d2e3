#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "exdist/experiments.hpp"

using namespace exdist;
namespace ex = exdist::experiments;
using nlohmann::json;

namespace {
ex::Config named(const std::string& name) { return ex::Config::from_json(*ex::find_config(name)); }

std::string error_path(const json& j) {
  try {
    ex::run(ex::Config::from_json(j));
  } catch (const ex::ConfigError& e) {
    return e.path();
  }
  return "<none>";
}
}  // namespace

TEST(Catalog, NamesAreUniqueAndParse) {
  std::set<std::string> names;
  for (const auto& j : ex::catalog()) {
    const auto c = ex::Config::from_json(j);
    EXPECT_TRUE(names.insert(c.name).second) << c.name;
    EXPECT_FALSE(c.anchor.empty()) << c.name;
    if (ex::Config::stochastic(c.kind)) EXPECT_TRUE(c.seed.has_value()) << c.name;
  }
  EXPECT_GE(names.size(), 12u);
  EXPECT_FALSE(ex::find_config("no-such-experiment").has_value());
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_EQ(error_path({{"name", "x"}}), "kind");
  EXPECT_EQ(error_path({{"kind", "teleport"}}), "kind");
  EXPECT_EQ(error_path({{"kind", "modulus"}, {"colour", 1}}), "colour");
  EXPECT_EQ(error_path({{"kind", "modulus"}, {"tol", 2.0}}), "tol");
  EXPECT_EQ(error_path({{"kind", "covering"}, {"params", {{"maps", "identity"}}}}), "seed");
  EXPECT_EQ(error_path({{"kind", "covering"}, {"seed", -3}}), "seed");
}

TEST(Config, UnknownParameterNamesItsPath) {
  json j = *ex::find_config("rectangle");
  j["params"]["scene"]["widht"] = 1.0;
  EXPECT_EQ(error_path(j), "params.scene.widht");
}

TEST(Config, RoundTrip) {
  const auto c = named("eggyolk-diag");
  const auto back = ex::Config::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Run, EmptyFamilyHasModulusZero) {
  const auto out = ex::run(named("empty-family"));
  EXPECT_TRUE(out.results["invariants"]["ok"].get<bool>());
  EXPECT_EQ(out.results["result"]["levels"][0]["value"].get<double>(), 0.0);
  EXPECT_TRUE(out.results["result"]["levels"][0]["infeasible"].get<bool>());
}

TEST(Run, SeededRunsAreReproducible) {
  auto a = ex::run(named("eggyolk-diag")).results;
  auto b = ex::run(named("eggyolk-diag")).results;
  io::extract_timings(a);
  io::extract_timings(b);
  EXPECT_EQ(a.dump(), b.dump());
  auto cfg = named("eggyolk-diag");
  cfg.seed = 8;
  auto c = ex::run(cfg).results;
  io::extract_timings(c);
  EXPECT_NE(a.dump(), c.dump());
}

TEST(Run, ResultSchemaAndArtifacts) {
  const auto out = ex::run(named("rectangle"));
  EXPECT_EQ(out.results["schema"], ex::kSchema);
  EXPECT_EQ(out.results["config"]["name"], "rectangle");
  const auto dir = std::filesystem::temp_directory_path() / "exdist-artifacts-test";
  std::filesystem::remove_all(dir);
  ex::write(out, dir);
  for (const char* f : {"results.json", "timings.json", "data.csv", "figure.svg"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto results = json::parse(io::read_file(dir / "results.json"));
  EXPECT_FALSE(results.contains("seconds"));
  EXPECT_TRUE(json::parse(io::read_file(dir / "timings.json")).contains("seconds"));
  std::filesystem::remove_all(dir);
}

TEST(Io, TimingsAreExtractedRecursively) {
  json j = {{"seconds", 1.5}, {"a", {{"seconds", 2.0}, {"v", 3}}}, {"b", json::array({json{{"seconds", 4.0}}, 5})}};
  const json t = io::extract_timings(j);
  EXPECT_EQ(j, (json{{"a", {{"v", 3}}}, {"b", json::array({json::object(), 5})}}));
  EXPECT_EQ(t["seconds"], 1.5);
  EXPECT_EQ(t["a"]["seconds"], 2.0);
  EXPECT_EQ(t["b"][0]["seconds"], 4.0);
}

TEST(Io, CsvQuotesAndPrecision) {
  io::Csv csv({"a", "b"});
  csv.row(std::string("x,y"), 0.1);
  EXPECT_EQ(csv.str(), "a,b\n\"x,y\",0.10000000000000001\n");
  EXPECT_THROW(csv.row(1), std::logic_error);
}
