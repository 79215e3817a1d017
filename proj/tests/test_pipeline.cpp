#include <string>

#include "doctest.h"
#include "json.hpp"
#include "polarred/errors.hpp"
#include "polarred/pipeline.hpp"

using namespace polarred;
using json = nlohmann::json;

TEST_CASE("content hash") {
  const std::string h = content_hash(world_r3());
  CHECK(h.size() == 16);
  CHECK(h == content_hash(parse_scenario(serialize(world_r3()))));
  Scenario s = world_r3();
  s.budget.points = 999;
  CHECK(content_hash(s) != h);
}

TEST_CASE("check report layout") {
  const RunReport r = cmd_check(world_r3(), {});
  CHECK(r.exit_code == Pass);
  const std::string text = r.json();
  // timings come last so they can be cut off for comparisons
  CHECK(text.find("\"timings\"") > text.find("\"exit_code\""));
  const json j = json::parse(text);
  CHECK(j["scenario"]["name"] == "r3");
  CHECK(j["settings"]["tol"] == 1e-9);
  CHECK(j["stages"]["distribution"]["generic_rank"] == 2);
  CHECK(j["outcome"] == "pass");
  CHECK(r.table_csv.rfind("name,value,threshold,pass\nantisymmetry,0,<1e-12,true\n", 0) == 0);
  CHECK(r.summary == "check r3: pass");
}

TEST_CASE("input problems map to exit code 3") {
  Settings s;
  s.seed_index = 7;
  const RunReport bad_seed = cmd_leaf(world_r3(), s);
  CHECK(bad_seed.exit_code == InputFailure);
  CHECK(json::parse(bad_seed.json())["error"]["where"] == "--seed-index");

  Settings t;
  t.target = std::vector<double>{1, 2};
  CHECK(cmd_leaf(world_r3(), t).exit_code == InputFailure);

  Settings z;
  z.budget_points = 0;
  CHECK(cmd_leaf(world_r3(), z).exit_code == InputFailure);

  const RunReport e = error_report("check", InputError("line 3", "bad"));
  CHECK(e.exit_code == InputFailure);
  CHECK(json::parse(e.json())["error"]["kind"] == "input");
  CHECK(error_report("reduce", RankJump("x")).exit_code == NumericalFailure);
}

TEST_CASE("leaf command") {
  Settings s;
  s.budget_points = 1;
  const RunReport r = cmd_leaf(world_r3(), s);
  CHECK(r.exit_code == Pass);
  CHECK(r.cloud_csv == "x,y,z\n0,0,0\n");
  CHECK(json::parse(r.json())["stages"]["closure"]["status"] == "not-applicable");

  Settings m;
  m.budget_points = 50;
  m.target = std::vector<double>{2, 5, -2};
  const json j = json::parse(cmd_leaf(world_r3(), m).json());
  CHECK(j["stages"]["membership"]["reached"] == true);
}

TEST_CASE("failed checks gate the reduction unless forced") {
  Scenario bad;
  for (const auto& s : world_regressions())
    if (s.name == "corrupted_r3") bad = s;
  const RunReport refused = cmd_reduce(bad, {});
  CHECK(refused.exit_code == VerdictFailure);
  const json j = json::parse(refused.json());
  CHECK(j["outcome"] == "refused");
  CHECK_FALSE(j["stages"].contains("leaf"));

  Settings force;
  force.force = true;
  force.budget_points = 64;
  const json f = json::parse(cmd_reduce(bad, force).json());
  CHECK(f["stages"].contains("leaf"));
  CHECK(f["exit_code"] != 0);
}

TEST_CASE("budget overrides and rng seed reach the leaf") {
  Settings s;
  s.budget_points = 40;
  s.budget_segments = 8;
  s.rng_seed = 3;
  const json j = json::parse(cmd_leaf(world_t4_circle(), s).json());
  CHECK(j["stages"]["leaf"]["points"] == 40);
  CHECK(j["stages"]["leaf"]["chains"] == 5);
  CHECK(j["stages"]["leaf"]["rng_seed"] == 3);
  CHECK(j["stages"]["closure"]["status"] == "insufficient-cloud");
}
