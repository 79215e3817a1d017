#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polarred/geometry.hpp"
#include "polarred/reduction.hpp"
#include "polarred/symmetry.hpp"

namespace polarred {

using StringMatrix = std::vector<std::vector<std::string>>;

/// Plain scenario data. Expressions are held as canonical text so that a
/// scenario serializes to exactly one file.
struct Scenario {
  std::string name;
  std::string description;

  std::vector<std::string> coords;
  std::vector<std::optional<double>> periods;
  std::vector<std::array<double, 2>> box;

  StringMatrix tensor;      // either tensor or symplectic is non-empty
  StringMatrix symplectic;

  std::size_t group_dim = 0;
  StringMatrix generators;
  std::vector<std::string> maps;
  bool abelian = true;

  std::vector<std::string> family;
  std::string family_provenance = "user-supplied";

  std::vector<std::vector<double>> seeds;

  struct LeafChartSpec {
    std::size_t seed_index = 0;
    std::vector<std::string> params;
    std::vector<std::string> embedding;
    StringMatrix leaf_form;
    bool operator==(const LeafChartSpec&) const = default;
  };
  std::optional<LeafChartSpec> leafchart;

  struct Budget {
    std::size_t points = 1000;
    std::size_t segments = 64;
    std::uint64_t rng_seed = 0;
    double duration = 1.0;
    bool operator==(const Budget&) const = default;
  } budget;

  struct Oracle {
    std::optional<std::size_t> rank;
    std::optional<std::size_t> isotropy_dim;
    std::optional<std::size_t> reduced_dim;
    std::vector<std::string> casimirs;
    std::vector<std::string> leaf_conserved;
    std::vector<std::array<std::string, 2>> dense_planes;
    std::optional<bool> properness_warning;
    StringMatrix omega;
    std::string expected_failure;  // jacobi | canonical | rank-jump
    std::optional<std::size_t> failure_seed;
    bool operator==(const Oracle&) const = default;
  } oracle;

  bool operator==(const Scenario&) const = default;
};

/// Scenario bound to live objects.
struct World {
  Scenario scenario;
  ChartPtr chart;
  PoissonStructure poisson;
  GroupAction action;
  InvariantFamily family;
  std::vector<Point> seeds;
  std::optional<LeafChart> leafchart;
  std::vector<Expr> casimirs;
  std::vector<Expr> leaf_conserved;
};

/// Validates cross references; errors are InputError with a key path.
World compile(const Scenario& s);

/// Parses and validates scenario text; errors name a line or a key path.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Canonical text: fixed section and key order, canonical expressions.
std::string serialize(const Scenario& s);

/// Rewrites every expression to its canonical printed form.
Scenario canonicalize(Scenario s);

Scenario world_r3();
Scenario world_t4_circle();
Scenario world_t4_torus();
std::vector<Scenario> world_regressions();
std::vector<Scenario> builtin_worlds();
/// Throws InputError for unknown names.
Scenario builtin_world(const std::string& name);

/// Same chart and tensor, trivial group and coordinate functions as family.
World stratification_world(const World& w);

}  // namespace polarred
