#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "polarred/flows.hpp"
#include "polarred/reduction.hpp"
#include "polarred/worlds.hpp"

namespace polarred {

enum ExitCode : int { Pass = 0, VerdictFailure = 2, InputFailure = 3, NumericalFailure = 4 };

/// Every tolerance and budget a verdict depends on. Echoed into each report.
struct Settings {
  std::size_t seed_index = 0;
  double tol = 1e-9;                // Jacobi, invariance, canonicity
  double antisymmetry_tol = 1e-12;
  double leaf_tol = 1e-8;           // drift, replay, well-definedness, transport, pullback
  double omega_tol = 1e-12;         // reduced form against the oracle
  double conditioning = 1e-6;       // sigma_min / sigma_max of the reduced form
  RankSettings rank;
  FlowOptions flow;
  std::optional<std::size_t> budget_points, budget_segments;
  std::optional<std::uint64_t> rng_seed;
  unsigned threads = 0;
  std::size_t check_points = 50;
  std::size_t check_triples = 50;
  std::size_t distribution_points = 100;
  std::size_t base_points = 20;
  bool force = false;
  bool trivial_group = false;
  std::optional<std::vector<double>> target;  // leaf membership query
};

struct RunReport {
  nlohmann::ordered_json body;     // everything except timings
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  int exit_code = Pass;
  std::string summary;             // one human-readable line
  std::string cloud_csv;           // leaf and reduce
  std::string table_csv;           // verdicts as CSV

  std::string json() const;        // body plus the timings block
};

/// 64-bit FNV-1a of the canonical scenario text, as 16 hex digits.
std::string content_hash(const Scenario& s);

RunReport cmd_check(const Scenario& s, const Settings& settings);
RunReport cmd_leaf(const Scenario& s, const Settings& settings);
RunReport cmd_reduce(const Scenario& s, const Settings& settings);

/// Report for a failure that happened before any command ran (e.g. loading).
RunReport error_report(const std::string& command, const std::exception& e);

}  // namespace polarred
