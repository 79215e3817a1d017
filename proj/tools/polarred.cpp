#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polarred/errors.hpp"
#include "polarred/pipeline.hpp"
#include "polarred/worlds.hpp"

using namespace polarred;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string scenario_path;
  std::string world;
  std::size_t seed_index = 0;
  std::optional<std::uint64_t> rng_seed;
  std::optional<double> tol;
  std::optional<std::size_t> budget_points, budget_segments;
  std::optional<double> flow_tol;
  std::optional<std::size_t> flow_max_steps;
  std::string out;
  std::string format = "json";
  bool force = false;
  bool trivial_group = false;
  std::vector<double> target;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario_path, "Scenario file");
  cmd->add_option("--world", c.world, "Built-in world name (see `worlds list`)");
  cmd->add_option("--seed-index", c.seed_index, "Index into [seeds].points");
  cmd->add_option("--rng-seed", c.rng_seed, "Overrides budget.rng_seed");
  cmd->add_option("--tol", c.tol, "Structure-check tolerance");
  cmd->add_option("--budget-points", c.budget_points, "Leaf cloud size");
  cmd->add_option("--budget-segments", c.budget_segments, "Flows per chain");
  cmd->add_option("--flow-tol", c.flow_tol, "Integrator absolute and relative tolerance");
  cmd->add_option("--flow-max-steps", c.flow_max_steps, "Integrator step budget");
  cmd->add_option("--out", c.out, "Directory for report.json and CSV files");
  cmd->add_option("--format", c.format, "Standard output format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_flag("--force", c.force, "Continue past failed checks and properness refusals");
  cmd->add_flag("--trivial-group", c.trivial_group, "Replace the group by {e} and the family by the coordinates");
}

Scenario load(const Common& c) {
  if (c.scenario_path.empty() == c.world.empty())
    throw InputError("--scenario", "give exactly one of --scenario or --world");
  return c.world.empty() ? load_scenario(c.scenario_path) : builtin_world(c.world);
}

Settings settings_of(const Common& c) {
  Settings s;
  s.seed_index = c.seed_index;
  s.rng_seed = c.rng_seed;
  if (c.tol) s.tol = *c.tol;
  s.budget_points = c.budget_points;
  s.budget_segments = c.budget_segments;
  if (c.flow_tol) s.flow.atol = s.flow.rtol = *c.flow_tol;
  if (c.flow_max_steps) s.flow.max_steps = *c.flow_max_steps;
  s.force = c.force;
  s.trivial_group = c.trivial_group;
  if (!c.target.empty()) s.target = c.target;
  return s;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("--out", "cannot write " + p.string());
  f << text;
}

int emit(const RunReport& r, const Common& c) {
  std::cerr << r.summary << '\n';
  if (!c.out.empty()) {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    write_file(fs::path(c.out) / "report.json", r.json());
    write_file(fs::path(c.out) / "verdicts.csv", r.table_csv);
    if (!r.cloud_csv.empty()) write_file(fs::path(c.out) / "cloud.csv", r.cloud_csv);
    return r.exit_code;
  }
  if (c.format == "csv")
    std::cout << (r.cloud_csv.empty() ? r.table_csv : r.cloud_csv);
  else
    std::cout << r.json();
  return r.exit_code;
}

template <class Command>
int run(const std::string& name, const Common& c, Command command) {
  RunReport r;
  try {
    r = command(load(c), settings_of(c));
  } catch (const std::exception& e) {
    r = error_report(name, e);
  }
  try {
    return emit(r, c);
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return InputFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical Poisson reduction by optimal momentum maps"};
  app.require_subcommand(1);

  Common check_opts, leaf_opts, reduce_opts;
  CLI::App* check = app.add_subcommand("check", "Structure, invariance and canonicity checks");
  add_common(check, check_opts);
  CLI::App* leaf = app.add_subcommand("leaf", "Trace one fiber of the optimal momentum map");
  add_common(leaf, leaf_opts);
  leaf->add_option("--target", leaf_opts.target, "Membership query point, comma separated")->delimiter(',');
  CLI::App* reduce = app.add_subcommand("reduce", "Full pipeline to the reduced symplectic form");
  add_common(reduce, reduce_opts);

  CLI::App* worlds = app.add_subcommand("worlds", "Built-in scenarios");
  worlds->require_subcommand(1);
  worlds->add_subcommand("list", "Names and descriptions");
  std::string export_name, export_out;
  CLI::App* exp = worlds->add_subcommand("export", "Print or write a canonical scenario file");
  exp->add_option("name", export_name, "World name")->required();
  exp->add_option("--out", export_out, "Directory to write <name>.toml into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : InputFailure;
  }

  if (*check) return run("check", check_opts, cmd_check);
  if (*leaf) return run("leaf", leaf_opts, cmd_leaf);
  if (*reduce) return run("reduce", reduce_opts, cmd_reduce);

  try {
    if (worlds->got_subcommand("list")) {
      for (const auto& s : builtin_worlds()) std::cout << s.name << "\t" << s.description << '\n';
      return 0;
    }
    const std::string text = serialize(builtin_world(export_name));
    if (export_out.empty()) {
      std::cout << text;
    } else {
      fs::create_directories(export_out);
      write_file(fs::path(export_out) / (export_name + ".toml"), text);
    }
    return 0;
  } catch (const InputError& e) {
    std::cerr << "worlds: " << e.where() << ": " << e.what() << '\n';
    return InputFailure;
  }
}
