// One PASS/FAIL line per acceptance criterion. argv[1], when given, is the
// command-line tool; exit codes and determinism are then checked through it.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polarred/errors.hpp"
#include "polarred/expr.hpp"
#include "polarred/pipeline.hpp"
#include "polarred/worlds.hpp"

using namespace polarred;
using json = nlohmann::json;
using Eigen::VectorXd;

namespace {

std::string cli;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

json parsed(const RunReport& r) { return json::parse(r.json()); }

double stage_value(const json& r, const std::string& verdict) {
  for (const auto& v : r["verdicts"])
    if (v["name"] == verdict) return v.contains("value") ? v["value"].get<double>() : (v["pass"].get<bool>() ? 0 : 1);
  return std::nan("");
}

// rank of the distribution at `count` uniformly random points of the box or torus
std::pair<std::size_t, std::size_t> random_ranks(const World& w, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t lo = w.chart->dim(), hi = 0;
  for (std::size_t k = 0; k < count; ++k) {
    VectorXd x(static_cast<Eigen::Index>(w.chart->dim()));
    for (std::size_t i = 0; i < w.chart->dim(); ++i) {
      const auto& a = w.chart->axis(i);
      x[static_cast<Eigen::Index>(i)] = a.period ? *a.period * u(rng) : a.lo + (a.hi - a.lo) * u(rng);
    }
    const std::size_t r = distribution_at(Point(w.chart, x), w.family, w.poisson).rank();
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::string& args) {
  const std::string path = "acceptance_cli_out.txt";
  const std::string cmd = "\"" + cli + "\" " + args + " > " + path + " 2>/dev/null";
  const int st = std::system(cmd.c_str());
  Proc p;
  p.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  p.out = s.str();
  std::remove(path.c_str());
  return p;
}

std::string without_timings(const std::string& text) {
  const auto at = text.find("\n  \"timings\"");
  return at == std::string::npos ? text : text.substr(0, at);
}

Outcome criterion1() {
  Outcome o;
  const World w = compile(world_r3());
  const auto [lo, hi] = random_ranks(w, 100, 1);
  o.require(lo == 2 && hi == 2, "rank 2 at 100 random points");
  const json r = parsed(cmd_reduce(world_r3(), {}));
  o.require(r["exit_code"] == 0, "reduce passes");
  o.require(r["stages"]["leaf"]["points"] == 1000, "cloud of 1000 points");
  const double drift = stage_value(r, "conserved[x + z]");
  o.require(drift < 1e-8, "max |x + z - c| < 1e-8");
  o.require(r["stages"]["isotropy"]["dim"] == 0, "dim g_rho = 0");
  const double omega = r["stages"]["reduced_form"]["omega_error"].get<double>();
  o.require(omega <= 1e-12, "omega = [[0,1],[-1,0]] to 1e-12");
  const double pull = r["stages"]["reduced_form"]["pullback_residual"].get<double>();
  o.require(pull < 1e-8, "leafchart pullback residual < 1e-8");
  o.note("drift " + num(drift) + ", omega error " + num(omega) + ", pullback " + num(pull));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const World w = compile(world_t4_circle());
  const auto [lo, hi] = random_ranks(w, 100, 2);
  o.require(lo == 3 && hi == 3, "rank 3 at 100 random points");
  const json r = parsed(cmd_reduce(world_t4_circle(), {}));
  o.require(r["exit_code"] == 0, "reduce passes");
  const auto& iso = r["stages"]["isotropy"];
  o.require(iso["dim"] == 1, "dim g_rho = 1");
  double res = 0;
  for (const auto& v : iso["basis_residuals"]) res = std::max(res, v.get<double>());
  o.require(res < 1e-8, "isotropy residuals < 1e-8");
  const auto& rf = r["stages"]["reduced_form"];
  o.require(rf["base_points"].size() == 20, "20 base points");
  bool dims = true;
  for (const auto& b : rf["base_points"]) dims = dims && b["reduced_dim"] == 2;
  o.require(dims, "reduced dimension 2");
  const double cond = rf["min_conditioning"].get<double>();
  o.require(cond > 1e-6, "sigma_min/sigma_max > 1e-6");
  double dist = std::nan("");
  std::string label;
  for (const auto& p : r["stages"]["closure"]["planes"])
    if (p["axes"] == json::array({"t2", "p2"})) {
      label = p["label"];
      dist = p["line_distance"].get<double>();
    }
  o.require(label == "dense-line (Kronecker)", "dense-line in (t2, p2)");
  o.require(r["stages"]["leaf"]["points"] == 1000 && dist < 1e-6, "cover line distance < 1e-6 over 1000 points");
  o.note("isotropy residual " + num(res) + ", conditioning " + num(cond) + ", line distance " + num(dist));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const World w = compile(world_t4_torus());
  const auto [lo, hi] = random_ranks(w, 100, 3);
  o.require(lo == 2 && hi == 2, "rank 2");
  const RunReport rep = cmd_reduce(world_t4_torus(), {});
  const json r = parsed(rep);
  o.require(r["stages"]["isotropy"]["dim"] == 0, "dim g_rho = 0");
  o.require(r["stages"]["closure"]["dense_planes"] == json::array({{"t1", "p1"}, {"t2", "p2"}}),
            "dense-line on both periodic planes");
  o.require(r["outcome"] == "refused" && r.contains("refusal") &&
                r["refusal"].get<std::string>().find("properness warning") != std::string::npos,
            "refusal with the properness warning");
  o.require(rep.exit_code == 2, "exit code 2");
  if (!cli.empty()) {
    const Proc p = run_cli("reduce --world t4_torus");
    o.require(p.code == 2, "tool exit code 2");
    o.note("tool exit " + std::to_string(p.code));
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  Settings s;
  s.trivial_group = true;
  for (std::size_t seed : {0u, 1u}) {
    s.seed_index = seed;
    const json r = parsed(cmd_reduce(world_r3(), s));
    const auto& leaf = r["stages"]["leaf"];
    o.require(r["exit_code"] == 0, "r3 stratification seed " + std::to_string(seed) + " passes");
    o.require(leaf["rank"] == 2, "leaf rank 2");
    o.require(stage_value(r, "conserved[x + z]") < 1e-8, "x + z conserved on the recovered leaf");
    o.require(stage_value(r, "nondegenerate") > 1e-6, "nondegenerate leaf form");
  }
  s.seed_index = 0;
  for (const Scenario& sc : {world_t4_circle(), world_t4_torus()}) {
    const json r = parsed(cmd_leaf(sc, s));
    o.require(r["exit_code"] == 0 && r["stages"]["leaf"]["rank"] == 4, sc.name + " is a single rank-4 leaf");
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  double jac = 0, anti = 0;
  for (const Scenario& sc : builtin_worlds()) {
    if (sc.oracle.expected_failure == "jacobi") continue;
    const json r = parsed(cmd_check(sc, {}));
    const auto& st = r["stages"]["structure"];
    o.require(st["jacobi"]["triples"] == 50 && st["jacobi"]["points"] == 50, sc.name + ": 50 triples x 50 points");
    jac = std::max(jac, st["jacobi"]["max_defect"].get<double>());
    anti = std::max(anti, st["antisymmetry"].get<double>());
  }
  o.require(jac < 1e-9, "Jacobi defect < 1e-9");
  o.require(anti < 1e-12, "antisymmetry < 1e-12");

  // forward-mode gradients against central differences
  const auto chart = std::make_shared<const Chart>(std::vector<Chart::Axis>{{"x", {}, -1, 1}, {"y", {}, -1, 1}, {"z", {}, -1, 1}});
  const std::vector<std::string> exprs = {"sin(x)*exp(y) - z^3",         "log(2 + x^2)*cos(y*z)",
                                          "atan2(y, x + 3)",             "sqrt(2 + sin(x*y))",
                                          "x^2*y - z/(2 + cos(x))",      "tan(0.3*x + 0.2*y*z)",
                                          "exp(-(x^2 + y^2))*sin(3*z)",  "(x - y)^3/(4 + z^2)",
                                          "cos(x)^2 - sin(y)^2 + x*y*z", "log(3 + x*y)/sqrt(5 + z)"};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  double ad = 0;
  for (const auto& e : exprs) {
    const ScalarField f = make_field(e, *chart);
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector3d x(u(rng), u(rng), u(rng));
      const VectorXd g = grad(f, Point(chart, x));
      for (int i = 0; i < 3; ++i) {
        const double h = 1e-5;
        Eigen::Vector3d a = x, b = x;
        a[i] += h;
        b[i] -= h;
        const double fd = (eval(f, Point(chart, a)) - eval(f, Point(chart, b))) / (2 * h);
        ad = std::max(ad, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
      }
    }
  }
  o.require(ad < 1e-6, "AD vs finite differences < 1e-6 over 100 cases");

  // energy and Casimir drift, and reversibility, for durations up to 10
  double drift = 0, back = 0;
  for (const Scenario& sc : {world_r3(), world_t4_circle()}) {
    const World w = compile(sc);
    const VectorXd weights = VectorXd::LinSpaced(static_cast<Eigen::Index>(w.family.size()), 0.7, -0.4);
    std::string energy = "0";
    for (std::size_t i = 0; i < w.family.size(); ++i)
      energy += " + (" + format_number(weights[static_cast<Eigen::Index>(i)]) + ")*(" + to_string(w.family.exprs[i]) + ")";
    std::vector<ScalarField> monitored = {make_field(energy, *w.chart)};
    for (const auto& c : w.casimirs) monitored.push_back(make_field(c, *w.chart));
    for (const auto& c : w.leaf_conserved) monitored.push_back(make_field(c, *w.chart));
    const VectorField X = hamiltonian_vf(w.poisson, w.family.fields, weights);
    for (double D : {1.0, 5.0, 10.0}) {
      const Point seed = w.seeds.back();
      const Trajectory t = integrate({X, D, {}}, seed);
      for (double d : monitor_conservation(t, monitored, true)) drift = std::max(drift, d);
      const Trajectory r = integrate({X, -D, {}}, t.endpoint());
      back = std::max(back, r.endpoint().distance_to(seed));
    }
  }
  o.require(drift < 1e-8, "energy and Casimir drift < 1e-8");
  o.require(back < 1e-8, "reversibility < 1e-8");
  o.note("jacobi " + num(jac) + ", antisymmetry " + num(anti) + ", AD " + num(ad) + ", drift " + num(drift) +
         ", reversal " + num(back));
  return o;
}

Outcome criterion6() {
  Outcome o;
  double worst = 0;
  for (const Scenario& sc : {world_r3(), world_t4_circle()}) {
    const json r = parsed(cmd_reduce(sc, {}));
    const double wd = r["stages"]["reduced_form"]["well_definedness"].get<double>();
    o.require(r["exit_code"] == 0 && wd < 1e-8, sc.name + " substitution residual < 1e-8");
    worst = std::max(worst, wd);
  }
  // the Casimir shifts add substitutions in world 1
  const World w = compile(world_r3());
  LeafBudget b;
  b.points = 64;
  const LeafSample leaf = trace_leaf(w.seeds[0], w.family, w.poisson, b);
  const IsotropyAlgebra iso = isotropy_algebra(leaf, w.action);
  ReducedFormOptions plain, shifted;
  shifted.casimirs = w.casimirs;
  const ReducedFormReport a = reduced_form(w.seeds[0], iso, w.action, w.family, w.poisson, plain);
  const ReducedFormReport c = reduced_form(w.seeds[0], iso, w.action, w.family, w.poisson, shifted);
  o.require(c.substitutions > a.substitutions, "Casimir shifts are substituted");
  o.require(c.well_definedness < 1e-8, "residual under Casimir shifts < 1e-8");
  o.note("max residual " + num(std::max(worst, c.well_definedness)) + ", substitutions " +
         std::to_string(a.substitutions) + " -> " + std::to_string(c.substitutions));
  return o;
}

Outcome criterion7() {
  Outcome o;
  for (const Scenario& sc : world_regressions()) {
    const std::string& f = sc.oracle.expected_failure;
    json r;
    int code = 0;
    if (f == "rank-jump") {
      Settings s;
      s.seed_index = sc.oracle.failure_seed.value_or(0);
      const RunReport rep = cmd_reduce(sc, s);
      r = parsed(rep);
      code = rep.exit_code;
      o.require(code == 4 && r["error"]["kind"] == "rank-jump", sc.name + ": rank-jump with exit 4");
    } else {
      const RunReport rep = cmd_check(sc, {});
      r = parsed(rep);
      code = rep.exit_code;
      bool flagged = false;
      for (const auto& v : r["verdicts"]) flagged = flagged || (v["name"] == f && v["pass"] == false);
      o.require(code == 2 && flagged, sc.name + ": " + f + " verdict fails with exit 2");
    }
    if (!cli.empty()) {
      std::string args = (f == "rank-jump" ? "reduce --seed-index " + std::to_string(sc.oracle.failure_seed.value_or(0))
                                           : std::string("check")) +
                         " --world " + sc.name;
      const int want = f == "rank-jump" ? 4 : 2;
      const Proc p = run_cli(args);
      o.require(p.code == want, sc.name + ": tool exit " + std::to_string(want));
    }
    o.note(sc.name + " exit " + std::to_string(code));
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::string a, b;
  if (!cli.empty()) {
    const Proc p = run_cli("reduce --world t4_circle --rng-seed 12345");
    const Proc q = run_cli("reduce --world t4_circle --rng-seed 12345");
    o.require(p.code == 0 && q.code == 0, "both runs pass");
    a = p.out;
    b = q.out;
  } else {
    Settings s;
    s.rng_seed = 12345;
    a = cmd_reduce(world_t4_circle(), s).json();
    b = cmd_reduce(world_t4_circle(), s).json();
  }
  o.require(!a.empty() && without_timings(a) == without_timings(b), "byte-identical JSON without timings");
  o.require(a.find("\"timings\"") != std::string::npos, "timings block present");
  o.note(std::to_string(without_timings(a).size()) + " bytes compared");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli = argv[1];
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const std::vector<Criterion> all = {
      {1, "R^3 world: planes x + z = c", criterion1, 10},
      {2, "torus circle world: Kronecker submanifold", criterion2, 60},
      {3, "torus two-torus world: properness refusal", criterion3, 0},
      {4, "stratification with the trivial group", criterion4, 0},
      {5, "structure property suites", criterion5, 0},
      {6, "well-definedness of the reduced form", criterion6, 0},
      {7, "regression worlds", criterion7, 0},
      {8, "determinism of reduce", criterion8, 0},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0) o.require(secs < c.budget_seconds, "runtime < " + num(c.budget_seconds) + " s");
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << " (" << num(secs)
              << " s)";
    for (const auto& n : o.notes) std::cout << "; " << n;
    std::cout << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
