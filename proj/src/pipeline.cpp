#include "polarred/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "polarred/errors.hpp"
#include "polarred/expr.hpp"

namespace polarred {

using json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string RunReport::json() const {
  nlohmann::ordered_json out = body;
  out["timings"] = timings;
  return out.dump(2) + "\n";
}

std::string content_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : serialize(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(VectorXd(m.row(i).transpose())));
  return a;
}

// RFC 4180 field quoting
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + '"';
}

std::string failure_kind(const std::exception& e) {
  if (dynamic_cast<const RankJump*>(&e)) return "rank-jump";
  if (dynamic_cast<const IllConditioned*>(&e)) return "ill-conditioned";
  if (dynamic_cast<const BudgetExhausted*>(&e)) return "budget-exhausted";
  if (dynamic_cast<const IntegrationError*>(&e)) return "integration";
  if (dynamic_cast<const NumericalAbort*>(&e)) return "numerical";
  if (dynamic_cast<const InputError*>(&e)) return "input";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  return "internal";
}

int failure_code(const std::exception& e) {
  if (dynamic_cast<const NumericalAbort*>(&e)) return NumericalFailure;
  if (dynamic_cast<const Error*>(&e)) return InputFailure;
  return 1;
}

json error_json(const std::exception& e) {
  json j;
  j["kind"] = failure_kind(e);
  if (const auto* ie = dynamic_cast<const InputError*>(&e)) j["where"] = ie->where();
  j["message"] = e.what();
  return j;
}

json settings_json(const Settings& s) {
  json j;
  j["seed_index"] = s.seed_index;
  j["tol"] = s.tol;
  j["antisymmetry_tol"] = s.antisymmetry_tol;
  j["leaf_tol"] = s.leaf_tol;
  j["omega_tol"] = s.omega_tol;
  j["conditioning"] = s.conditioning;
  j["rank"] = {{"relative", s.rank.relative}, {"absolute", s.rank.absolute}, {"gap", s.rank.gap}};
  j["flow"] = {{"method", s.flow.method == Method::FixedRK4 ? "rk4" : "rk45"},
               {"step", s.flow.step},
               {"atol", s.flow.atol},
               {"rtol", s.flow.rtol},
               {"max_steps", s.flow.max_steps}};
  j["check_points"] = s.check_points;
  j["check_triples"] = s.check_triples;
  j["distribution_points"] = s.distribution_points;
  j["base_points"] = s.base_points;
  j["force"] = s.force;
  j["trivial_group"] = s.trivial_group;
  return j;
}

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// One run: the world, the report under construction and its verdict list.
class Run {
 public:
  Run(std::string command, const Scenario& s, const Settings& settings) : settings_(settings) {
    report_.body["command"] = command;
    report_.body["scenario"] = {{"name", s.name}, {"hash", content_hash(s)}};
    report_.body["assumptions"] = json::array({"the group action on M is proper (not verified)"});
    report_.body["settings"] = settings_json(settings);
    report_.body["stages"] = json::object();
    report_.body["verdicts"] = json::array();
    scenario_ = s;
  }

  const Settings& settings() const { return settings_; }
  json& stage(const std::string& name) { return report_.body["stages"][name]; }
  RunReport& report() { return report_; }

  void timed(const std::string& name, const std::function<void()>& f) {
    Clock c;
    f();
    report_.timings[name] = c.seconds();
  }

  bool verdict(const std::string& name, double value, double threshold, bool below = true) {
    const bool pass = below ? value < threshold : value > threshold;
    report_.body["verdicts"].push_back(
        {{"name", name}, {"value", value}, {"threshold", threshold}, {"test", below ? "<" : ">"}, {"pass", pass}});
    ok_ = ok_ && pass;
    if (!pass) failed_.push_back(name);
    return pass;
  }

  template <class A, class B>
  bool expect(const std::string& name, const A& observed, const B& expected) {
    const bool pass = observed == expected;
    report_.body["verdicts"].push_back({{"name", name}, {"observed", observed}, {"expected", expected}, {"pass", pass}});
    ok_ = ok_ && pass;
    if (!pass) failed_.push_back(name);
    return pass;
  }

  bool ok() const { return ok_; }
  const std::vector<std::string>& failed() const { return failed_; }

  // Runs body; errors become a report with the matching exit code.
  RunReport finish(const std::function<void()>& body) {
    Clock total;
    std::string outcome;
    try {
      body();
      outcome = refused_ ? "refused" : ok_ ? "pass" : "fail";
      report_.exit_code = ok_ && !refused_ ? Pass : VerdictFailure;
    } catch (const std::exception& e) {
      report_.body["error"] = error_json(e);
      report_.exit_code = failure_code(e);
      outcome = "error";
      message_ = failure_kind(e) + ": " + e.what();
    }
    report_.body["oracle"] = {{"expected_failure", scenario_.oracle.expected_failure}, {"observed_failures", failed_}};
    if (report_.body.contains("error")) report_.body["oracle"]["observed_failures"].push_back(failure_kind_of_error());
    report_.body["outcome"] = outcome;
    report_.body["exit_code"] = report_.exit_code;
    report_.timings["total"] = total.seconds();

    std::string line = report_.body["command"].get<std::string>() + " " + scenario_.name + ": " + outcome;
    if (!failed_.empty()) {
      line += " (failed:";
      for (const auto& f : failed_) line += " " + f;
      line += ")";
    }
    if (!message_.empty()) line += "; " + message_;
    report_.summary = line;

    std::ostringstream csv;
    csv << "name,value,threshold,pass\n";
    for (const auto& v : report_.body["verdicts"]) {
      csv << v["name"].get<std::string>() << ',';
      if (v.contains("value"))
        csv << format_number(v["value"].get<double>()) << ',' << v["test"].get<std::string>()
            << format_number(v["threshold"].get<double>());
      else
        csv << csv_field(v["observed"].dump()) << ',' << csv_field("==" + v["expected"].dump());
      csv << ',' << (v["pass"].get<bool>() ? "true" : "false") << '\n';
    }
    report_.table_csv = csv.str();
    return std::move(report_);
  }

  void refuse(const std::string& message) {
    refused_ = true;
    message_ = message;
    report_.body["refusal"] = message;
  }
  bool refused() const { return refused_; }

 private:
  std::string failure_kind_of_error() const { return report_.body["error"]["kind"].get<std::string>(); }

  Settings settings_;
  Scenario scenario_;
  RunReport report_;
  bool ok_ = true;
  bool refused_ = false;
  std::string message_;
  std::vector<std::string> failed_;
};

World build_world(const Scenario& s, const Settings& settings) {
  World w = compile(s);
  if (settings.trivial_group) w = stratification_world(w);
  return w;
}

// Coordinate probes for the Jacobi test: the family, each coordinate (or its
// sine and cosine on periodic axes) and products of neighbouring coordinates.
std::vector<ScalarField> jacobi_probes(const World& w) {
  std::vector<ScalarField> out = w.family.fields;
  const Chart& c = *w.chart;
  std::vector<std::string> coords;
  for (std::size_t i = 0; i < c.dim(); ++i) {
    const std::string& n = c.names()[i];
    if (c.periodic(i)) {
      coords.push_back("sin(" + n + ")");
      coords.push_back("cos(" + n + ")");
    } else {
      coords.push_back(n);
    }
  }
  for (const auto& t : coords) out.push_back(make_field(t, c));
  for (std::size_t i = 0; i + 1 < coords.size(); ++i)
    out.push_back(make_field("(" + coords[i] + ") * (" + coords[i + 1] + ")", c));
  return out;
}

std::uint64_t rng_seed_of(const Scenario& s, const Settings& settings) {
  return settings.rng_seed.value_or(s.budget.rng_seed);
}

// Structure and action checks; returns the generic distribution rank.
std::size_t run_checks(Run& run, const World& w) {
  const Settings& st = run.settings();
  const SamplingPlan plan = SamplingPlan::halton(w.chart, w.action.dim(), st.distribution_points, 16);
  const std::size_t np = std::min(st.check_points, plan.points.size());

  run.timed("structure", [&] {
    json& j = run.stage("structure");
    j["provenance"] = w.poisson.provenance() == Provenance::InvertedFromSymplectic ? "inverted-from-symplectic" : "given";
    double anti = 0, sym = 0;
    for (std::size_t p = 0; p < np; ++p) {
      anti = std::max(anti, antisymmetry_defect(w.poisson, plan.points[p]));
      sym = std::max(sym, symplectic_residual(w.poisson, plan.points[p]));
    }
    j["antisymmetry"] = anti;
    run.verdict("antisymmetry", anti, st.antisymmetry_tol);
    if (w.poisson.provenance() == Provenance::InvertedFromSymplectic) {
      j["symplectic_residual"] = sym;
      run.verdict("symplectic", sym, st.tol);
    }

    const std::vector<ScalarField> probes = jacobi_probes(w);
    std::mt19937_64 rng(rng_seed_of(w.scenario, st));
    std::uniform_int_distribution<std::size_t> pick(0, probes.size() - 1);
    double worst = 0;
    json located = nullptr;
    for (std::size_t t = 0; t < st.check_triples; ++t) {
      std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
      if (probes.size() >= 3)
        while (b == a) b = pick(rng);
      if (probes.size() >= 3)
        while (c == a || c == b) c = pick(rng);
      for (std::size_t p = 0; p < np; ++p) {
        const double d = jacobi_defect(w.poisson, probes[a], probes[b], probes[c], plan.points[p]);
        if (std::abs(d) > worst) {
          worst = std::abs(d);
          located = {{"f", probes[a].text()},
                     {"g", probes[b].text()},
                     {"h", probes[c].text()},
                     {"point", to_json(plan.points[p].coords())},
                     {"defect", d}};
        }
      }
    }
    j["jacobi"] = {{"triples", st.check_triples}, {"points", np}, {"probes", probes.size()}, {"max_defect", worst}};
    if (!located.is_null()) j["jacobi"]["worst"] = located;
    run.verdict("jacobi", worst, st.tol);
  });

  run.timed("action", [&] {
    json& j = run.stage("action");
    j["group_dim"] = w.action.dim();
    j["abelian"] = w.action.abelian();
    json inv = json::array();
    double worst = 0;
    for (std::size_t i = 0; i < w.family.size(); ++i) {
      const double v = check_invariance(w.family.fields[i], w.action, plan);
      inv.push_back({{"expr", to_string(w.family.exprs[i])}, {"violation", v}});
      worst = std::max(worst, v);
    }
    j["family_provenance"] = w.family.provenance;
    j["invariance"] = inv;
    run.verdict("invariance", worst, st.tol);
    const double canon = check_canonical(w.action, w.poisson, plan);
    j["canonicity"] = canon;
    run.verdict("canonical", canon, st.tol);
    const ActionSelfCheck sc = self_check(w.action, plan);
    j["self_check"] = {{"identity", sc.identity}, {"generators", sc.generators}, {"composition", sc.composition}};
    run.expect("action_self_check", sc.ok(), true);
  });

  std::size_t generic = 0;
  run.timed("distribution", [&] {
    json& j = run.stage("distribution");
    std::size_t lo = w.chart->dim(), hi = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (const auto& p : plan.points) {
      const DistributionFrame f = distribution_at(p, w.family, w.poisson, st.rank);
      lo = std::min(lo, f.rank());
      hi = std::max(hi, f.rank());
      if (f.rank() == hi) worst_gap = std::min(worst_gap, f.span.gap);
    }
    generic = hi;
    j["points"] = plan.points.size();
    j["generic_rank"] = hi;
    j["min_rank"] = lo;
    j["smallest_gap"] = worst_gap;
    if (w.scenario.oracle.rank) run.expect("rank", hi, *w.scenario.oracle.rank);
  });
  return generic;
}

LeafBudget budget_for(const World& w, const Settings& st) {
  LeafBudget b;
  b.points = st.budget_points.value_or(w.scenario.budget.points);
  b.segments = st.budget_segments.value_or(w.scenario.budget.segments);
  b.rng_seed = rng_seed_of(w.scenario, st);
  b.duration = w.scenario.budget.duration;
  b.threads = st.threads;
  b.flow = st.flow;
  if (b.points == 0) throw InputError("--budget-points", "must be at least 1");
  return b;
}

const Point& seed_of(const World& w, const Settings& st) {
  if (st.seed_index >= w.seeds.size())
    throw InputError("--seed-index", "scenario has " + std::to_string(w.seeds.size()) + " seeds");
  return w.seeds[st.seed_index];
}

// Shared by leaf and reduce: check gate, seed screen, trace and closure.
struct LeafStages {
  LeafSample leaf;
  ClosureReport closure;
};

bool check_gate(Run& run, const World& w, std::size_t& generic) {
  generic = run_checks(run, w);
  if (run.ok()) return true;
  if (run.settings().force) return true;
  run.refuse("structure or action checks failed; rerun with --force to continue");
  return false;
}

LeafStages trace_stages(Run& run, const World& w, std::size_t generic) {
  const Settings& st = run.settings();
  const Point& seed = seed_of(w, st);
  const LeafBudget budget = budget_for(w, st);
  LeafStages out;

  run.timed("seed", [&] {
    const DistributionFrame f = distribution_at(seed, w.family, w.poisson, st.rank);
    run.stage("seed") = {{"index", st.seed_index},
                         {"point", to_json(seed.coords())},
                         {"rank", f.rank()},
                         {"singular_values", f.span.singular_values}};
    if (f.rank() < generic)
      throw RankJump("seed " + std::to_string(st.seed_index) + " is degenerate: distribution rank " +
                     std::to_string(f.rank()) + " below the generic rank " + std::to_string(generic));
  });

  run.timed("leaf", [&] {
    out.leaf = trace_leaf(seed, w.family, w.poisson, budget, st.rank);
    json& j = run.stage("leaf");
    j["points"] = out.leaf.size();
    j["chains"] = out.leaf.chains.size();
    j["segments"] = budget.segments;
    j["segment_duration"] = budget.duration;
    j["rng_seed"] = budget.rng_seed;
    j["rank"] = out.leaf.rank;
    if (w.scenario.oracle.rank) run.expect("leaf_rank", out.leaf.rank, *w.scenario.oracle.rank);

    std::vector<std::size_t> probe;
    for (std::size_t i : {std::size_t{1}, out.leaf.size() / 2, out.leaf.size() - 1})
      if (i > 0 && i < out.leaf.size() && std::find(probe.begin(), probe.end(), i) == probe.end()) probe.push_back(i);
    const double replay = replay_discrepancy(out.leaf, probe, w.family, w.poisson, st.flow);
    j["replay"] = {{"indices", probe}, {"discrepancy", replay}};
    run.verdict("replay", replay, st.leaf_tol);

    json cons = json::array();
    auto monitor = [&](const std::vector<Expr>& es, const std::string& role) {
      for (const auto& r : conserved_on_leaf(out.leaf, es, w.family, w.poisson)) {
        cons.push_back({{"expr", r.expr}, {"role", role}, {"drift", r.drift}, {"family_bracket", r.family_bracket}});
        run.verdict("conserved[" + r.expr + "]", r.drift, st.leaf_tol);
      }
    };
    monitor(w.casimirs, "casimir");
    monitor(w.leaf_conserved, "leaf");
    j["conserved"] = cons;
    run.report().cloud_csv = cloud_csv(out.leaf);
  });

  run.timed("closure", [&] {
    out.closure = closure_classifier(out.leaf, *w.chart, st.rank);
    json& j = run.stage("closure");
    j["heuristic"] = true;
    j["status"] = out.closure.status;
    const auto& names = w.chart->names();
    json planes = json::array();
    for (const auto& p : out.closure.planes) {
      json q = {{"axes", {names[p.a], names[p.b]}}, {"label", p.label}, {"projected_rank", p.projected_rank}};
      if (p.projected_rank == 1) {
        q["direction"] = to_json(VectorXd(p.direction));
        q["direction_spread"] = p.direction_spread;
        q["line_distance"] = p.line_distance;
        q["extent"] = p.extent;
        q["strand_gap"] = p.strand_gap;
        q["closing_length"] = p.closing_length ? json(*p.closing_length) : json(nullptr);
        json mr = json::array();
        for (const auto& [n, r] : p.min_returns) mr.push_back({n, r});
        q["min_returns"] = mr;
        q["decay_exponent"] = p.decay_exponent;
        q["boxes"] = p.boxes;
        q["box_dimension"] = p.box_dimension;
      }
      planes.push_back(q);
    }
    j["planes"] = planes;
    std::set<std::pair<std::string, std::string>> seen, want;
    for (const auto& [a, b] : out.closure.dense_planes()) seen.emplace(names[a], names[b]);
    for (const auto& d : w.scenario.oracle.dense_planes) want.emplace(d[0], d[1]);
    auto listed = [](const std::set<std::pair<std::string, std::string>>& ps) {
      json e = json::array();
      for (const auto& [a, b] : ps) e.push_back({a, b});
      return e;
    };
    j["dense_planes"] = listed(seen);
    if (out.closure.status == "ok") run.expect("dense_planes", listed(seen), listed(want));
  });
  return out;
}

}  // namespace

RunReport cmd_check(const Scenario& s, const Settings& settings) {
  Run run("check", s, settings);
  return run.finish([&] {
    const World w = build_world(s, settings);
    run_checks(run, w);
  });
}

RunReport cmd_leaf(const Scenario& s, const Settings& settings) {
  Run run("leaf", s, settings);
  return run.finish([&] {
    const World w = build_world(s, settings);
    std::size_t generic = 0;
    if (!check_gate(run, w, generic)) return;
    const LeafStages ls = trace_stages(run, w, generic);
    if (settings.target) {
      run.timed("membership", [&] {
        const Point& seed = seed_of(w, settings);
        if (settings.target->size() != w.chart->dim())
          throw InputError("--target", "expected " + std::to_string(w.chart->dim()) + " coordinates");
        VectorXd t(static_cast<Eigen::Index>(w.chart->dim()));
        for (std::size_t i = 0; i < w.chart->dim(); ++i) t[static_cast<Eigen::Index>(i)] = (*settings.target)[i];
        const Point target(w.chart, t);
        std::vector<Expr> conserved = w.casimirs;
        conserved.insert(conserved.end(), w.leaf_conserved.begin(), w.leaf_conserved.end());
        const MembershipVerdict v =
            leaf_membership(seed, target, w.family, w.poisson, settings.leaf_tol, 50, conserved, settings.flow);
        json j = {{"target", to_json(target.coords())}, {"reached", v.reached}, {"distance", v.distance}};
        json word = json::array();
        for (const auto& [i, d] : v.word) word.push_back({{"flow", to_string(w.family.exprs[i])}, {"duration", d}});
        j["word"] = word;
        j["semi_decidable"] = "not reached does not prove the points lie on different leaves";
        if (v.certificate)
          j["certificate"] = {{"expr", v.certificate->expr},
                              {"seed_value", v.certificate->seed_value},
                              {"target_value", v.certificate->target_value}};
        run.stage("membership") = j;
      });
    }
  });
}

RunReport cmd_reduce(const Scenario& s, const Settings& settings) {
  Run run("reduce", s, settings);
  return run.finish([&] {
    const World w = build_world(s, settings);
    std::size_t generic = 0;
    if (!check_gate(run, w, generic)) return;
    const LeafStages ls = trace_stages(run, w, generic);
    const Scenario::Oracle& oracle = w.scenario.oracle;

    IsotropyAlgebra iso;
    run.timed("isotropy", [&] {
      iso = isotropy_algebra(ls.leaf, w.action, settings.rank.relative);
      json& j = run.stage("isotropy");
      j["group_dim"] = iso.group_dim;
      j["dim"] = iso.dim;
      j["basis"] = to_json(MatrixXd(iso.basis.transpose()));
      j["singular_values"] = iso.singular_values;
      j["basis_residuals"] = iso.basis_residuals;
      j["rejected_residuals"] = iso.rejected_residuals;
      double worst = 0;
      for (double r : iso.basis_residuals) worst = std::max(worst, r);
      run.verdict("isotropy_residual", worst, settings.leaf_tol);
      if (oracle.isotropy_dim) run.expect("isotropy_dim", iso.dim, *oracle.isotropy_dim);

      const SamplingPlan plan = SamplingPlan::halton(w.chart, w.action.dim(), 0, 16);
      const StabilizerReport sr = sampled_stabilizers(ls.leaf, w.action, plan);
      run.stage("stabilizers") = {{"agree", sr.agree}, {"trivial", sr.trivial}, {"samples", sr.samples}};
      run.expect("stabilizers_agree", sr.agree, true);
    });

    PropernessScreen screen;
    run.timed("properness", [&] {
      screen = properness_screen(ls.closure, ls.leaf, w.action, iso);
      json& j = run.stage("properness");
      j["heuristic"] = true;
      j["warning"] = screen.warning;
      if (screen.warning) j["message"] = screen.message;
      json ev = json::array();
      const auto& names = w.chart->names();
      for (const auto& e : screen.evidence) {
        json r = json::array();
        for (const auto& [L, t] : e.returns) r.push_back({{"extent", L}, {"return_parameter", t}});
        ev.push_back({{"axes", {names[e.a], names[e.b]}}, {"generator", e.generator}, {"returns", r}});
      }
      j["evidence"] = ev;
      if (oracle.properness_warning) run.expect("properness_oracle", screen.warning, *oracle.properness_warning);
    });
    if (screen.warning) {
      if (!settings.force) {
        run.refuse(screen.message);
        return;
      }
      run.expect("proper", false, true);
    }

    run.timed("reduced_form", [&] {
      std::optional<BoundLeafChart> chart;
      if (w.leafchart && w.leafchart->seed_index == settings.seed_index) chart.emplace(*w.leafchart, w.chart);
      ReducedFormOptions opts;
      opts.rank = settings.rank;
      opts.casimirs = w.casimirs;
      if (chart) {
        opts.leafchart = &*chart;
        opts.chart_guess = VectorXd::Zero(static_cast<Eigen::Index>(chart->dim()));
      }
      std::optional<MatrixXd> expected;
      if (!oracle.omega.empty()) {
        const std::size_t d = oracle.omega.size();
        expected = MatrixXd(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t k = 0; k < d; ++k)
            (*expected)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                make_field(oracle.omega[i][k], *w.chart)(seed_of(w, settings).span());
      }

      const std::size_t n = ls.leaf.size(), m = std::min(settings.base_points, n);
      json bases = json::array();
      double min_cond = std::numeric_limits<double>::infinity(), wd = 0, transport = 0, pull = 0, omega_err = 0;
      std::set<std::size_t> dims;
      for (std::size_t b = 0; b < m; ++b) {
        const std::size_t idx = m == 1 ? 0 : b * (n - 1) / (m - 1);
        const ReducedFormReport r = reduced_form(ls.leaf.cloud[idx].point, iso, w.action, w.family, w.poisson, opts);
        json q = {{"cloud_index", idx},
                  {"point", to_json(r.base.coords())},
                  {"leaf_rank", r.leaf_rank},
                  {"orbit_dim", r.orbit_dim},
                  {"reduced_dim", r.reduced_dim}};
        json sel = json::array();
        for (std::size_t i : r.selected) sel.push_back(to_string(w.family.exprs[i]));
        q["selected"] = sel;
        q["omega"] = to_json(r.omega);
        q["singular_values"] = r.singular_values;
        q["conditioning"] = r.conditioning();
        q["antisymmetry"] = r.antisymmetry;
        q["well_definedness"] = r.well_definedness;
        q["substitutions"] = r.substitutions;
        q["transport"] = r.transport;
        if (r.pullback_residual) q["pullback_residual"] = *r.pullback_residual;
        if (r.chart_params) q["chart_params"] = to_json(*r.chart_params);
        bases.push_back(q);
        dims.insert(r.reduced_dim);
        min_cond = std::min(min_cond, r.conditioning());
        wd = std::max(wd, r.well_definedness);
        transport = std::max(transport, r.transport);
        if (r.pullback_residual) pull = std::max(pull, *r.pullback_residual);
        if (expected && expected->rows() == r.omega.rows())
          omega_err = std::max(omega_err, (r.omega - *expected).cwiseAbs().maxCoeff());
        else if (expected)
          omega_err = std::numeric_limits<double>::infinity();
        if (chart && r.chart_params) opts.chart_guess = *r.chart_params;
      }
      json& j = run.stage("reduced_form");
      j["base_points"] = bases;
      j["reduced_dims"] = dims;
      j["min_conditioning"] = min_cond;
      j["well_definedness"] = wd;
      j["transport"] = transport;
      run.expect("reduced_dim_constant", dims.size(), std::size_t{1});
      if (oracle.reduced_dim) run.expect("reduced_dim", *dims.begin(), *oracle.reduced_dim);
      if (*dims.begin() > 0) run.verdict("nondegenerate", min_cond, settings.conditioning, false);
      run.verdict("well_defined", wd, settings.leaf_tol);
      run.verdict("transport", transport, settings.leaf_tol);
      if (chart) {
        j["pullback_residual"] = pull;
        run.verdict("pullback", pull, settings.leaf_tol);
      }
      if (expected) {
        j["omega_error"] = omega_err;
        run.verdict("omega", omega_err, settings.omega_tol);
      }
    });
  });
}

RunReport error_report(const std::string& command, const std::exception& e) {
  RunReport r;
  r.body["command"] = command;
  r.body["error"] = error_json(e);
  r.body["outcome"] = "error";
  r.exit_code = failure_code(e);
  r.body["exit_code"] = r.exit_code;
  r.summary = command + ": " + failure_kind(e) + ": " + e.what();
  return r;
}

}  // namespace polarred
