#include "polarred/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "polarred/errors.hpp"
#include "polarred/toml.hpp"

namespace polarred {

namespace {

const double kTau = 2 * std::numbers::pi;

std::string idx(const std::string& key, std::size_t i) { return key + "[" + std::to_string(i) + "]"; }
std::string idx(const std::string& key, std::size_t i, std::size_t j) { return idx(idx(key, i), j); }

// ---------------------------------------------------------------------------
// Expressions with key paths

Expr expr_at(const std::string& src, const std::string& key, const std::vector<std::string>& allowed) {
  Expr e;
  try {
    e = parse(src);
  } catch (const SyntaxError& err) {
    throw InputError(key, "syntax error in \"" + src + "\": " + err.what());
  } catch (const UnknownFunction& err) {
    throw InputError(key, "unknown function '" + err.name() + "' in \"" + src + "\"");
  }
  for (const auto& v : free_variables(e))
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
      throw InputError(key, "unknown identifier '" + v + "' in \"" + src + "\"");
  return e;
}

std::vector<std::vector<Expr>> matrix_at(const StringMatrix& m, const std::string& key, std::size_t rows,
                                         std::size_t cols, const std::vector<std::string>& allowed) {
  if (m.size() != rows)
    throw InputError(key, "dimension mismatch: expected " + std::to_string(rows) + " rows, got " + std::to_string(m.size()));
  std::vector<std::vector<Expr>> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != cols)
      throw InputError(idx(key, i), "dimension mismatch: expected " + std::to_string(cols) + " entries, got " +
                                        std::to_string(m[i].size()));
    out.emplace_back();
    for (std::size_t j = 0; j < cols; ++j) out.back().push_back(expr_at(m[i][j], idx(key, i, j), allowed));
  }
  return out;
}

std::vector<Expr> vector_at(const std::vector<std::string>& v, const std::string& key, std::size_t n,
                            const std::vector<std::string>& allowed) {
  if (v.size() != n)
    throw InputError(key, "dimension mismatch: expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  std::vector<Expr> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(expr_at(v[i], idx(key, i), allowed));
  return out;
}

std::vector<Expr> list_at(const std::vector<std::string>& v, const std::string& key,
                          const std::vector<std::string>& allowed) {
  return vector_at(v, key, v.size(), allowed);
}

// ---------------------------------------------------------------------------
// TOML -> Scenario

using toml::Table;
using toml::Value;

class Fields {
 public:
  Fields(const Table* t, std::string name, std::vector<std::string> known) : t_(t), name_(std::move(name)) {
    if (!t_) return;
    for (const auto& e : t_->entries)
      if (std::find(known.begin(), known.end(), e.key) == known.end())
        throw InputError(name_ + "." + e.key, "unknown key (line " + std::to_string(e.value.line) + ")");
  }

  bool has(const std::string& key) const { return t_ && t_->find(key); }
  std::string path(const std::string& key) const { return name_ + "." + key; }

  const Value& get(const std::string& key) const {
    const Value* v = t_ ? t_->find(key) : nullptr;
    if (!v) throw InputError(path(key), "missing required key");
    return *v;
  }

  std::string string(const std::string& key) const { return as_string(get(key), path(key)); }
  bool boolean(const std::string& key) const {
    const Value& v = get(key);
    if (!v.is_bool()) type_error(path(key), v, "a boolean");
    return v.as_bool();
  }
  std::uint64_t natural(const std::string& key) const { return as_natural(get(key), path(key)); }
  double number(const std::string& key) const { return as_number(get(key), path(key)); }
  std::vector<std::string> strings(const std::string& key) const {
    std::vector<std::string> out;
    const auto& a = array(get(key), path(key));
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(as_string(a[i], idx(path(key), i)));
    return out;
  }
  StringMatrix string_matrix(const std::string& key) const {
    StringMatrix out;
    const auto& a = array(get(key), path(key));
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.emplace_back();
      const auto& row = array(a[i], idx(path(key), i));
      for (std::size_t j = 0; j < row.size(); ++j) out.back().push_back(as_string(row[j], idx(path(key), i, j)));
    }
    return out;
  }
  std::vector<std::vector<double>> number_matrix(const std::string& key) const {
    std::vector<std::vector<double>> out;
    const auto& a = array(get(key), path(key));
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.emplace_back();
      const auto& row = array(a[i], idx(path(key), i));
      for (std::size_t j = 0; j < row.size(); ++j) out.back().push_back(as_number(row[j], idx(path(key), i, j)));
    }
    return out;
  }

  [[noreturn]] static void type_error(const std::string& key, const Value& v, const std::string& want) {
    throw InputError(key, "expected " + want + " (line " + std::to_string(v.line) + ")");
  }
  static const Value::Array& array(const Value& v, const std::string& key) {
    if (!v.is_array()) type_error(key, v, "an array");
    return v.as_array();
  }
  static std::string as_string(const Value& v, const std::string& key) {
    if (!v.is_string()) type_error(key, v, "a string");
    return v.as_string();
  }
  static double as_number(const Value& v, const std::string& key) {
    if (!v.is_number()) type_error(key, v, "a number");
    return v.as_number();
  }
  static std::uint64_t as_natural(const Value& v, const std::string& key) {
    if (!v.is_int() || v.as_int() < 0) type_error(key, v, "a non-negative integer");
    return static_cast<std::uint64_t>(v.as_int());
  }

 private:
  const Table* t_;
  std::string name_;
};

Scenario from_document(const toml::Document& doc) {
  static const std::vector<std::string> sections = {"scenario", "chart",  "poisson",   "action", "invariants",
                                                    "seeds",    "leafchart", "budget", "oracle"};
  for (const auto& t : doc.tables)
    if (std::find(sections.begin(), sections.end(), t.name) == sections.end())
      throw InputError("line " + std::to_string(t.line), "unknown table [" + t.name + "]");
  Scenario s;

  const Fields meta(doc.find("scenario"), "scenario", {"name", "description"});
  s.name = meta.string("name");
  if (meta.has("description")) s.description = meta.string("description");

  const Fields chart(doc.find("chart"), "chart", {"names", "periodic", "box"});
  s.coords = chart.strings("names");
  const std::size_t n = s.coords.size();
  s.periods.assign(n, std::nullopt);
  if (chart.has("periodic")) {
    const auto& p = Fields::array(chart.get("periodic"), chart.path("periodic"));
    if (p.size() != n)
      throw InputError(chart.path("periodic"), "dimension mismatch: expected " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i].is_bool())
        s.periods[i] = p[i].as_bool() ? std::optional<double>(kTau) : std::nullopt;
      else
        s.periods[i] = Fields::as_number(p[i], idx(chart.path("periodic"), i));
    }
  }
  s.box.assign(n, {-1.0, 1.0});
  if (chart.has("box")) {
    const auto b = chart.number_matrix("box");
    if (b.size() != n) throw InputError(chart.path("box"), "dimension mismatch: expected " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i) {
      if (b[i].size() != 2) throw InputError(idx(chart.path("box"), i), "expected [lo, hi]");
      s.box[i] = {b[i][0], b[i][1]};
    }
  }

  const Fields poisson(doc.find("poisson"), "poisson", {"tensor", "symplectic"});
  if (poisson.has("tensor") == poisson.has("symplectic"))
    throw InputError("poisson", "give exactly one of 'tensor' or 'symplectic'");
  if (poisson.has("tensor")) s.tensor = poisson.string_matrix("tensor");
  if (poisson.has("symplectic")) s.symplectic = poisson.string_matrix("symplectic");

  const Fields action(doc.find("action"), "action", {"dim", "generators", "maps", "abelian"});
  s.group_dim = action.natural("dim");
  s.generators = action.string_matrix("generators");
  s.maps = action.strings("maps");
  if (action.has("abelian")) s.abelian = action.boolean("abelian");

  const Fields inv(doc.find("invariants"), "invariants", {"family", "provenance"});
  s.family = inv.strings("family");
  if (inv.has("provenance")) s.family_provenance = inv.string("provenance");

  const Fields seeds(doc.find("seeds"), "seeds", {"points"});
  s.seeds = seeds.number_matrix("points");

  if (const Table* t = doc.find("leafchart")) {
    const Fields lc(t, "leafchart", {"seed_index", "params", "embedding", "leaf_form"});
    Scenario::LeafChartSpec spec;
    if (lc.has("seed_index")) spec.seed_index = lc.natural("seed_index");
    spec.params = lc.strings("params");
    spec.embedding = lc.strings("embedding");
    spec.leaf_form = lc.string_matrix("leaf_form");
    s.leafchart = std::move(spec);
  }

  if (const Table* t = doc.find("budget")) {
    const Fields b(t, "budget", {"points", "segments", "rng_seed", "duration"});
    if (b.has("points")) s.budget.points = b.natural("points");
    if (b.has("segments")) s.budget.segments = b.natural("segments");
    if (b.has("rng_seed")) s.budget.rng_seed = b.natural("rng_seed");
    if (b.has("duration")) s.budget.duration = b.number("duration");
  }

  if (const Table* t = doc.find("oracle")) {
    const Fields o(t, "oracle",
                   {"rank", "isotropy_dim", "reduced_dim", "casimirs", "leaf_conserved", "dense_planes",
                    "properness_warning", "omega", "expected_failure", "failure_seed"});
    if (o.has("rank")) s.oracle.rank = o.natural("rank");
    if (o.has("isotropy_dim")) s.oracle.isotropy_dim = o.natural("isotropy_dim");
    if (o.has("reduced_dim")) s.oracle.reduced_dim = o.natural("reduced_dim");
    if (o.has("casimirs")) s.oracle.casimirs = o.strings("casimirs");
    if (o.has("leaf_conserved")) s.oracle.leaf_conserved = o.strings("leaf_conserved");
    if (o.has("dense_planes")) {
      const StringMatrix m = o.string_matrix("dense_planes");
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].size() != 2) throw InputError(idx(o.path("dense_planes"), i), "expected a pair of axis names");
        s.oracle.dense_planes.push_back({m[i][0], m[i][1]});
      }
    }
    if (o.has("properness_warning")) s.oracle.properness_warning = o.boolean("properness_warning");
    if (o.has("omega")) s.oracle.omega = o.string_matrix("omega");
    if (o.has("expected_failure")) s.oracle.expected_failure = o.string("expected_failure");
    if (o.has("failure_seed")) s.oracle.failure_seed = o.natural("failure_seed");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scenario -> text

std::string strings(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml::quote(v[i]);
  return out + "]";
}

std::string matrix(const StringMatrix& m) {
  std::string out = "[";
  for (std::size_t i = 0; i < m.size(); ++i) out += (i ? ", " : "") + strings(m[i]);
  return out + "]";
}

std::string numbers(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v[i]);
  return out + "]";
}

std::string canonical_expr(const std::string& s) {
  try {
    return to_string(parse(s));
  } catch (const Error&) {
    return s;  // reported with its key path by compile()
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Scenario canonicalize(Scenario s) {
  auto vec = [](std::vector<std::string>& v) {
    for (auto& e : v) e = canonical_expr(e);
  };
  auto mat = [&](StringMatrix& m) {
    for (auto& r : m) vec(r);
  };
  mat(s.tensor);
  mat(s.symplectic);
  mat(s.generators);
  vec(s.maps);
  vec(s.family);
  if (s.leafchart) {
    vec(s.leafchart->embedding);
    mat(s.leafchart->leaf_form);
  }
  vec(s.oracle.casimirs);
  vec(s.oracle.leaf_conserved);
  mat(s.oracle.omega);
  for (std::size_t i = 0; i < s.periods.size() && i < s.box.size(); ++i)
    if (s.periods[i]) s.box[i] = {0.0, *s.periods[i]};
  return s;
}

std::string serialize(const Scenario& s) {
  std::ostringstream out;
  out << "[scenario]\n";
  out << "name = " << toml::quote(s.name) << '\n';
  out << "description = " << toml::quote(s.description) << '\n';

  out << "\n[chart]\n";
  out << "names = " << strings(s.coords) << '\n';
  out << "periodic = [";
  for (std::size_t i = 0; i < s.periods.size(); ++i) {
    out << (i ? ", " : "");
    if (!s.periods[i])
      out << "false";
    else if (*s.periods[i] == kTau)
      out << "true";
    else
      out << format_number(*s.periods[i]);
  }
  out << "]\n";
  out << "box = [";
  for (std::size_t i = 0; i < s.box.size(); ++i)
    out << (i ? ", " : "") << '[' << format_number(s.box[i][0]) << ", " << format_number(s.box[i][1]) << ']';
  out << "]\n";

  out << "\n[poisson]\n";
  if (!s.symplectic.empty())
    out << "symplectic = " << matrix(s.symplectic) << '\n';
  else
    out << "tensor = " << matrix(s.tensor) << '\n';

  out << "\n[action]\n";
  out << "dim = " << s.group_dim << '\n';
  out << "generators = " << matrix(s.generators) << '\n';
  out << "maps = " << strings(s.maps) << '\n';
  out << "abelian = " << (s.abelian ? "true" : "false") << '\n';

  out << "\n[invariants]\n";
  out << "family = " << strings(s.family) << '\n';
  out << "provenance = " << toml::quote(s.family_provenance) << '\n';

  out << "\n[seeds]\n";
  out << "points = [";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) out << (i ? ", " : "") << numbers(s.seeds[i]);
  out << "]\n";

  if (s.leafchart) {
    out << "\n[leafchart]\n";
    out << "seed_index = " << s.leafchart->seed_index << '\n';
    out << "params = " << strings(s.leafchart->params) << '\n';
    out << "embedding = " << strings(s.leafchart->embedding) << '\n';
    out << "leaf_form = " << matrix(s.leafchart->leaf_form) << '\n';
  }

  out << "\n[budget]\n";
  out << "points = " << s.budget.points << '\n';
  out << "segments = " << s.budget.segments << '\n';
  out << "rng_seed = " << s.budget.rng_seed << '\n';
  out << "duration = " << format_number(s.budget.duration) << '\n';

  const auto& o = s.oracle;
  out << "\n[oracle]\n";
  if (o.rank) out << "rank = " << *o.rank << '\n';
  if (o.isotropy_dim) out << "isotropy_dim = " << *o.isotropy_dim << '\n';
  if (o.reduced_dim) out << "reduced_dim = " << *o.reduced_dim << '\n';
  out << "casimirs = " << strings(o.casimirs) << '\n';
  out << "leaf_conserved = " << strings(o.leaf_conserved) << '\n';
  out << "dense_planes = [";
  for (std::size_t i = 0; i < o.dense_planes.size(); ++i)
    out << (i ? ", " : "") << strings({o.dense_planes[i][0], o.dense_planes[i][1]});
  out << "]\n";
  if (o.properness_warning) out << "properness_warning = " << (*o.properness_warning ? "true" : "false") << '\n';
  if (!o.omega.empty()) out << "omega = " << matrix(o.omega) << '\n';
  if (!o.expected_failure.empty()) out << "expected_failure = " << toml::quote(o.expected_failure) << '\n';
  if (o.failure_seed) out << "failure_seed = " << *o.failure_seed << '\n';
  return out.str();
}

Scenario parse_scenario(std::string_view text) {
  Scenario s = canonicalize(from_document(toml::parse(text)));
  compile(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

World compile(const Scenario& s) {
  World w;
  w.scenario = s;
  const std::size_t n = s.coords.size();
  if (s.periods.size() != n) throw InputError("chart.periodic", "dimension mismatch: expected " + std::to_string(n) + " entries");
  if (s.box.size() != n) throw InputError("chart.box", "dimension mismatch: expected " + std::to_string(n) + " rows");
  std::vector<Chart::Axis> axes;
  for (std::size_t i = 0; i < n; ++i) axes.push_back({s.coords[i], s.periods[i], s.box[i][0], s.box[i][1]});
  try {
    w.chart = std::make_shared<const Chart>(std::move(axes));
  } catch (const InputError& e) {
    throw InputError("chart", e.what());
  }
  const auto& names = s.coords;

  if (!s.tensor.empty() == !s.symplectic.empty()) throw InputError("poisson", "give exactly one of 'tensor' or 'symplectic'");
  if (!s.tensor.empty())
    w.poisson = PoissonStructure::given(w.chart, matrix_at(s.tensor, "poisson.tensor", n, n, names));
  else
    w.poisson = PoissonStructure::from_symplectic(w.chart, matrix_at(s.symplectic, "poisson.symplectic", n, n, names));

  if (s.generators.size() != s.group_dim)
    throw InputError("action.generators", "dimension mismatch: action.dim is " + std::to_string(s.group_dim) + " but " +
                                              std::to_string(s.generators.size()) + " generators are given");
  std::vector<std::string> map_vars = names;
  for (const auto& a : GroupAction::parameter_names(s.group_dim)) map_vars.push_back(a);
  auto gens = matrix_at(s.generators, "action.generators", s.group_dim, n, names);
  auto maps = vector_at(s.maps, "action.maps", n, map_vars);
  w.action = GroupAction(w.chart, std::move(gens), std::move(maps), s.abelian);

  if (s.family.empty()) throw InputError("invariants.family", "the invariant family is empty");
  w.family = InvariantFamily(list_at(s.family, "invariants.family", names), *w.chart, s.family_provenance);

  if (s.seeds.empty()) throw InputError("seeds.points", "at least one seed is required");
  for (std::size_t i = 0; i < s.seeds.size(); ++i) {
    if (s.seeds[i].size() != n)
      throw InputError(idx("seeds.points", i), "dimension mismatch: expected " + std::to_string(n) + " coordinates, got " +
                                                   std::to_string(s.seeds[i].size()));
    w.seeds.emplace_back(w.chart, Eigen::Map<const Eigen::VectorXd>(s.seeds[i].data(), static_cast<Eigen::Index>(n)));
  }

  if (s.leafchart) {
    const auto& lc = *s.leafchart;
    if (lc.seed_index >= s.seeds.size()) throw InputError("leafchart.seed_index", "no such seed");
    LeafChart out{lc.seed_index, lc.params, vector_at(lc.embedding, "leafchart.embedding", n, lc.params),
                  matrix_at(lc.leaf_form, "leafchart.leaf_form", lc.params.size(), lc.params.size(), lc.params)};
    BoundLeafChart(out, w.chart);
    w.leafchart = std::move(out);
  }

  if (s.budget.points == 0) throw InputError("budget.points", "must be at least 1");
  if (!std::isfinite(s.budget.duration) || s.budget.duration < 0)
    throw InputError("budget.duration", "must be finite and non-negative");

  const auto& o = s.oracle;
  w.casimirs = list_at(o.casimirs, "oracle.casimirs", names);
  w.leaf_conserved = list_at(o.leaf_conserved, "oracle.leaf_conserved", names);
  for (std::size_t i = 0; i < o.dense_planes.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const auto k = w.chart->index_of(o.dense_planes[i][j]);
      if (!k) throw InputError(idx("oracle.dense_planes", i, j), "unknown axis '" + o.dense_planes[i][j] + "'");
      if (!w.chart->periodic(*k)) throw InputError(idx("oracle.dense_planes", i, j), "axis is not periodic");
    }
  if (!o.omega.empty()) {
    const std::size_t d = o.omega.size();
    matrix_at(o.omega, "oracle.omega", d, d, {});
  }
  static const std::set<std::string> failures = {"", "jacobi", "canonical", "rank-jump"};
  if (!failures.count(o.expected_failure))
    throw InputError("oracle.expected_failure", "unknown failure '" + o.expected_failure + "'");
  if (o.failure_seed && *o.failure_seed >= s.seeds.size()) throw InputError("oracle.failure_seed", "no such seed");
  return w;
}

// ---------------------------------------------------------------------------
// Built-in worlds

Scenario world_r3() {
  Scenario s;
  s.name = "r3";
  s.description = "R^3 with a constant Poisson tensor whose symplectic leaves are the planes x + z = c; "
                  "the reals act by x-translation";
  s.coords = {"x", "y", "z"};
  s.periods.assign(3, std::nullopt);
  s.box.assign(3, {-2.0, 2.0});
  s.tensor = {{"0", "1", "0"}, {"-1", "0", "1"}, {"0", "-1", "0"}};
  s.group_dim = 1;
  s.generators = {{"1", "0", "0"}};
  s.maps = {"x + a1", "y", "z"};
  s.family = {"y", "z"};
  s.family_provenance = "built-in";
  s.seeds = {{0, 0, 0}, {0.5, -0.3, 0.2}};
  // The leaf x + z = 0 through seed 0, parameterized by its (y, z) coordinates.
  s.leafchart = Scenario::LeafChartSpec{0, {"u", "v"}, {"-v", "u", "v"}, {{"0", "1"}, {"-1", "0"}}};
  s.oracle.rank = 2;
  s.oracle.isotropy_dim = 0;
  s.oracle.reduced_dim = 2;
  s.oracle.casimirs = {"x + z"};
  s.oracle.properness_warning = false;
  s.oracle.omega = {{"0", "1"}, {"-1", "0"}};
  return canonicalize(s);
}

namespace {

Scenario torus_base() {
  Scenario s;
  s.coords = {"t1", "t2", "p1", "p2"};
  s.periods.assign(4, kTau);
  s.box.assign(4, {0.0, kTau});
  s.symplectic = {{"0", "1", "0", "0"}, {"-1", "0", "0", "0"}, {"0", "0", "0", "sqrt(2)"}, {"0", "0", "-sqrt(2)", "0"}};
  s.family_provenance = "built-in";
  s.seeds = {{0, 0, 0, 0}, {1, 2, 3, 4}};
  s.budget.duration = 16;
  return s;
}

}  // namespace

Scenario world_t4_circle() {
  Scenario s = torus_base();
  s.name = "t4_circle";
  s.description = "T^4 with the symplectic form dt1^dt2 + sqrt(2) dp1^dp2 under the diagonal circle action "
                  "on (t1, p1); fibers are a two-torus times a Kronecker line";
  s.group_dim = 1;
  s.generators = {{"1", "0", "1", "0"}};
  s.maps = {"t1 + a1", "t2", "p1 + a1", "p2"};
  s.family = {"sin(t1 - p1)", "cos(t1 - p1)", "sin(t2)", "cos(t2)", "sin(p2)", "cos(p2)"};
  s.oracle.rank = 3;
  s.oracle.isotropy_dim = 1;
  s.oracle.reduced_dim = 2;
  s.oracle.leaf_conserved = {"p2 + t2/sqrt(2)"};
  s.oracle.dense_planes = {{"t2", "p2"}};
  s.oracle.properness_warning = false;
  return canonicalize(s);
}

Scenario world_t4_torus() {
  Scenario s = torus_base();
  s.name = "t4_torus";
  s.description = "T^4 with the symplectic form dt1^dt2 + sqrt(2) dp1^dp2 under the diagonal two-torus action; "
                  "fibers are products of two Kronecker lines and G_rho does not act properly";
  s.group_dim = 2;
  s.generators = {{"1", "0", "1", "0"}, {"0", "1", "0", "1"}};
  s.maps = {"t1 + a1", "t2 + a2", "p1 + a1", "p2 + a2"};
  s.family = {"sin(t1 - p1)", "cos(t1 - p1)", "sin(t2 - p2)", "cos(t2 - p2)"};
  s.oracle.rank = 2;
  s.oracle.isotropy_dim = 0;
  s.oracle.leaf_conserved = {"p2 + t2/sqrt(2)", "p1 + t1/sqrt(2)"};
  s.oracle.dense_planes = {{"t1", "p1"}, {"t2", "p2"}};
  s.oracle.properness_warning = true;
  return canonicalize(s);
}

std::vector<Scenario> world_regressions() {
  Scenario bad = world_r3();
  bad.name = "corrupted_r3";
  bad.description = "R^3 tensor with B_12 replaced by -y; Jacobi fails with defect -1 everywhere";
  bad.tensor = {{"0", "-y", "0"}, {"y", "0", "1"}, {"0", "-1", "0"}};
  bad.leafchart.reset();
  bad.oracle = {};
  bad.oracle.expected_failure = "jacobi";

  Scenario scale = world_r3();
  scale.name = "noncanonical_r3";
  scale.description = "R^3 with the scaling action x -> x exp(a1), which does not preserve the bracket";
  scale.generators = {{"x", "0", "0"}};
  scale.maps = {"x*exp(a1)", "y", "z"};
  scale.seeds = {{0.5, 0, 0}};
  scale.leafchart.reset();
  scale.oracle = {};
  scale.oracle.expected_failure = "canonical";

  Scenario jump;
  jump.name = "rank_jump_r2";
  jump.description = "R^2 with B = [[0, x], [-x, 0]]; the distribution has rank 0 on x = 0 and rank 2 elsewhere";
  jump.coords = {"x", "y"};
  jump.periods.assign(2, std::nullopt);
  jump.box.assign(2, {-2.0, 2.0});
  jump.tensor = {{"0", "x"}, {"-x", "0"}};
  jump.group_dim = 0;
  jump.maps = {"x", "y"};
  jump.family = {"x", "y"};
  jump.family_provenance = "built-in";
  jump.seeds = {{0, 0}, {1, 0}};
  jump.oracle.rank = 2;
  jump.oracle.expected_failure = "rank-jump";
  jump.oracle.failure_seed = 0;

  return {canonicalize(bad), canonicalize(scale), canonicalize(jump)};
}

std::vector<Scenario> builtin_worlds() {
  std::vector<Scenario> out = {world_r3(), world_t4_circle(), world_t4_torus()};
  for (auto& s : world_regressions()) out.push_back(std::move(s));
  return out;
}

Scenario builtin_world(const std::string& name) {
  for (auto& s : builtin_worlds())
    if (s.name == name) return s;
  throw InputError("world", "unknown built-in world '" + name + "'");
}

World stratification_world(const World& w) {
  Scenario s = w.scenario;
  s.name += "+trivial-group";
  s.group_dim = 0;
  s.generators.clear();
  s.maps = s.coords;
  s.family = s.coords;
  s.family_provenance = "coordinate functions";
  const auto casimirs = s.oracle.casimirs;
  s.oracle = {};
  s.oracle.casimirs = casimirs;
  return compile(canonicalize(s));
}

}  // namespace polarred
