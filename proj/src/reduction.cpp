#include "polarred/reduction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <random>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "polarred/errors.hpp"

namespace polarred {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

std::span<const double> view(const Vec& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

std::string describe(const Vec& x) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) out += (i ? ", " : "") + format_number(x[i]);
  return out + ")";
}

// Uniform double in [0,1) from the top 53 bits; portable across standard libraries.
double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra

SpanInfo column_span(const Mat& A, const RankSettings& rs) {
  SpanInfo out;
  out.basis = Mat(A.rows(), 0);
  if (A.cols() == 0 || A.rows() == 0) return out;
  const Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  out.singular_values.assign(s.data(), s.data() + s.size());
  const double cutoff = std::max(rs.relative * s[0], rs.absolute);
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(s.size()) && s[static_cast<Eigen::Index>(r)] > cutoff) ++r;
  out.rank = r;
  out.basis = svd.matrixU().leftCols(static_cast<Eigen::Index>(r));
  if (r > 0) out.smallest_retained = s[static_cast<Eigen::Index>(r - 1)];
  if (r < static_cast<std::size_t>(s.size())) out.largest_discarded = s[static_cast<Eigen::Index>(r)];
  if (r > 0 && out.largest_discarded > 0) out.gap = out.smallest_retained / out.largest_discarded;
  out.ill_conditioned = out.gap <= rs.gap;
  return out;
}

Mat null_space(const Mat& A, double scale, double relative) {
  const Eigen::Index k = A.cols();
  if (k == 0) return Mat(0, 0);
  const Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double sj = j < s.size() ? s[j] : 0.0;
    if (sj <= relative * scale) keep.push_back(j);
  }
  Mat out(k, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(keep[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Distribution

DistributionFrame distribution_at(const Point& m, const InvariantFamily& family, const PoissonStructure& B,
                                  const RankSettings& rs) {
  if (family.size() == 0) throw InputError("invariants.family", "the invariant family is empty");
  DistributionFrame f;
  f.base = m;
  const Mat Bm = B.at(m);
  f.generators.resize(static_cast<Eigen::Index>(m.chart()->dim()), static_cast<Eigen::Index>(family.size()));
  for (std::size_t i = 0; i < family.size(); ++i)
    f.generators.col(static_cast<Eigen::Index>(i)) = Bm * grad(family.fields[i], m);
  f.span = column_span(f.generators, rs);
  return f;
}

std::size_t generic_rank(const SamplingPlan& plan, const InvariantFamily& family, const PoissonStructure& B,
                         const RankSettings& rs) {
  std::size_t r = 0;
  for (const auto& m : plan.points) r = std::max(r, distribution_at(m, family, B, rs).rank());
  return r;
}

// ---------------------------------------------------------------------------
// Leaf tracing

std::vector<FlowStep> LeafSample::word(std::size_t i) const {
  const CloudPoint& p = cloud[i];
  if (p.depth == 0) return {};
  const auto& c = chains[p.chain];
  return {c.begin(), c.begin() + static_cast<std::ptrdiff_t>(p.depth)};
}

namespace {

struct ChainResult {
  std::vector<FlowStep> steps;
  std::vector<CloudPoint> points;
  std::exception_ptr error;
};

void run_chain(std::size_t chain, std::size_t length, const Point& seed, std::size_t rank,
               const InvariantFamily& family, const PoissonStructure& B, const LeafBudget& budget,
               const RankSettings& rs, ChainResult& out) {
  const std::uint64_t s = budget.rng_seed;
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
  std::mt19937_64 gen(seq);
  const auto m = static_cast<Eigen::Index>(family.size());
  Point at = seed;
  Vec cover = seed.coords();
  FlowOptions opt = budget.flow;
  opt.record = false;
  for (std::size_t depth = 1; depth <= length; ++depth) {
    FlowStep step{Vec(m), 0.0};
    for (Eigen::Index i = 0; i < m; ++i) step.weights[i] = 2 * unit(gen) - 1;
    step.duration = budget.duration * (2 * unit(gen) - 1);
    const Trajectory t = integrate({hamiltonian_vf(B, family.fields, step.weights), step.duration, opt}, at, cover);
    at = t.endpoint();
    cover = t.cover_endpoint();
    const DistributionFrame f = distribution_at(at, family, B, rs);
    if (f.rank() != rank)
      throw RankJump("distribution rank changes from " + std::to_string(rank) + " to " + std::to_string(f.rank()) +
                     " at " + describe(at.coords()) + " (chain " + std::to_string(chain) + ", segment " +
                     std::to_string(depth) + ")");
    if (f.span.ill_conditioned)
      throw IllConditioned("distribution frame has spectral gap " + format_number(f.span.gap) + " at " +
                           describe(at.coords()));
    out.steps.push_back(std::move(step));
    out.points.push_back({at, cover, chain, depth, f.basis()});
  }
}

}  // namespace

LeafSample trace_leaf(const Point& seed, const InvariantFamily& family, const PoissonStructure& B,
                      const LeafBudget& budget, const RankSettings& rs) {
  const DistributionFrame f0 = distribution_at(seed, family, B, rs);
  if (f0.span.ill_conditioned)
    throw IllConditioned("seed frame is ill-conditioned: spectral gap " + format_number(f0.span.gap) + " at " +
                         describe(seed.coords()));
  LeafSample leaf;
  leaf.seed = seed;
  leaf.rank = f0.rank();
  leaf.cloud.push_back({seed, seed.coords(), 0, 0, f0.basis()});
  if (budget.points <= 1 || budget.segments == 0 || budget.duration == 0.0) return leaf;

  const std::size_t todo = budget.points - 1;
  const std::size_t nchains = (todo + budget.segments - 1) / budget.segments;
  std::vector<ChainResult> results(nchains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < nchains; c = next++) {
      const std::size_t length = std::min(budget.segments, todo - c * budget.segments);
      try {
        run_chain(c, length, seed, leaf.rank, family, B, budget, rs, results[c]);
      } catch (...) {
        results[c].error = std::current_exception();
      }
    }
  };
  unsigned threads = budget.threads ? budget.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, nchains));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
    leaf.chains.push_back(std::move(r.steps));
    for (auto& p : r.points) leaf.cloud.push_back(std::move(p));
  }
  return leaf;
}

double replay_discrepancy(const LeafSample& leaf, const std::vector<std::size_t>& indices,
                          const InvariantFamily& family, const PoissonStructure& B, const FlowOptions& flow) {
  double worst = 0.0;
  for (const std::size_t i : indices) {
    std::vector<FlowSegment> segs;
    for (const auto& s : leaf.word(i)) segs.push_back({hamiltonian_vf(B, family.fields, s.weights), s.duration});
    const ComposedFlow r = compose_flows_tracked(segs, leaf.seed, leaf.seed.coords(), flow);
    worst = std::max({worst, r.endpoint.distance_to(leaf.cloud[i].point), (r.cover - leaf.cloud[i].cover).norm()});
  }
  return worst;
}

std::string cloud_csv(const LeafSample& leaf) {
  std::ostringstream out;
  const auto& names = leaf.seed.chart()->names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (const auto& p : leaf.cloud) {
    for (Eigen::Index i = 0; i < p.point.coords().size(); ++i) out << (i ? "," : "") << format_number(p.point.coords()[i]);
    out << '\n';
  }
  return out.str();
}

std::vector<ConservedReport> conserved_on_leaf(const LeafSample& leaf, const std::vector<Expr>& fields,
                                               const InvariantFamily& family, const PoissonStructure& B) {
  const Chart& chart = *leaf.seed.chart();
  std::vector<ConservedReport> out;
  for (const auto& e : fields) {
    const ScalarField c = make_field(e, chart);
    ConservedReport r{to_string(e), 0.0, 0.0};
    const double c0 = c(view(leaf.cloud.front().cover));
    for (const auto& p : leaf.cloud) {
      r.drift = std::max(r.drift, std::abs(c(view(p.cover)) - c0));
      for (const auto& f : family.fields) r.family_bracket = std::max(r.family_bracket, std::abs(bracket(B, c, f, p.point)));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Membership

MembershipVerdict leaf_membership(const Point& seed, const Point& target, const InvariantFamily& family,
                                  const PoissonStructure& B, double tol, std::size_t max_moves,
                                  const std::vector<Expr>& conserved, const FlowOptions& flow) {
  MembershipVerdict v;
  FlowOptions opt = flow;
  opt.record = false;
  std::vector<VectorField> fields;
  for (const auto& f : family.fields) fields.push_back(hamiltonian_vf(B, f));
  Point at = seed;
  v.distance = at.distance_to(target);
  auto shoot = [&](std::size_t i, double d) { return integrate({fields[i], d, opt}, at).endpoint(); };
  for (std::size_t move = 0; move < max_moves && v.distance >= tol; ++move) {
    double best = v.distance, best_d = 0;
    std::size_t best_i = fields.size(), best_k = 0;
    const double base = std::min(0.01, v.distance);
    for (std::size_t i = 0; i < fields.size(); ++i)
      for (const double sign : {1.0, -1.0})
        for (std::size_t k = 0; k <= 10; ++k) {
          const double d = sign * base * std::ldexp(1.0, static_cast<int>(k));
          const double dist = shoot(i, d).distance_to(target);
          if (dist < best) {
            best = dist;
            best_d = d;
            best_i = i;
            best_k = k;
          }
        }
    if (best_i == fields.size()) break;
    // golden-section refinement around the best scanned duration
    double lo = best_k == 0 ? 0.0 : best_d / 2, hi = best_d * 2;
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = shoot(best_i, x1).distance_to(target), f2 = shoot(best_i, x2).distance_to(target);
    for (int it = 0; it < 100 && std::abs(hi - lo) > 1e-15 * (1 + std::abs(hi)); ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = shoot(best_i, x1).distance_to(target);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = shoot(best_i, x2).distance_to(target);
      }
    }
    const double d = f1 < f2 ? x1 : x2;
    if (std::min(f1, f2) < best) {
      best = std::min(f1, f2);
      best_d = d;
    }
    at = shoot(best_i, best_d);
    v.distance = at.distance_to(target);
    v.word.emplace_back(best_i, best_d);
  }
  v.reached = v.distance < tol;
  if (!v.reached)
    for (const auto& e : conserved) {
      const ScalarField c = make_field(e, *seed.chart());
      const double a = eval(c, seed), b = eval(c, target);
      if (std::abs(a - b) > 1e-6 * (1 + std::abs(a))) {
        v.certificate = MembershipVerdict::Certificate{to_string(e), a, b};
        break;
      }
    }
  return v;
}

// ---------------------------------------------------------------------------
// Isotropy

IsotropyAlgebra isotropy_algebra(const LeafSample& leaf, const GroupAction& action, double relative) {
  IsotropyAlgebra iso;
  const auto k = static_cast<Eigen::Index>(action.dim());
  iso.group_dim = action.dim();
  iso.basis = Mat(k, 0);
  if (k == 0) return iso;
  if (leaf.size() < 8) throw InputError("budget.points", "the isotropy algebra needs at least 8 leaf points");
  const auto n = static_cast<Eigen::Index>(leaf.seed.chart()->dim());
  const auto N = static_cast<Eigen::Index>(leaf.size());
  Mat S(N * n, k);
  std::vector<Mat> R(leaf.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < leaf.size(); ++i) {
    const Mat Xi = action.generator_matrix(leaf.cloud[i].point.coords());
    const Mat& Q = leaf.cloud[i].frame;
    R[i] = Xi - Q * (Q.transpose() * Xi);
    S.middleRows(static_cast<Eigen::Index>(i) * n, n) = R[i];
    norm2 += Xi.squaredNorm();
  }
  S /= std::sqrt(static_cast<double>(N));
  const double scale = std::sqrt(norm2 / static_cast<double>(N * k));
  const Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeFullV);
  iso.singular_values.assign(svd.singularValues().data(), svd.singularValues().data() + svd.singularValues().size());
  std::vector<Eigen::Index> null, kept;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double sj = j < svd.singularValues().size() ? svd.singularValues()[j] : 0.0;
    (sj <= relative * scale ? null : kept).push_back(j);
  }
  auto worst = [&](const Vec& xi) {
    double w = 0.0;
    for (const auto& r : R) w = std::max(w, (r * xi).norm());
    return w;
  };
  iso.basis = Mat(k, static_cast<Eigen::Index>(null.size()));
  for (std::size_t c = 0; c < null.size(); ++c) {
    const Vec xi = svd.matrixV().col(null[c]);
    iso.basis.col(static_cast<Eigen::Index>(c)) = xi;
    iso.basis_residuals.push_back(worst(xi));
  }
  for (const auto j : kept) iso.rejected_residuals.push_back(worst(svd.matrixV().col(j)));
  iso.dim = null.size();
  return iso;
}

Mat orbit_subspace(const Point& m, const IsotropyAlgebra& iso, const GroupAction& action, const RankSettings& rs) {
  const auto n = static_cast<Eigen::Index>(m.chart()->dim());
  if (iso.dim == 0) return Mat(n, 0);
  return column_span(action.generator_matrix(m.coords()) * iso.basis, rs).basis;
}

StabilizerReport sampled_stabilizers(const LeafSample& leaf, const GroupAction& action, const SamplingPlan& plan) {
  StabilizerReport out;
  std::optional<std::vector<std::size_t>> first;
  for (const auto& p : leaf.cloud) {
    std::vector<std::size_t> fixed;
    for (std::size_t j = 0; j < plan.params.size(); ++j)
      if (p.point.distance_to(act(action, plan.params[j], p.point)) < 1e-9) fixed.push_back(j);
    if (!first)
      first = fixed;
    else if (fixed != *first)
      out.agree = false;
    if (!fixed.empty()) out.trivial = false;
    ++out.samples;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaf charts

BoundLeafChart::BoundLeafChart(const LeafChart& lc, ChartPtr chart) : chart_(std::move(chart)), params_(lc.params) {
  const std::size_t n = chart_->dim(), p = params_.size();
  if (lc.embedding.size() != n)
    throw InputError("leafchart.embedding", "expected " + std::to_string(n) + " expressions, got " +
                                                std::to_string(lc.embedding.size()));
  if (lc.form.size() != p)
    throw InputError("leafchart.leaf_form", "expected " + std::to_string(p) + " rows, got " + std::to_string(lc.form.size()));
  for (const auto& e : lc.embedding) embed_.emplace_back(e, params_);
  for (std::size_t i = 0; i < p; ++i) {
    if (lc.form[i].size() != p)
      throw InputError("leafchart.leaf_form[" + std::to_string(i) + "]", "expected " + std::to_string(p) + " entries");
    for (const auto& e : lc.form[i]) form_.emplace_back(e, params_);
  }
}

Vec BoundLeafChart::embed(const Vec& u) const {
  Vec x(static_cast<Eigen::Index>(embed_.size()));
  for (std::size_t i = 0; i < embed_.size(); ++i) x[static_cast<Eigen::Index>(i)] = embed_[i](view(u));
  return x;
}

Mat BoundLeafChart::tangent(const Vec& u) const {
  const std::size_t p = params_.size();
  Mat E(static_cast<Eigen::Index>(embed_.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < embed_.size(); ++i) {
    const Dual<double> d = embed_[i].evaluate_dual(view(u), p);
    for (std::size_t j = 0; j < p; ++j) E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.d[j];
  }
  return E;
}

Mat BoundLeafChart::form(const Vec& u) const {
  const auto p = static_cast<Eigen::Index>(params_.size());
  Mat W(p, p);
  for (Eigen::Index i = 0; i < p * p; ++i) W(i / p, i % p) = form_[static_cast<std::size_t>(i)](view(u));
  return W;
}

Vec BoundLeafChart::locate(const Point& m, const Vec& guess) const {
  Vec u = guess;
  double res = 0.0;
  for (int it = 0; it < 50; ++it) {
    const Vec r = chart_->difference(embed(u), m.coords());
    res = r.norm();
    if (res < 1e-13) break;
    u += tangent(u).jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(r);
  }
  res = chart_->distance(embed(u), m.coords());
  if (!(res < 1e-9))
    throw InputError("leafchart", "point " + describe(m.coords()) + " is not on the leaf chart (residual " +
                                      format_number(res) + ")");
  return u;
}

// ---------------------------------------------------------------------------
// Reduced form

double ReducedFormReport::conditioning() const {
  if (reduced_dim == 0 || singular_values.empty()) return 1.0;
  return singular_values.front() > 0 ? singular_values.back() / singular_values.front() : 0.0;
}

namespace {

Mat omega_for(const std::vector<ScalarField>& f, const PoissonStructure& B, const Point& m) {
  const auto d = static_cast<Eigen::Index>(f.size());
  Mat W(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      W(a, b) = bracket(B, f[static_cast<std::size_t>(a)], f[static_cast<std::size_t>(b)], m);
  return W;
}

Expr combination(const Vec& c, const std::vector<Expr>& members) {
  std::optional<Expr> out;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (std::abs(c[j]) < 1e-15) continue;
    const Expr term = Expr::binary(ExprKind::Mul, Expr::number(c[j]), members[static_cast<std::size_t>(j)]);
    out = out ? Expr::binary(ExprKind::Add, *out, term) : term;
  }
  return out ? *out : Expr::number(0);
}

}  // namespace

ReducedFormReport reduced_form(const Point& m, const IsotropyAlgebra& iso, const GroupAction& action,
                               const InvariantFamily& family, const PoissonStructure& B,
                               const ReducedFormOptions& opts) {
  ReducedFormReport rep;
  rep.base = m;
  const DistributionFrame frame = distribution_at(m, family, B, opts.rank);
  if (frame.span.ill_conditioned)
    throw IllConditioned("distribution frame is ill-conditioned at " + describe(m.coords()));
  const Mat O = orbit_subspace(m, iso, action, opts.rank);
  rep.leaf_rank = frame.rank();
  rep.orbit_dim = static_cast<std::size_t>(O.cols());
  if (rep.orbit_dim > rep.leaf_rank)
    throw IllConditioned("orbit directions are not contained in the distribution at " + describe(m.coords()));
  rep.reduced_dim = rep.leaf_rank - rep.orbit_dim;

  const auto n = static_cast<Eigen::Index>(m.chart()->dim());
  const Mat Pperp = Mat::Identity(n, n) - O * O.transpose();
  Mat R = Pperp * frame.generators;
  const double scale = R.colwise().norm().maxCoeff();
  for (std::size_t step = 0; step < rep.reduced_dim; ++step) {
    Eigen::Index best = -1;
    double best_norm = std::max(opts.rank.relative * scale, opts.rank.absolute);
    for (Eigen::Index j = 0; j < R.cols(); ++j) {
      if (std::find(rep.selected.begin(), rep.selected.end(), static_cast<std::size_t>(j)) != rep.selected.end()) continue;
      const double nj = R.col(j).norm();
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    if (best < 0) throw IllConditioned("no complement of dimension " + std::to_string(rep.reduced_dim) + " at " +
                                       describe(m.coords()));
    const Vec q = R.col(best) / best_norm;
    R -= q * (q.transpose() * R);
    rep.selected.push_back(static_cast<std::size_t>(best));
  }

  std::vector<ScalarField> f;
  std::vector<Expr> fe;
  for (const auto i : rep.selected) {
    f.push_back(family.fields[i]);
    fe.push_back(family.exprs[i]);
  }
  rep.omega = omega_for(f, B, m);
  rep.antisymmetry = rep.reduced_dim ? (rep.omega + rep.omega.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (rep.reduced_dim) {
    const Eigen::JacobiSVD<Mat> svd(rep.omega);
    rep.singular_values.assign(svd.singularValues().data(), svd.singularValues().data() + svd.singularValues().size());
  }
  rep.nondegenerate =
      rep.reduced_dim == 0 || (rep.singular_values.front() > 0 &&
                               rep.singular_values.back() > 1e-8 * rep.singular_values.front());

  // Representative substitutions: family combinations whose Hamiltonian vector
  // lies in the orbit directions, and the supplied Casimirs.
  std::vector<Expr> shifts;
  const Mat C = null_space(Pperp * frame.generators, std::max(scale, 1e-300));
  for (Eigen::Index j = 0; j < C.cols(); ++j) shifts.push_back(combination(C.col(j), family.exprs));
  for (const auto& c : opts.casimirs) shifts.push_back(c);
  const Chart& chart = *m.chart();
  for (const auto& h : shifts)
    for (std::size_t a = 0; a < f.size(); ++a)
      for (const double lambda : {1.0, -1.0}) {
        std::vector<ScalarField> g = f;
        g[a] = make_field(Expr::binary(ExprKind::Add, fe[a], Expr::binary(ExprKind::Mul, Expr::number(lambda), h)), chart);
        rep.well_definedness = std::max(rep.well_definedness, (omega_for(g, B, m) - rep.omega).cwiseAbs().maxCoeff());
        ++rep.substitutions;
      }

  // Independence of the base point along the G_rho orbit.
  for (Eigen::Index j = 0; j < iso.basis.cols() && !f.empty(); ++j)
    for (const double t : {0.5, -1.0, 2.0}) {
      const Point moved = act(action, t * iso.basis.col(j), m);
      rep.transport = std::max(rep.transport, (omega_for(f, B, moved) - rep.omega).cwiseAbs().maxCoeff());
    }

  if (opts.leafchart) {
    const BoundLeafChart& lc = *opts.leafchart;
    const Vec u = lc.locate(m, opts.chart_guess.value_or(Vec::Zero(static_cast<Eigen::Index>(lc.dim()))));
    rep.chart_params = u;
    const Mat E = lc.tangent(u);
    const Mat W = lc.form(u);
    const auto solver = E.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);
    std::vector<Vec> w;
    double res = 0.0;
    for (const auto i : rep.selected) {
      const Vec X = frame.generators.col(static_cast<Eigen::Index>(i));
      w.push_back(solver.solve(X));
      res = std::max(res, (E * w.back() - X).cwiseAbs().maxCoeff());
    }
    for (std::size_t a = 0; a < w.size(); ++a)
      for (std::size_t b = 0; b < w.size(); ++b)
        res = std::max(res, std::abs(rep.omega(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -
                                     w[a].dot(W * w[b])));
    rep.pullback_residual = res;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Closure classification

std::vector<std::pair<std::size_t, std::size_t>> ClosureReport::dense_planes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : planes)
    if (p.label == "dense-line (Kronecker)") out.emplace_back(p.a, p.b);
  return out;
}

namespace {

struct LatticeHit {
  double along = 0, across = 0;
};

// Lattice vectors v != 0 of the period lattice with |v . d| <= extent.
std::vector<LatticeHit> lattice_hits(double Pa, double Pb, const Eigen::Vector2d& d, double extent) {
  std::vector<LatticeHit> out;
  const auto ia = static_cast<long>(std::ceil(extent / Pa)) + 1;
  const auto ib = static_cast<long>(std::ceil(extent / Pb)) + 1;
  for (long i = -ia; i <= ia; ++i)
    for (long j = -ib; j <= ib; ++j) {
      if (i == 0 && j == 0) continue;
      const Eigen::Vector2d v(Pa * static_cast<double>(i), Pb * static_cast<double>(j));
      const double along = v.dot(d);
      if (std::abs(along) <= extent) out.push_back({along, cross(d, v)});
    }
  return out;
}

double wrapped(double x, double P) { return x - P * std::floor(x / P); }
double short_way(double x, double P) { return x - P * std::round(x / P); }

Eigen::Vector2d canonical_direction(Eigen::Vector2d d) {
  d.normalize();
  if (d.x() < -1e-12 || (std::abs(d.x()) <= 1e-12 && d.y() < 0)) d = -d;
  return d;
}

}  // namespace

ClosureReport closure_classifier(const LeafSample& leaf, const Chart& chart, const RankSettings& rs,
                                 std::size_t min_cloud) {
  ClosureReport out;
  std::vector<std::size_t> periodic;
  for (std::size_t i = 0; i < chart.dim(); ++i)
    if (chart.periodic(i)) periodic.push_back(i);
  if (periodic.size() < 2) {
    out.status = "not-applicable";
    return out;
  }
  if (leaf.size() < min_cloud) {
    out.status = "insufficient-cloud";
    return out;
  }
  out.status = "ok";
  const std::size_t N = leaf.size();
  for (std::size_t ia = 0; ia < periodic.size(); ++ia)
    for (std::size_t ib = ia + 1; ib < periodic.size(); ++ib) {
      PlaneReport pr;
      pr.a = periodic[ia];
      pr.b = periodic[ib];
      const double Pa = *chart.axis(pr.a).period, Pb = *chart.axis(pr.b).period;
      const double Pmin = std::min(Pa, Pb);
      auto rows = [&](const Mat& Q) {
        Mat M(2, Q.cols());
        M.row(0) = Q.row(static_cast<Eigen::Index>(pr.a));
        M.row(1) = Q.row(static_cast<Eigen::Index>(pr.b));
        return M;
      };
      std::vector<Eigen::Vector2d> dirs;
      for (const auto& p : leaf.cloud) {
        const SpanInfo s = column_span(rows(p.frame), rs);
        pr.projected_rank = std::max(pr.projected_rank, s.rank);
        if (s.rank == 1) dirs.push_back(canonical_direction(s.basis.col(0)));
      }
      if (pr.projected_rank == 0) {
        pr.label = "point";
      } else if (pr.projected_rank == 2) {
        pr.label = "fills";
      } else {
        const Eigen::Vector2d d = dirs.front();
        pr.direction = d;
        for (const auto& e : dirs) pr.direction_spread = std::max(pr.direction_spread, std::abs(cross(d, e)));
        const Eigen::Vector2d c0(leaf.cloud[0].cover[static_cast<Eigen::Index>(pr.a)],
                                 leaf.cloud[0].cover[static_cast<Eigen::Index>(pr.b)]);
        std::vector<double> s(N);
        std::vector<Eigen::Vector2d> proj(N);
        for (std::size_t i = 0; i < N; ++i) {
          const auto& p = leaf.cloud[i];
          const Eigen::Vector2d delta =
              Eigen::Vector2d(p.cover[static_cast<Eigen::Index>(pr.a)], p.cover[static_cast<Eigen::Index>(pr.b)]) - c0;
          s[i] = delta.dot(d);
          pr.line_distance = std::max(pr.line_distance, std::abs(cross(d, delta)));
          proj[i] = Eigen::Vector2d(p.point[pr.a], p.point[pr.b]);
        }
        const auto [smin, smax] = std::minmax_element(s.begin(), s.end());
        pr.extent = *smax - *smin;

        // strand gap and closing length of the traced segment
        pr.strand_gap = std::hypot(Pa, Pb);
        for (const auto& h : lattice_hits(Pa, Pb, d, pr.extent)) {
          if (std::abs(h.across) <= 1e-9 * std::max(Pa, Pb) &&
              (!pr.closing_length || std::abs(h.along) < *pr.closing_length))
            pr.closing_length = std::abs(h.along);
          pr.strand_gap = std::min(pr.strand_gap, std::abs(h.across));
        }

        // empirical minimal returns between points on different strands, over
        // the N points nearest the seed along the line
        std::vector<std::size_t> order(N);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return std::abs(s[i]) < std::abs(s[j]); });
        for (std::size_t k = 0; k < 5; ++k) {
          const std::size_t Nk = N >> k;
          if (Nk < 16) break;
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t ii = 0; ii < Nk; ++ii)
            for (std::size_t jj = ii + 1; jj < Nk; ++jj) {
              const std::size_t i = order[ii], j = order[jj];
              if (std::abs(s[i] - s[j]) < Pmin / 2) continue;
              const Eigen::Vector2d diff(short_way(proj[j].x() - proj[i].x(), Pa), short_way(proj[j].y() - proj[i].y(), Pb));
              best = std::min(best, diff.norm());
            }
          if (std::isfinite(best)) pr.min_returns.emplace_back(Nk, best);
        }
        std::vector<double> lx, ly;
        for (const auto& [nk, r] : pr.min_returns)
          if (r > 0) {
            lx.push_back(std::log(static_cast<double>(nk)));
            ly.push_back(std::log(r));
          }
        pr.decay_exponent = slope(lx, ly);

        // box counts of the traced segment at three scales
        const double step = Pmin / 512;
        std::vector<double> lg, ln;
        for (std::size_t g = 0; g < 3; ++g) {
          const int cells = 4 << g;
          std::set<std::pair<int, int>> hit;
          const auto samples = static_cast<std::size_t>(std::ceil(pr.extent / step)) + 1;
          for (std::size_t q = 0; q < samples; ++q) {
            const double t = std::min(*smin + static_cast<double>(q) * step, *smax);
            const Eigen::Vector2d x = Eigen::Vector2d(leaf.cloud[0].point[pr.a], leaf.cloud[0].point[pr.b]) + t * d;
            hit.emplace(static_cast<int>(wrapped(x.x(), Pa) / Pa * cells) % cells,
                        static_cast<int>(wrapped(x.y(), Pb) / Pb * cells) % cells);
          }
          pr.boxes[g] = hit.size();
          lg.push_back(std::log(static_cast<double>(cells)));
          ln.push_back(std::log(static_cast<double>(hit.size())));
        }
        pr.box_dimension = slope(lg, ln);

        if (pr.direction_spread > 1e-9 || pr.line_distance > 1e-6)
          pr.label = "curve";
        else if (pr.closing_length)
          pr.label = "closed-curve";
        else if (pr.box_dimension >= 1.5 && pr.strand_gap <= Pmin / 16 && pr.decay_exponent < -0.3)
          pr.label = "dense-line (Kronecker)";
        else
          pr.label = "line";
      }
      out.planes.push_back(std::move(pr));
    }
  return out;
}

PropernessScreen properness_screen(const ClosureReport& closure, const LeafSample& leaf, const GroupAction& action,
                                   const IsotropyAlgebra& iso) {
  PropernessScreen out;
  if (iso.dim > 0 || action.dim() == 0) return out;
  const Chart& chart = *leaf.seed.chart();
  const Mat Xi = action.generator_matrix(leaf.seed.coords());
  for (const auto& pr : closure.planes) {
    if (pr.label != "dense-line (Kronecker)") continue;
    const double Pa = *chart.axis(pr.a).period, Pb = *chart.axis(pr.b).period;
    const Eigen::Vector2d d = pr.direction, nrm(-d.y(), d.x());
    for (Eigen::Index g = 0; g < Xi.cols(); ++g) {
      const Eigen::Vector2d u(Xi(static_cast<Eigen::Index>(pr.a), g), Xi(static_cast<Eigen::Index>(pr.b), g));
      const double un = u.dot(nrm);
      if (std::abs(un) <= 1e-9 * std::max(1.0, u.norm())) continue;
      PropernessScreen::Evidence ev{pr.a, pr.b, static_cast<std::size_t>(g), {}};
      // traced extents of nested clouds, nearest the seed along the line first
      const Eigen::Vector2d c0(leaf.cloud[0].cover[static_cast<Eigen::Index>(pr.a)],
                               leaf.cloud[0].cover[static_cast<Eigen::Index>(pr.b)]);
      std::vector<double> s;
      for (const auto& p : leaf.cloud)
        s.push_back((Eigen::Vector2d(p.cover[static_cast<Eigen::Index>(pr.a)], p.cover[static_cast<Eigen::Index>(pr.b)]) - c0)
                        .dot(d));
      std::vector<double> by_reach = s;
      std::sort(by_reach.begin(), by_reach.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
      for (std::size_t k = 5; k-- > 0;) {
        const std::size_t Nk = leaf.size() >> k;
        if (Nk < 2) continue;
        const auto [lo, hi] = std::minmax_element(by_reach.begin(), by_reach.begin() + static_cast<std::ptrdiff_t>(Nk));
        const double span = *hi - *lo;
        double tmin = std::numeric_limits<double>::infinity();
        for (const auto& h : lattice_hits(Pa, Pb, d, span))
          if (std::abs(h.across) > 1e-12) tmin = std::min(tmin, std::abs(h.across / un));
        if (std::isfinite(tmin)) ev.returns.emplace_back(span, tmin);
      }
      if (ev.returns.size() >= 2 && ev.returns.back().second < 0.9 * ev.returns.front().second) {
        out.warning = true;
        out.evidence.push_back(std::move(ev));
      }
    }
  }
  if (out.warning)
    out.message =
        "properness warning: g_rho is trivial but group elements returning the traced fiber to itself accumulate at "
        "the identity (dense-subgroup signature); G_rho does not appear to act properly on the fiber, so the "
        "reduction theorem's hypothesis fails";
  return out;
}

}  // namespace polarred
