#include "polyeit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/parallel.hpp"
#include "polyeit/shapecalc.hpp"

namespace polyeit {

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& e, double floor) {
  if (t.size() != e.size()) throw ValidationError("rate fit: t and e differ in length");
  RateFit r;
  r.t = t;
  r.e = e;
  r.floor = floor;
  r.used.assign(t.size(), 0);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) throw ValidationError("rate fit: t must be positive");
    if (!(e[i] >= 0.0) || !std::isfinite(e[i])) throw ValidationError("rate fit: e must be finite and non-negative");
    if (e[i] > 10.0 * floor && e[i] > 0.0) {
      r.used[i] = 1;
      xs.push_back(std::log(t[i]));
      ys.push_back(std::log(e[i]));
    }
  }
  // monotone along decreasing t
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] > t[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (e[order[i]] > e[order[i - 1]]) r.monotone = false;
  if (!r.monotone) r.warnings.push_back("e(t) is not monotone in t");

  r.n_used = xs.size();
  if (r.n_used < 4) {
    r.degenerate = true;
    r.slope = std::numeric_limits<double>::quiet_NaN();
    r.warnings.push_back("only " + std::to_string(r.n_used) + " samples above the noise floor");
    return r;
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("rate fit: all t values coincide");
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = ys[i] - (r.intercept + r.slope * xs[i]);
    ss += d * d;
  }
  r.residual = std::sqrt(ss / n);
  r.t_lo = std::exp(*std::min_element(xs.begin(), xs.end()));
  r.t_hi = std::exp(*std::max_element(xs.begin(), xs.end()));
  return r;
}

std::vector<double> default_t_list() {
  std::vector<double> t;
  double x = 0.1;
  for (int i = 0; i < 8; ++i, x *= 0.5) t.push_back(x);
  return t;
}

void write_rate_csv(std::ostream& os, const RateFit& fit) {
  const auto prec = os.precision(17);
  os << "t,value\n";
  for (std::size_t i = 0; i < fit.t.size(); ++i) os << fit.t[i] << ',' << fit.e[i] << '\n';
  os << "slope,residual,n_used\n";
  if (fit.degenerate)
    os << "nan,nan," << fit.n_used << '\n';
  else
    os << fit.slope << ',' << fit.residual << ',' << fit.n_used << '\n';
  os.precision(prec);
}

// ---------------------------------------------------------------------------
// Study plumbing

namespace {

GradingSpec jittered(GradingSpec g) {
  // a slightly different size field moves every Steiner point
  g.h *= 1.02;
  g.h_min *= 1.02;
  g.interface_h *= 1.02;
  return g;
}

struct Sample {
  double t = 0.0;
  bool ok = false;
  double e = 0.0;
  std::string warning;
};

// Admissible perturbed polygon for t, or an explanation.
bool admissible(const StudySetup& s, const VelocityField& V, double t, Polygon& out, std::string& why) {
  if (!(t > 0.0)) throw ValidationError("rate study: t must be positive");
  const double bound = admissible_t_bound(V, s.constraints.d0);
  if (!(t < bound)) {
    why = "t = " + std::to_string(t) + " exceeds the admissible bound " + std::to_string(bound);
    return false;
  }
  try {
    out = perturb(s.spec.poly, V, t);
  } catch (const GeometryError& e) {
    why = "t = " + std::to_string(t) + ": " + e.what();
    return false;
  }
  const auto rep = validate_constraints(out, s.constraints, s.spec.domain);
  if (!rep.ok()) {
    why = "t = " + std::to_string(t) + ": constraint " + rep.first_failure() + " violated";
    return false;
  }
  return true;
}

MeshPtr study_mesh(const StudySetup& s, const Polygon& p, std::string& warn) {
  // sigma = 1 does not see the polygon: every t is the reference problem
  if (s.spec.k.k == 1.0) return generate_mesh(s.spec.domain, {s.spec.poly}, s.spec.grading);
  if (s.anchored) {
    MeshOptions o;
    o.anchor = std::vector<Polygon>{s.spec.poly};
    try {
      return generate_mesh(s.spec.domain, {p}, s.spec.grading, o);
    } catch (const MeshError& e) {
      warn = std::string("morph failed, remeshed: ") + e.what();
    }
  }
  return generate_mesh(s.spec.domain, {p}, s.spec.grading);
}

template <class F>
RateFit run_samples(const StudySetup& s, const VelocityField& V, const std::vector<double>& t_list, double floor,
                    F&& measure) {
  if (V.size() != s.spec.poly.size()) throw ValidationError("velocity field length does not match the polygon");
  std::vector<Sample> out(t_list.size());
  parallel_for(t_list.size(), [&](std::size_t i) {
    Sample& smp = out[i];
    smp.t = t_list[i];
    Polygon p;
    if (!admissible(s, V, smp.t, p, smp.warning)) return;
    const MeshPtr m = study_mesh(s, p, smp.warning);
    smp.e = measure(smp.t, p, m);
    smp.ok = true;
  });
  std::vector<double> t, e;
  std::vector<std::string> warn;
  for (const auto& smp : out) {
    if (!smp.warning.empty()) warn.push_back(smp.warning);
    if (!smp.ok) continue;
    t.push_back(smp.t);
    e.push_back(smp.e);
  }
  if (t.empty()) {
    RateFit r;
    r.floor = floor;
    r.degenerate = true;
    r.slope = std::numeric_limits<double>::quiet_NaN();
    r.warnings = warn;
    r.warnings.push_back("no admissible t");
    return r;
  }
  RateFit r = fit_rate(t, e, floor);
  r.warnings.insert(r.warnings.begin(), warn.begin(), warn.end());
  return r;
}

MeshPtr reference_mesh(const StudySetup& s) { return generate_mesh(s.spec.domain, {s.spec.poly}, s.spec.grading); }

MeshPtr floor_mesh(const StudySetup& s) {
  return generate_mesh(s.spec.domain, {s.spec.poly}, jittered(s.spec.grading));
}

// Below this fraction of the reference scale a difference is round-off.
constexpr double kRoundoff = 1e-12;

// Relative resolution of two independent solves: round-off or the solver tolerance.
double solve_floor(const StudySetup& s) { return std::max(kRoundoff, s.spec.solver.rtol); }

}  // namespace

RateFit derivative_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list) {
  StudySetup s = setup;
  s.spec.pairing = FunctionalSpec::Pairing::dirichlet;
  s.spec.anchor.reset();
  const ForwardState st = forward_state(s.spec);
  const double g0 = st.value;
  const double d0 = functional_gradient(s.spec, st).pair(V);
  // |<Lambda f, g>| <= sqrt(E(u) E(v)) sets the scale of pairing errors
  double floor = solve_floor(s) * std::sqrt(energy(st.u) * energy(st.v));
  if (s.estimate_floor && !s.anchored) {
    FunctionalSpec j = s.spec;
    j.grading = jittered(j.grading);
    floor = std::max(floor, std::abs(functional_G(j) - g0));
  }
  return run_samples(s, V, t_list, floor, [&](double t, const Polygon&, const MeshPtr& m) {
    const Field u = solve_dirichlet(m, s.spec.k, s.spec.f.as(BoundaryData::Kind::dirichlet), s.spec.solver);
    return std::abs(boundary_pairing(u, s.spec.g) - g0 - t * d0);
  });
}

RateFit energy_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list) {
  const auto f = setup.spec.f.as(BoundaryData::Kind::dirichlet);
  const Field u0 = solve_dirichlet(reference_mesh(setup), setup.spec.k, f, setup.spec.solver);
  double floor = solve_floor(setup) * std::sqrt(energy(u0));
  if (setup.estimate_floor && !setup.anchored)
    floor = std::max(floor, h1_seminorm_diff(solve_dirichlet(floor_mesh(setup), setup.spec.k, f, setup.spec.solver), u0));
  return run_samples(setup, V, t_list, floor, [&](double, const Polygon&, const MeshPtr& m) {
    return h1_seminorm_diff(solve_dirichlet(m, setup.spec.k, f, setup.spec.solver), u0);
  });
}

RateFit boundary_rate_study(const StudySetup& setup, const VelocityField& V, const std::vector<double>& t_list) {
  const auto f = setup.spec.f.as(BoundaryData::Kind::neumann);
  const Field u0 = solve_neumann(reference_mesh(setup), setup.spec.k, f, setup.spec.solver);
  const auto tr = u0.trace();
  double floor = solve_floor(setup) * std::sqrt(boundary_inner(*u0.mesh, tr, tr));
  if (setup.estimate_floor && !setup.anchored)
    floor = std::max(floor, boundary_l2_diff(solve_neumann(floor_mesh(setup), setup.spec.k, f, setup.spec.solver), u0));
  return run_samples(setup, V, t_list, floor, [&](double, const Polygon&, const MeshPtr& m) {
    return boundary_l2_diff(solve_neumann(m, setup.spec.k, f, setup.spec.solver), u0);
  });
}

RateFit area_rate_study(const Polygon& poly, const VelocityField& V, const std::vector<double>& t_list) {
  std::vector<double> t, e;
  for (const double x : t_list) {
    t.push_back(x);
    e.push_back(symmetric_difference_area(poly, perturb(poly, V, x)));
  }
  return fit_rate(t, e, 1e-15 * poly.area());
}

// ---------------------------------------------------------------------------
// Operator derivative

Eigen::MatrixXd dtn_derivative_matrix(const MeshPtr& m, const Polygon& poly, const ConductivitySpec& k,
                                      const BoundaryBasis& basis, const VelocityField& V, const SolverOptions& opts) {
  const InterfaceRing ring = interface_ring(*m, poly);
  const auto sigma = element_sigma(*m, k);
  const std::size_t nb = basis.size();
  std::vector<std::vector<Vec2>> tr(nb);
  parallel_for(nb, [&](std::size_t j) {
    tr[j] = recovered_trace(solve_dirichlet(m, sigma, basis.elements[j], opts), ring);
  });
  Eigen::MatrixXd L(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = shape_derivative(poly, k.k, ring, tr[j], tr[i], V);
  return L;
}

OperatorStudy operator_derivative_check(const StudySetup& setup, const VelocityField& V,
                                        const std::vector<double>& t_list, int n_max) {
  const BoundaryBasis basis = BoundaryBasis::trig(n_max, true);
  const MeshPtr m0 = reference_mesh(setup);
  const SolverOptions& so = setup.spec.solver;
  OperatorStudy out;
  out.derivative = dtn_derivative_matrix(m0, setup.spec.poly, setup.spec.k, basis, V, so);
  out.symmetry = symmetry_defect(out.derivative);
  const Eigen::MatrixXd P0 = dtn_matrix(m0, setup.spec.k, basis, so).m;
  const Eigen::MatrixXd G = basis.gram(*m0);
  double floor = solve_floor(setup) * weighted_operator_norm(P0, G);
  if (setup.estimate_floor && !setup.anchored)
    floor = std::max(floor, weighted_operator_norm(dtn_matrix(floor_mesh(setup), setup.spec.k, basis, so).m - P0, G));
  out.fit = run_samples(setup, V, t_list, floor, [&](double t, const Polygon&, const MeshPtr& m) {
    const Eigen::MatrixXd D = dtn_matrix(m, setup.spec.k, basis, so).m - P0 - t * out.derivative;
    return weighted_operator_norm(D, G);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Corner singularity

std::vector<double> default_annuli(const Polygon& poly, std::size_t vertex) {
  const std::size_t n = poly.size();
  if (vertex >= n) throw ValidationError("vertex index out of range");
  const double e = std::min(poly.edge_length(vertex), poly.edge_length((vertex + n - 1) % n));
  std::vector<double> r;
  double x = e / 4.0;
  for (int i = 0; i < 6; ++i, x *= 0.6) r.push_back(x);
  return r;
}

SingularityFit singularity_study(const Field& u, const Polygon& poly, std::size_t vertex, std::vector<double> radii) {
  if (vertex >= poly.size()) throw ValidationError("vertex index out of range");
  if (radii.empty()) radii = default_annuli(poly, vertex);
  if (radii.size() < 5) throw ValidationError("singularity study needs at least 4 annuli");
  const double q = radii[1] / radii[0];
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    if (!(radii[i + 1] < radii[i]) || !(radii[i + 1] > 0.0))
      throw ValidationError("annulus radii must decrease strictly");
    if (std::abs(radii[i + 1] / radii[i] - q) > 1e-9 * q) throw ValidationError("annulus radii must be geometric");
  }
  const Mesh& m = *u.mesh;
  const Vec2 c = poly[vertex];
  const std::size_t na = radii.size() - 1;
  SingularityFit fit;
  fit.vertex = vertex;
  fit.radii = radii;
  fit.grad_max.assign(na, 0.0);
  fit.elements.assign(na, 0);
  fit.r_at_max.assign(na, 0.0);
  std::vector<int> cand;
  m.candidates(c - Vec2{radii[0], radii[0]}, c + Vec2{radii[0], radii[0]}, cand);
  for (const int t : cand) {
    const double d = norm(m.centroid(static_cast<std::size_t>(t)) - c);
    if (!(d < radii[0]) || d < radii[na]) continue;
    std::size_t j = 0;
    while (j + 1 < na && d < radii[j + 1]) ++j;
    fit.elements[j]++;
    const double g = norm(u.gradient(static_cast<std::size_t>(t)));
    if (g > fit.grad_max[j]) {
      fit.grad_max[j] = g;
      fit.r_at_max[j] = d;
    }
  }
  for (std::size_t j = 0; j < na; ++j)
    if (fit.elements[j] < 20) {
      // 20 triangles of size h fill about 20 * 0.43 h^2
      const double area = M_PI * (radii[j] * radii[j] - radii[j + 1] * radii[j + 1]);
      std::ostringstream os;
      os << "annulus " << j << " around vertex " << vertex << " holds " << fit.elements[j]
         << " triangles; needs h_min <= " << std::sqrt(area / (20.0 * 0.433));
      throw ValidationError(os.str());
    }
  // an element gradient is the field's gradient near the centroid, so the
  // maximum is paired with the distance where it was taken
  const RateFit rf = fit_rate(fit.r_at_max, fit.grad_max);
  if (rf.degenerate) throw ValidationError("singularity study: gradient vanishes near the vertex");
  fit.slope = rf.slope;
  fit.residual = rf.residual;
  fit.omega = 1.0 + rf.slope;
  return fit;
}

// ---------------------------------------------------------------------------
// Volume form of the increment

double alessandrini_increment(const Field& u_t, const Field& v_0, const Polygon& p0, const Polygon& pt, double k) {
  if (u_t.mesh != v_0.mesh) throw ValidationError("alessandrini increment needs both fields on one mesh");
  const Mesh& m = *u_t.mesh;
  // both rings must close, otherwise sigma_t - sigma_0 is not elementwise constant
  interface_ring(m, p0);
  interface_ring(m, pt);
  const auto r0 = m.regions_for(p0);
  const auto rt = m.regions_for(pt);
  const ConductivitySpec ks{k};
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const double ds = ks.sigma(rt[t]) - ks.sigma(r0[t]);
    if (ds != 0.0) s += ds * m.triangle_area(t) * dot(u_t.gradient(t), v_0.gradient(t));
  }
  return s;
}

AlessandriniCheck alessandrini_check(const FunctionalSpec& spec, const VelocityField& V, double t) {
  AlessandriniCheck c;
  if (t == 0.0) return c;
  const Polygon& p0 = spec.poly;
  const Polygon pt = perturb(p0, V, t);
  const MeshPtr m = generate_mesh(spec.domain, {pt, p0}, spec.grading);
  c.triangles = m->triangle_count();
  const auto r0 = m->regions_for(p0);
  const auto rt = m->regions_for(pt);
  const auto s0 = element_sigma(*m, spec.k, &r0);
  const auto st = element_sigma(*m, spec.k, &rt);
  using K = BoundaryData::Kind;
  // the identity is exact for exact discrete solutions, so solve tightly
  SolverOptions so = spec.solver;
  so.rtol = std::min(so.rtol, 1e-12);
  const Field ut = solve_dirichlet(m, st, spec.f.as(K::dirichlet), so);
  const Field u0 = solve_dirichlet(m, s0, spec.f.as(K::dirichlet), so);
  const Field v0 = solve_dirichlet(m, s0, spec.g.as(K::dirichlet), so);
  c.pairing_difference = boundary_pairing(ut, spec.g) - boundary_pairing(u0, spec.g);
  c.increment = alessandrini_increment(ut, v0, p0, pt, spec.k.k);
  const double scale = std::abs(c.pairing_difference);
  c.relative_gap = scale > 0.0 ? std::abs(c.increment - c.pairing_difference) / scale
                               : std::abs(c.increment - c.pairing_difference);
  return c;
}

// ---------------------------------------------------------------------------
// Finite differences

FdEstimate central_fd(const std::function<double(double)>& G, const std::vector<double>& ts) {
  if (ts.empty()) throw ValidationError("finite differences need at least one step");
  for (const double t : ts)
    if (!(t > 0.0)) throw ValidationError("finite-difference steps must be positive");
  std::vector<double> vals(2 * ts.size());
  parallel_for(vals.size(), [&](std::size_t i) { vals[i] = G(i % 2 == 0 ? ts[i / 2] : -ts[i / 2]); });
  FdEstimate fd;
  fd.t = ts;
  for (std::size_t i = 0; i < ts.size(); ++i) fd.central.push_back((vals[2 * i] - vals[2 * i + 1]) / (2.0 * ts[i]));
  const auto smallest = std::min_element(ts.begin(), ts.end()) - ts.begin();
  fd.raw = fd.central[static_cast<std::size_t>(smallest)];
  // the central difference is even in t: extrapolate in x = t^2
  double ex = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < ts.size(); ++j)
      if (j != i) w *= ts[j] * ts[j] / (ts[j] * ts[j] - ts[i] * ts[i]);
    ex += w * fd.central[i];
  }
  fd.extrapolated = ex;
  return fd;
}

FdEstimate functional_fd(const FunctionalSpec& spec, const VelocityField& V, bool anchored,
                         const std::vector<double>& ts) {
  return central_fd(
      [&](double t) {
        FunctionalSpec s = spec;
        s.poly = perturb(spec.poly, V, t);
        if (anchored) s.anchor = spec.poly;
        return functional_G(s);
      },
      ts);
}

PairingConsistency pairing_consistency(const FunctionalSpec& spec, const VelocityField& V) {
  FunctionalSpec d = spec;
  d.pairing = FunctionalSpec::Pairing::dirichlet;
  d.anchor.reset();
  const ForwardState st = forward_state(d);
  PairingConsistency pc;
  pc.dirichlet = functional_gradient(d, st).pair(V);

  const auto& loop = st.mesh->boundary();
  auto matched = [&](const Field& u) {
    auto g = boundary_flux(u);
    // drop the solver residual that leaks into the mean
    double mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += loop.weight[i] * g[i];
    mean /= loop.perimeter;
    for (auto& x : g) x -= mean;
    return BoundaryData::nodal(BoundaryData::Kind::neumann, std::move(g));
  };
  FunctionalSpec n = d;
  n.pairing = FunctionalSpec::Pairing::neumann;
  n.f = matched(st.u);
  n.g = matched(st.v);
  const ForwardState sn = forward_state(n);
  pc.neumann = functional_gradient(n, sn).pair(V);
  pc.neumann_fd = functional_fd(n, V, true).extrapolated;
  const double scale = std::abs(pc.dirichlet);
  pc.relative_gap = std::abs(pc.neumann_fd + pc.dirichlet) / (scale > 0.0 ? scale : 1.0);
  return pc;
}

}  // namespace polyeit
