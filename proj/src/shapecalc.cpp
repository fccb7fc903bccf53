#include "polyeit/shapecalc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "polyeit/errors.hpp"

namespace polyeit {

Vec2 apply_m0(const Vec2& grad_e, const EdgeFrame& frame, double k) {
  return dot(grad_e, frame.tangent) * frame.tangent + (dot(grad_e, frame.normal) / k) * frame.normal;
}

double ShapeGradient::pair(const VelocityField& V) const {
  if (V.size() != g.size()) throw ValidationError("velocity field length does not match the gradient");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += dot(g[i], V[i]);
  return s;
}

double ShapeGradient::norm() const {
  double s = 0.0;
  for (const auto& x : g) s += norm2(x);
  return std::sqrt(s);
}

ShapeGradient ShapeGradient::scaled(double s) const {
  ShapeGradient r = *this;
  for (auto& x : r.g) x *= s;
  return r;
}

ShapeGradient operator+(const ShapeGradient& a, const ShapeGradient& b) {
  if (a.g.empty()) return b;
  if (b.g.empty()) return a;
  if (a.size() != b.size()) throw ValidationError("shape gradients of different lengths");
  ShapeGradient r = a;
  for (std::size_t i = 0; i < r.g.size(); ++i) r.g[i] += b.g[i];
  return r;
}

VelocityField ShapeGradient::as_velocity() const { return VelocityField(g); }

void write_shape_gradient_csv(std::ostream& os, const ShapeGradient& g) {
  const auto prec = os.precision(17);
  os << "vertex_index,gx,gy\n";
  for (std::size_t i = 0; i < g.g.size(); ++i) os << i << ',' << g.g[i].x << ',' << g.g[i].y << '\n';
  os.precision(prec);
}

namespace {

void check_traces(const Polygon& poly, const InterfaceRing& ring, const std::vector<Vec2>& a,
                  const std::vector<Vec2>& b) {
  if (a.size() != ring.edges.size() || b.size() != ring.edges.size())
    throw ValidationError("gradient traces do not match the interface ring");
  for (const auto& e : ring.edges)
    if (e.poly_edge < 0 || static_cast<std::size_t>(e.poly_edge) >= poly.size())
      throw ValidationError("interface ring refers to a missing polygon edge");
}

std::vector<EdgeFrame> frames_of(const Polygon& poly) {
  std::vector<EdgeFrame> f;
  for (std::size_t i = 0; i < poly.size(); ++i) f.push_back(edge_frame(poly, i));
  return f;
}

}  // namespace

double shape_derivative(const Polygon& poly, double k, const InterfaceRing& ring, const std::vector<Vec2>& u_ext,
                        const std::vector<Vec2>& v_ext, const VelocityField& V) {
  check_traces(poly, ring, u_ext, v_ext);
  if (V.size() != poly.size()) throw ValidationError("velocity field length does not match the polygon");
  const auto frames = frames_of(poly);
  double s = 0.0;
  for (std::size_t j = 0; j < ring.edges.size(); ++j) {
    const auto& e = ring.edges[j];
    const EdgeFrame& fr = frames[static_cast<std::size_t>(e.poly_edge)];
    const Vec2 phi = interface_velocity(poly, V, static_cast<std::size_t>(e.poly_edge), e.midpoint);
    s += e.length * dot(apply_m0(u_ext[j], fr, k), v_ext[j]) * dot(phi, fr.normal);
  }
  return (k - 1.0) * s;
}

double shape_derivative_mixed(const Polygon& poly, double k, const InterfaceRing& ring,
                              const std::vector<Vec2>& u_ext, const std::vector<Vec2>& v_int, const VelocityField& V) {
  check_traces(poly, ring, u_ext, v_int);
  const auto frames = frames_of(poly);
  double s = 0.0;
  for (std::size_t j = 0; j < ring.edges.size(); ++j) {
    const auto& e = ring.edges[j];
    const EdgeFrame& fr = frames[static_cast<std::size_t>(e.poly_edge)];
    const Vec2 phi = interface_velocity(poly, V, static_cast<std::size_t>(e.poly_edge), e.midpoint);
    s += e.length * dot(u_ext[j], v_int[j]) * dot(phi, fr.normal);
  }
  return (k - 1.0) * s;
}

ShapeGradient per_vertex_gradient(const Polygon& poly, double k, const InterfaceRing& ring,
                                  const std::vector<Vec2>& u_ext, const std::vector<Vec2>& v_ext) {
  check_traces(poly, ring, u_ext, v_ext);
  const auto frames = frames_of(poly);
  const std::size_t n = poly.size();
  ShapeGradient out;
  out.g.assign(n, Vec2());
  for (std::size_t j = 0; j < ring.edges.size(); ++j) {
    const auto& e = ring.edges[j];
    const auto i = static_cast<std::size_t>(e.poly_edge);
    const EdgeFrame& fr = frames[i];
    const double s = edge_parameter(poly, i, e.midpoint);
    const double c = (k - 1.0) * e.length * dot(apply_m0(u_ext[j], fr, k), v_ext[j]);
    out.g[i] += (c * (1.0 - s)) * fr.normal;
    out.g[(i + 1) % n] += (c * s) * fr.normal;
  }
  return out;
}

ShapeGradient functional_gradient(const FunctionalSpec& spec, const ForwardState& st) {
  const auto ue = recovered_trace(st.u, st.ring);
  const auto ve = recovered_trace(st.v, st.ring);
  ShapeGradient g = per_vertex_gradient(spec.poly, spec.k.k, st.ring, ue, ve);
  if (spec.pairing == FunctionalSpec::Pairing::neumann) g = g.scaled(-1.0);
  return g;
}

// ---------------------------------------------------------------------------
// Misfit

BoundarySamples BoundarySamples::from_field(const Field& u) {
  BoundarySamples s;
  const auto& loop = u.mesh->boundary();
  s.arc = loop.arc;
  s.values = u.trace();
  s.perimeter = loop.perimeter;
  return s;
}

std::vector<double> BoundarySamples::on(const Mesh& m) const {
  if (arc.size() != values.size() || arc.size() < 2 || !(perimeter > 0.0))
    throw ValidationError("boundary samples are malformed");
  const auto& loop = m.boundary();
  const double scale = perimeter / loop.perimeter;
  std::vector<double> out(loop.nodes.size());
  const std::size_t n = arc.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = std::fmod(loop.arc[i] * scale, perimeter);
    if (s < 0.0) s += perimeter;
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    if (it == arc.begin()) throw ValidationError("boundary samples do not start at arc length 0");
    const std::size_t j = static_cast<std::size_t>(it - arc.begin()) - 1;
    const double s0 = arc[j];
    const double s1 = j + 1 < n ? arc[j + 1] : perimeter;
    const double w = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
    out[i] = (1.0 - w) * values[j] + w * values[(j + 1) % n];
  }
  return out;
}

double misfit_value(const Field& u, const std::vector<double>& meas) {
  const auto tr = u.trace();
  if (meas.size() != tr.size()) throw ValidationError("measurement does not match the mesh boundary");
  std::vector<double> d(tr.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = tr[i] - meas[i];
  return 0.5 * boundary_inner(*u.mesh, d, d);
}

double misfit(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k, const BoundaryData& f,
              const BoundarySamples& meas, const GradingSpec& grading) {
  return evaluate_misfit(dom, poly, k, f, meas, grading, nullptr, false).J;
}

Field adjoint_state(const MeshPtr& m, const ConductivitySpec& k, const Field& u0, const std::vector<double>& meas) {
  const auto tr = u0.trace();
  if (meas.size() != tr.size()) throw ValidationError("measurement does not match the mesh boundary");
  const auto& loop = m->boundary();
  std::vector<double> d(tr.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = tr[i] - meas[i];
    mean += loop.weight[i] * d[i];
  }
  mean /= loop.perimeter;
  for (auto& x : d) x -= mean;
  std::vector<double> sigma = u0.sigma.size() == m->triangle_count() ? u0.sigma : element_sigma(*m, k);
  Field w = solve_neumann(m, sigma, BoundaryData::nodal(BoundaryData::Kind::neumann, std::move(d)));
  w.k = k.k;
  w.tag = "adjoint";
  return w;
}

ShapeGradient misfit_gradient(const Polygon& poly, double k, const InterfaceRing& ring,
                              const std::vector<Vec2>& u0_ext, const std::vector<Vec2>& w0_ext) {
  return per_vertex_gradient(poly, k, ring, u0_ext, w0_ext).scaled(-1.0);
}

MisfitEvaluation evaluate_misfit(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k,
                                 const BoundaryData& f, const BoundarySamples& meas, const GradingSpec& grading,
                                 const Polygon* anchor, bool with_gradient, const SolverOptions& solver) {
  MeshOptions opts;
  if (anchor) opts.anchor = std::vector<Polygon>{*anchor};
  MisfitEvaluation ev;
  ev.mesh = generate_mesh(dom, {poly}, grading, opts);
  ev.u0 = solve_neumann(ev.mesh, k, f.as(BoundaryData::Kind::neumann), solver);
  const auto m = meas.on(*ev.mesh);
  ev.J = misfit_value(ev.u0, m);
  if (with_gradient) {
    ev.w0 = adjoint_state(ev.mesh, k, ev.u0, m);
    const InterfaceRing ring = interface_ring(*ev.mesh, poly);
    ev.gradient = misfit_gradient(poly, k.k, ring, recovered_trace(ev.u0, ring),
                                  recovered_trace(ev.w0, ring));
  }
  return ev;
}

}  // namespace polyeit
