#include "polyeit/fem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "polyeit/errors.hpp"

namespace polyeit {

void ConductivitySpec::validate(bool allow_unit) const {
  if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("conductivity: k must be positive and finite");
  if (!allow_unit && k == 1.0) throw ValidationError("conductivity: k = 1 has no inclusion");
}

std::vector<double> element_sigma(const Mesh& m, const ConductivitySpec& k, const std::vector<Region>* regions) {
  k.validate();
  if (regions && regions->size() != m.triangle_count()) throw MeshError("region list does not match the mesh");
  std::vector<double> s(m.triangle_count());
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = k.sigma(regions ? (*regions)[t] : m.triangles()[t].region);
  return s;
}

// ---------------------------------------------------------------------------
// Boundary data

BoundaryData BoundaryData::cosine(Kind kind, int n) {
  BoundaryData d;
  d.kind = kind;
  d.mode = Mode::cosine;
  d.index = n;
  return d;
}

BoundaryData BoundaryData::sine(Kind kind, int n) {
  BoundaryData d = cosine(kind, n);
  d.mode = Mode::sine;
  return d;
}

BoundaryData BoundaryData::coordinate_x(Kind kind) {
  BoundaryData d;
  d.kind = kind;
  d.mode = Mode::coord_x;
  return d;
}

BoundaryData BoundaryData::coordinate_y(Kind kind) {
  BoundaryData d = coordinate_x(kind);
  d.mode = Mode::coord_y;
  return d;
}

BoundaryData BoundaryData::nodal(Kind kind, std::vector<double> values) {
  BoundaryData d;
  d.kind = kind;
  d.mode = Mode::nodal;
  d.values = std::move(values);
  return d;
}

BoundaryData BoundaryData::function(Kind kind, std::function<double(const Vec2&)> fn) {
  BoundaryData d;
  d.kind = kind;
  d.mode = Mode::function;
  d.fn = std::move(fn);
  return d;
}

BoundaryData BoundaryData::as(Kind k) const {
  BoundaryData d = *this;
  d.kind = k;
  return d;
}

std::vector<double> BoundaryData::boundary_values(const Mesh& m) const {
  const BoundaryLoop& loop = m.boundary();
  const std::size_t nb = loop.nodes.size();
  if (nb == 0) throw MeshError("mesh has no outer boundary");
  std::vector<double> v(nb);
  if (mode == Mode::nodal) {
    if (values.size() != nb)
      throw ValidationError("boundary data has " + std::to_string(values.size()) + " nodal values, mesh has " +
                            std::to_string(nb) + " boundary nodes");
    v = values;
  } else {
    for (std::size_t i = 0; i < nb; ++i) {
      const Vec2& p = m.nodes()[static_cast<std::size_t>(loop.nodes[i])];
      const double theta = 2.0 * std::numbers::pi * loop.arc[i] / loop.perimeter;
      switch (mode) {
        case Mode::cosine: v[i] = std::cos(index * theta); break;
        case Mode::sine: v[i] = std::sin(index * theta); break;
        case Mode::coord_x: v[i] = p.x; break;
        case Mode::coord_y: v[i] = p.y; break;
        case Mode::function: v[i] = fn(p); break;
        case Mode::nodal: break;
      }
    }
  }
  for (const double x : v)
    if (!std::isfinite(x)) throw ValidationError("boundary data has non-finite values");
  if (kind == Kind::neumann) {
    double mean = 0.0, mass = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      mean += loop.weight[i] * v[i];
      mass += loop.weight[i];
      scale += loop.weight[i] * std::abs(v[i]);
    }
    // Analytic data only carries quadrature error in its mean.
    const double allowed = mode == Mode::nodal ? 1e-10 * std::max(1.0, scale) : 1e-2 * scale;
    if (std::abs(mean) > allowed)
      throw ValidationError("neumann data is not mean-zero: integral " + std::to_string(mean));
    for (auto& x : v) x -= mean / mass;
  }
  return v;
}

std::string BoundaryData::describe() const {
  std::string k = kind == Kind::dirichlet ? "dirichlet:" : "neumann:";
  switch (mode) {
    case Mode::cosine: return k + "cos" + std::to_string(index);
    case Mode::sine: return k + "sin" + std::to_string(index);
    case Mode::coord_x: return k + "x";
    case Mode::coord_y: return k + "y";
    case Mode::nodal: return k + "nodal" + std::to_string(values.size());
    case Mode::function: return k + "function";
  }
  return k;
}

// ---------------------------------------------------------------------------
// Sparse algebra

void CsrMatrix::multiply(const std::vector<double>& x, std::vector<double>& y) const {
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      s += val[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
    y[i] = s;
  }
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
    if (col[static_cast<std::size_t>(k)] == static_cast<int>(j)) return val[static_cast<std::size_t>(k)];
  return 0.0;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
  return d;
}

namespace {

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Element stiffness: sigma * area * grad phi_i . grad phi_j.
std::array<std::array<double, 3>, 3> element_matrix(const Mesh& m, std::size_t t, double sigma) {
  const auto g = m.hat_gradients(t);
  const double a = m.triangle_area(t);
  std::array<std::array<double, 3>, 3> e{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) e[i][j] = sigma * a * dot(g[i], g[j]);
  return e;
}

CsrMatrix submatrix(const CsrMatrix& A, const std::vector<int>& keep_index) {
  // keep_index[i] = compact index or -1
  CsrMatrix B;
  for (const int c : keep_index)
    if (c >= 0) ++B.n;
  B.row_ptr.assign(B.n + 1, 0);
  for (std::size_t i = 0; i < A.n; ++i) {
    const int r = keep_index[i];
    if (r < 0) continue;
    for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
      const int c = keep_index[static_cast<std::size_t>(A.col[static_cast<std::size_t>(k)])];
      if (c < 0) continue;
      B.col.push_back(c);
      B.val.push_back(A.val[static_cast<std::size_t>(k)]);
    }
    B.row_ptr[static_cast<std::size_t>(r) + 1] = static_cast<int>(B.col.size());
  }
  return B;
}

}  // namespace

LinearSystem assemble(const Mesh& m, const std::vector<double>& sigma) {
  if (sigma.size() != m.triangle_count()) throw MeshError("conductivity list does not match the mesh");
  const std::size_t n = m.node_count();
  std::vector<std::vector<int>> adj(n);
  for (const auto& t : m.triangles())
    for (const int a : t.v)
      for (const int b : t.v) adj[static_cast<std::size_t>(a)].push_back(b);
  LinearSystem sys;
  CsrMatrix& A = sys.A;
  A.n = n;
  A.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = adj[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    A.row_ptr[i + 1] = A.row_ptr[i] + static_cast<int>(r.size());
    A.col.insert(A.col.end(), r.begin(), r.end());
  }
  A.val.assign(A.col.size(), 0.0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    if (!(m.triangle_area(t) > 0.0)) throw MeshError("degenerate triangle " + std::to_string(t));
    const auto e = element_matrix(m, t, sigma[t]);
    const auto& v = m.triangles()[t].v;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto row = static_cast<std::size_t>(v[i]);
      for (std::size_t j = 0; j < 3; ++j) {
        const auto first = A.col.begin() + A.row_ptr[row];
        const auto last = A.col.begin() + A.row_ptr[row + 1];
        const auto pos = std::lower_bound(first, last, v[j]) - A.col.begin();
        A.val[static_cast<std::size_t>(pos)] += e[i][j];
      }
    }
  }
  sys.rhs.assign(n, 0.0);
  return sys;
}

LinearSystem assemble(const Mesh& m, const ConductivitySpec& k) { return assemble(m, element_sigma(m, k)); }

SolveStats conjugate_gradient(const CsrMatrix& A, const std::vector<double>& b, std::vector<double>& x,
                              const SolverOptions& opts) {
  const std::size_t n = A.n;
  x.resize(n, 0.0);
  SolveStats st;
  const double bnorm = std::sqrt(dotv(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }
  std::vector<double> dinv = A.diagonal();
  for (auto& d : dinv) {
    if (!(d > 0.0)) throw SolverError("matrix has a non-positive diagonal entry");
    d = 1.0 / d;
  }
  std::vector<double> r(n), z(n), p(n), ap(n);
  A.multiply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = dotv(r, z);
  const int cap = std::max(10, static_cast<int>(opts.cap_factor * std::sqrt(static_cast<double>(n))));
  std::vector<double> history;
  double rel = std::sqrt(dotv(r, r)) / bnorm;
  int it = 0;
  while (rel > opts.rtol) {
    if (it >= cap) {
      std::ostringstream os;
      os << "conjugate gradients did not converge in " << cap << " iterations; relative residual history tail:";
      for (std::size_t k = history.size() > 8 ? history.size() - 8 : 0; k < history.size(); ++k)
        os << ' ' << history[k];
      throw SolverError(os.str());
    }
    A.multiply(p, ap);
    const double pap = dotv(p, ap);
    if (!(pap > 0.0)) throw SolverError("conjugate gradients hit a non-positive curvature direction");
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    const double rz_new = dotv(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++it;
    rel = std::sqrt(dotv(r, r)) / bnorm;
    history.push_back(rel);
  }
  st.iterations = it;
  st.residual = rel;
  return st;
}

// ---------------------------------------------------------------------------
// Fields

Vec2 Field::gradient(std::size_t t) const {
  const auto g = mesh->hat_gradients(t);
  const auto& v = mesh->triangles()[t].v;
  Vec2 s;
  for (std::size_t i = 0; i < 3; ++i) s += values[static_cast<std::size_t>(v[i])] * g[i];
  return s;
}

std::vector<double> Field::trace() const {
  const auto& loop = mesh->boundary();
  std::vector<double> v(loop.nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values[static_cast<std::size_t>(loop.nodes[i])];
  return v;
}

double Field::boundary_integral() const { return boundary_inner(*mesh, trace(), std::vector<double>(mesh->boundary().nodes.size(), 1.0)); }

Field solve_dirichlet(const MeshPtr& m, const ConductivitySpec& k, const BoundaryData& f, const SolverOptions& opts) {
  Field u = solve_dirichlet(m, element_sigma(*m, k), f, opts);
  u.k = k.k;
  return u;
}

Field solve_dirichlet(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryData& f,
                      const SolverOptions& opts) {
  if (f.kind != BoundaryData::Kind::dirichlet) throw ValidationError("solve_dirichlet needs dirichlet data");
  const auto g = f.boundary_values(*m);
  const LinearSystem sys = assemble(*m, sigma);
  const std::size_t n = m->node_count();
  std::vector<int> compact(n, -1);
  int ni = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!m->is_boundary_node(static_cast<int>(i))) compact[i] = ni++;
  Field u;
  u.mesh = m;
  u.sigma = sigma;
  u.tag = "dirichlet " + f.describe();
  u.values.assign(n, 0.0);
  const auto& loop = m->boundary();
  for (std::size_t i = 0; i < loop.nodes.size(); ++i) u.values[static_cast<std::size_t>(loop.nodes[i])] = g[i];
  if (ni > 0) {
    const CsrMatrix Ai = submatrix(sys.A, compact);
    std::vector<double> rhs(static_cast<std::size_t>(ni), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int r = compact[i];
      if (r < 0) continue;
      for (int kk = sys.A.row_ptr[i]; kk < sys.A.row_ptr[i + 1]; ++kk) {
        const auto c = static_cast<std::size_t>(sys.A.col[static_cast<std::size_t>(kk)]);
        if (compact[c] < 0) rhs[static_cast<std::size_t>(r)] -= sys.A.val[static_cast<std::size_t>(kk)] * u.values[c];
      }
    }
    std::vector<double> x;
    u.stats = conjugate_gradient(Ai, rhs, x, opts);
    for (std::size_t i = 0; i < n; ++i)
      if (compact[i] >= 0) u.values[i] = x[static_cast<std::size_t>(compact[i])];
  }
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  for (const double x : u.values)
    if (x < *lo - 1e-8 || x > *hi + 1e-8) u.stats.max_principle_ok = false;
  return u;
}

Field solve_neumann(const MeshPtr& m, const ConductivitySpec& k, const BoundaryData& g, const SolverOptions& opts) {
  Field u = solve_neumann(m, element_sigma(*m, k), g, opts);
  u.k = k.k;
  return u;
}

Field solve_neumann(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryData& g,
                    const SolverOptions& opts) {
  if (g.kind != BoundaryData::Kind::neumann) throw ValidationError("solve_neumann needs neumann data");
  const auto gv = g.boundary_values(*m);
  const LinearSystem sys = assemble(*m, sigma);
  const auto& loop = m->boundary();
  std::vector<double> b(m->node_count(), 0.0);
  for (std::size_t i = 0; i < loop.nodes.size(); ++i) b[static_cast<std::size_t>(loop.nodes[i])] = loop.weight[i] * gv[i];
  Field u;
  u.mesh = m;
  u.sigma = sigma;
  u.tag = "neumann " + g.describe();
  // The data is compatible, so CG stays in the range of the singular
  // operator; the boundary-mean condition then fixes the constant.
  u.stats = conjugate_gradient(sys.A, b, u.values, opts);
  double mean = 0.0;
  for (std::size_t i = 0; i < loop.nodes.size(); ++i) mean += loop.weight[i] * u.values[static_cast<std::size_t>(loop.nodes[i])];
  mean /= loop.perimeter;
  for (auto& x : u.values) x -= mean;
  return u;
}

std::vector<Vec2> gradient_trace(const Field& u, const InterfaceRing& ring, Side side) {
  std::vector<Vec2> out;
  out.reserve(ring.edges.size());
  const auto nt = static_cast<int>(u.mesh->triangle_count());
  for (const auto& e : ring.edges) {
    const int t = side == Side::interior ? e.tri_in : e.tri_out;
    if (t < 0 || t >= nt) throw MeshError("interface edge has no adjacent triangle on the requested side");
    out.push_back(u.gradient(static_cast<std::size_t>(t)));
  }
  return out;
}

std::vector<Vec2> recovered_trace(const Field& u, const InterfaceRing& ring) {
  const Mesh& m = *u.mesh;
  if (u.values.size() != m.node_count() || u.sigma.size() != m.triangle_count())
    throw MeshError("field does not match its mesh");
  const std::size_t n = ring.edges.size();
  std::vector<int> pos(m.node_count(), -1);
  for (std::size_t j = 0; j < n; ++j) {
    if (ring.edges[j].b != ring.edges[(j + 1) % n].a) throw MeshError("interface ring is not a closed loop");
    pos[static_cast<std::size_t>(ring.edges[j].a)] = static_cast<int>(j);
  }
  // inside residual at ring node j is int sigma dn u phi_j over the ring
  std::vector<double> r(n, 0.0), w(n, 0.0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    if (m.triangles()[t].region != Region::inside) continue;
    const auto& v = m.triangles()[t].v;
    const auto g = m.hat_gradients(t);
    const Vec2 gu = u.gradient(t);
    for (std::size_t c = 0; c < 3; ++c) {
      const int j = pos[static_cast<std::size_t>(v[c])];
      if (j >= 0) r[static_cast<std::size_t>(j)] += u.sigma[t] * m.triangle_area(t) * dot(gu, g[c]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    w[j] += 0.5 * ring.edges[j].length;
    w[(j + 1) % n] += 0.5 * ring.edges[j].length;
  }
  std::vector<Vec2> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& e = ring.edges[j];
    const std::size_t jn = (j + 1) % n;
    // polygon corners mix two normals; take the flux from the other end instead
    const bool ca = ring.edges[(j + n - 1) % n].poly_edge != e.poly_edge;
    const bool cb = ring.edges[jn].poly_edge != e.poly_edge;
    double qa = r[j] / w[j], qb = r[jn] / w[jn];
    if (ca && !cb) qa = qb;
    if (cb && !ca) qb = qa;
    const Vec2 pa = m.nodes()[static_cast<std::size_t>(e.a)], pb = m.nodes()[static_cast<std::size_t>(e.b)];
    const Vec2 tau = (pb - pa) / norm(pb - pa);
    Vec2 nrm{tau.y, -tau.x};
    if (dot(nrm, m.centroid(static_cast<std::size_t>(e.tri_in)) - e.midpoint) > 0.0) nrm = -nrm;
    const Vec2 ge = u.gradient(static_cast<std::size_t>(e.tri_out));
    out.push_back(dot(ge, tau) * tau + (0.5 * (qa + qb)) * nrm);
  }
  return out;
}

double boundary_pairing(const Field& u, const BoundaryData& g, Extension ext) {
  const Mesh& m = *u.mesh;
  if (u.values.size() != m.node_count() || u.sigma.size() != m.triangle_count())
    throw MeshError("field does not match its mesh");
  const BoundaryData gd = g.as(BoundaryData::Kind::dirichlet);
  std::vector<double> eg;
  if (ext == Extension::discrete_harmonic) {
    eg = solve_dirichlet(u.mesh, u.sigma, gd).values;
  } else {
    const auto gv = gd.boundary_values(m);
    eg.assign(m.node_count(), 0.0);
    const auto& loop = m.boundary();
    for (std::size_t i = 0; i < loop.nodes.size(); ++i) eg[static_cast<std::size_t>(loop.nodes[i])] = gv[i];
  }
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& v = m.triangles()[t].v;
    const auto hg = m.hat_gradients(t);
    Vec2 ge;
    bool any = false;
    for (std::size_t i = 0; i < 3; ++i) {
      const double c = eg[static_cast<std::size_t>(v[i])];
      if (c != 0.0) any = true;
      ge += c * hg[i];
    }
    if (any) s += u.sigma[t] * m.triangle_area(t) * dot(u.gradient(t), ge);
  }
  return s;
}

std::vector<double> boundary_flux(const Field& u) {
  const Mesh& m = *u.mesh;
  if (u.values.size() != m.node_count() || u.sigma.size() != m.triangle_count())
    throw MeshError("field does not match its mesh");
  const LinearSystem sys = assemble(m, u.sigma);
  std::vector<double> r;
  sys.A.multiply(u.values, r);
  const auto& loop = m.boundary();
  std::vector<double> out(loop.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r[static_cast<std::size_t>(loop.nodes[i])] / loop.weight[i];
  return out;
}

double boundary_inner(const Mesh& m, const std::vector<double>& a, const std::vector<double>& b) {
  const auto& w = m.boundary().weight;
  if (a.size() != w.size() || b.size() != w.size()) throw ValidationError("boundary vectors do not match the mesh");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a[i] * b[i];
  return s;
}

double energy(const Field& u) {
  double s = 0.0;
  for (std::size_t t = 0; t < u.mesh->triangle_count(); ++t)
    s += u.sigma[t] * u.mesh->triangle_area(t) * norm2(u.gradient(t));
  return s;
}

double h1_seminorm_diff(const Field& u, const Field& v) {
  if (u.mesh == v.mesh) {
    double s = 0.0;
    for (std::size_t t = 0; t < u.mesh->triangle_count(); ++t)
      s += u.mesh->triangle_area(t) * norm2(u.gradient(t) - v.gradient(t));
    return std::sqrt(s);
  }
  const Mesh& a = *u.mesh;
  const Mesh& b = *v.mesh;
  std::vector<Vec2> gb(b.triangle_count());
  for (std::size_t t = 0; t < gb.size(); ++t) gb[t] = v.gradient(t);
  double s = 0.0, covered = 0.0;
  std::vector<int> cand;
  for (std::size_t t = 0; t < a.triangle_count(); ++t) {
    const auto& tv = a.triangles()[t].v;
    std::vector<Vec2> tri{a.nodes()[static_cast<std::size_t>(tv[0])], a.nodes()[static_cast<std::size_t>(tv[1])],
                          a.nodes()[static_cast<std::size_t>(tv[2])]};
    Vec2 lo = tri[0], hi = tri[0];
    for (const auto& p : tri) {
      lo = Vec2(std::min(lo.x, p.x), std::min(lo.y, p.y));
      hi = Vec2(std::max(hi.x, p.x), std::max(hi.y, p.y));
    }
    b.candidates(lo, hi, cand);
    const Vec2 ga = u.gradient(t);
    for (const int c : cand) {
      const auto& cv = b.triangles()[static_cast<std::size_t>(c)].v;
      const std::vector<Vec2> other{b.nodes()[static_cast<std::size_t>(cv[0])], b.nodes()[static_cast<std::size_t>(cv[1])],
                                    b.nodes()[static_cast<std::size_t>(cv[2])]};
      const double area = polygon_area(convex_intersection(tri, other));
      if (area <= 0.0) continue;
      covered += area;
      s += area * norm2(ga - gb[static_cast<std::size_t>(c)]);
    }
  }
  const double total = a.total_area();
  if (std::abs(covered - total) > 1e-8 * total)
    throw MeshError("field meshes do not cover the same domain (overlay area " + std::to_string(covered) + " vs " +
                    std::to_string(total) + ")");
  return std::sqrt(s);
}

namespace {

// Linear interpolation of a boundary trace at arc position s.
double trace_at(const BoundaryLoop& loop, const std::vector<double>& tr, double s) {
  const std::size_t nb = loop.nodes.size();
  s = std::fmod(s, loop.perimeter);
  if (s < 0.0) s += loop.perimeter;
  const auto it = std::upper_bound(loop.arc.begin(), loop.arc.end(), s);
  const std::size_t j = static_cast<std::size_t>(it - loop.arc.begin()) - 1;
  const double s0 = loop.arc[j];
  const double s1 = j + 1 < nb ? loop.arc[j + 1] : loop.perimeter;
  const double w = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
  return (1.0 - w) * tr[j] + w * tr[(j + 1) % nb];
}

}  // namespace

std::vector<double> sample_trace(const Field& u, const Mesh& target) {
  const auto& src = u.mesh->boundary();
  const auto& dst = target.boundary();
  const auto tr = u.trace();
  const double scale = src.perimeter / dst.perimeter;
  std::vector<double> out(dst.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = trace_at(src, tr, dst.arc[i] * scale);
  return out;
}

double boundary_l2_diff(const Field& u, const Field& v) {
  const auto& la = u.mesh->boundary();
  const auto& lb = v.mesh->boundary();
  const auto ta = u.trace(), tb = v.trace();
  if (u.mesh == v.mesh) {
    double s = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) s += la.weight[i] * (ta[i] - tb[i]) * (ta[i] - tb[i]);
    return std::sqrt(s);
  }
  const double scale = lb.perimeter / la.perimeter;
  std::vector<double> arcs = la.arc;
  for (const double s : lb.arc) arcs.push_back(s / scale);
  std::sort(arcs.begin(), arcs.end());
  std::vector<double> merged;
  for (const double s : arcs)
    if (merged.empty() || s - merged.back() > 1e-13 * la.perimeter) merged.push_back(s);
  const std::size_t n = merged.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i)
    d[i] = trace_at(la, ta, merged[i]) - trace_at(lb, tb, merged[i] * scale);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = (i + 1 < n ? merged[i + 1] : la.perimeter) - merged[i];
    s += 0.5 * len * (d[i] * d[i] + d[(i + 1) % n] * d[(i + 1) % n]);
  }
  return std::sqrt(s);
}

void write_field(std::ostream& os, const Field& u) {
  const auto prec = os.precision(17);
  os << "FIELD " << u.values.size() << '\n';
  for (std::size_t i = 0; i < u.values.size(); ++i) os << i << ' ' << u.values[i] << '\n';
  os.precision(prec);
}

}  // namespace polyeit
