#include "polyeit/maps.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/parallel.hpp"

namespace polyeit {

BoundaryBasis BoundaryBasis::trig(int n_max, bool mean_zero) {
  if (n_max < 1) throw ValidationError("trig basis needs n_max >= 1");
  BoundaryBasis b;
  b.kind = Kind::trig;
  b.n_max = n_max;
  using K = BoundaryData::Kind;
  if (!mean_zero) b.elements.push_back(BoundaryData::cosine(K::dirichlet, 0));
  for (int n = 1; n <= n_max; ++n) {
    b.elements.push_back(BoundaryData::cosine(K::dirichlet, n));
    b.elements.push_back(BoundaryData::sine(K::dirichlet, n));
  }
  return b;
}

BoundaryBasis BoundaryBasis::nodal(const Mesh& m) {
  BoundaryBasis b;
  b.kind = Kind::nodal;
  const std::size_t nb = m.boundary().nodes.size();
  b.n_max = static_cast<int>(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    std::vector<double> v(nb, 0.0);
    v[i] = 1.0;
    b.elements.push_back(BoundaryData::nodal(BoundaryData::Kind::dirichlet, std::move(v)));
  }
  return b;
}

BoundaryBasis BoundaryBasis::diamond(const Mesh& m) {
  BoundaryBasis b;
  b.kind = Kind::diamond;
  const auto& loop = m.boundary();
  const std::size_t nb = loop.nodes.size();
  b.n_max = static_cast<int>(nb) - 1;
  for (std::size_t i = 0; i + 1 < nb; ++i) {
    std::vector<double> v(nb, -loop.weight[i] / loop.perimeter);
    v[i] += 1.0;
    b.elements.push_back(BoundaryData::nodal(BoundaryData::Kind::dirichlet, std::move(v)));
  }
  return b;
}

bool BoundaryBasis::mean_zero() const {
  if (kind == Kind::diamond) return true;
  if (kind == Kind::nodal) return false;
  for (const auto& e : elements)
    if (e.mode == BoundaryData::Mode::cosine && e.index == 0) return false;
  return true;
}

Eigen::MatrixXd BoundaryBasis::values(const Mesh& m) const {
  const std::size_t nb = m.boundary().nodes.size();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(size()));
  for (std::size_t j = 0; j < size(); ++j) {
    const auto col = elements[j].boundary_values(m);
    for (std::size_t i = 0; i < nb; ++i) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return v;
}

Eigen::MatrixXd BoundaryBasis::gram(const Mesh& m) const {
  const Eigen::MatrixXd v = values(m);
  const auto& w = m.boundary().weight;
  Eigen::VectorXd wv(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) wv(static_cast<Eigen::Index>(i)) = w[i];
  return v.transpose() * wv.asDiagonal() * v;
}

// ---------------------------------------------------------------------------
// Operators

OperatorMatrix dtn_matrix(const MeshPtr& m, const std::vector<double>& sigma, const BoundaryBasis& basis,
                          const SolverOptions& opts) {
  const std::size_t nbas = basis.size();
  const Eigen::MatrixXd vals = basis.values(*m);
  const LinearSystem sys = assemble(*m, sigma);
  const auto& loop = m->boundary();
  std::vector<std::vector<double>> flux(nbas);
  parallel_for(nbas, [&](std::size_t j) {
    const Field u = solve_dirichlet(m, sigma, basis.elements[j], opts);
    std::vector<double> r;
    sys.A.multiply(u.values, r);
    std::vector<double> f(loop.nodes.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = r[static_cast<std::size_t>(loop.nodes[i])];
    flux[j] = std::move(f);
  });
  OperatorMatrix out;
  out.tag = OperatorMatrix::Tag::dtn;
  out.m.resize(static_cast<Eigen::Index>(nbas), static_cast<Eigen::Index>(nbas));
  for (std::size_t j = 0; j < nbas; ++j)
    for (std::size_t i = 0; i < nbas; ++i) {
      double s = 0.0;
      for (std::size_t q = 0; q < loop.nodes.size(); ++q)
        s += flux[j][q] * vals(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i));
      out.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  return out;
}

OperatorMatrix dtn_matrix(const MeshPtr& m, const ConductivitySpec& k, const BoundaryBasis& basis,
                          const SolverOptions& opts) {
  return dtn_matrix(m, element_sigma(*m, k), basis, opts);
}

OperatorMatrix ntd_matrix(const MeshPtr& m, const ConductivitySpec& k, const BoundaryBasis& basis,
                          const SolverOptions& opts) {
  if (!basis.mean_zero()) throw ValidationError("ntd_matrix needs a mean-zero basis");
  const std::size_t nbas = basis.size();
  const Eigen::MatrixXd vals = basis.values(*m);
  const auto sigma = element_sigma(*m, k);
  const auto& w = m->boundary().weight;
  std::vector<std::vector<double>> traces(nbas);
  parallel_for(nbas, [&](std::size_t j) {
    traces[j] = solve_neumann(m, sigma, basis.elements[j].as(BoundaryData::Kind::neumann), opts).trace();
  });
  OperatorMatrix out;
  out.tag = OperatorMatrix::Tag::ntd;
  out.m.resize(static_cast<Eigen::Index>(nbas), static_cast<Eigen::Index>(nbas));
  for (std::size_t j = 0; j < nbas; ++j)
    for (std::size_t i = 0; i < nbas; ++i) {
      double s = 0.0;
      for (std::size_t q = 0; q < w.size(); ++q)
        s += w[q] * vals(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) * traces[j][q];
      out.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  return out;
}

double composition_defect(const OperatorMatrix& ntd, const OperatorMatrix& dtn, const Eigen::MatrixXd& gram) {
  if (ntd.m.rows() != dtn.m.rows() || gram.rows() != dtn.m.rows())
    throw ValidationError("composition needs matched bases");
  const Eigen::LDLT<Eigen::MatrixXd> g(gram);
  if (g.info() != Eigen::Success) throw SolverError("Gram matrix is singular");
  const Eigen::MatrixXd prod = g.solve(ntd.m) * g.solve(dtn.m);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(prod.rows(), prod.cols());
  return (prod - eye).cwiseAbs().maxCoeff();
}

double symmetry_defect(const Eigen::MatrixXd& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

double power_iteration_norm(const Eigen::MatrixXd& a, double tol, int max_iter) {
  const Eigen::MatrixXd ata = a.transpose() * a;
  if (ata.rows() == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(ata.rows());
  // Deterministic start with components along every direction.
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.1 * static_cast<double>(i % 7);
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = ata * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    const double next = x.dot(y);
    x = y / ny;
    if (std::abs(next - lambda) <= tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double smallest_eigenvalue(const Eigen::MatrixXd& a, double tol) {
  const Eigen::MatrixXd s = 0.5 * (a + a.transpose());
  const double top = power_iteration_norm(s, tol);
  const Eigen::MatrixXd shifted = top * Eigen::MatrixXd::Identity(s.rows(), s.cols()) - s;
  return top - power_iteration_norm(shifted, tol);
}

double weighted_operator_norm(const Eigen::MatrixXd& pairing, const Eigen::MatrixXd& gram, double tol) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw SolverError("Gram matrix is not positive definite");
  const Eigen::MatrixXd inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return power_iteration_norm(inv_sqrt * pairing * inv_sqrt, tol);
}

void write_operator_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  const auto prec = os.precision(17);
  os << "i,j,value\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << i << ',' << j << ',' << m(i, j) << '\n';
  os.precision(prec);
}

// ---------------------------------------------------------------------------
// Functional

namespace {

std::string data_key(const BoundaryData& d) {
  std::ostringstream os;
  os << std::setprecision(17) << d.describe();
  if (d.mode == BoundaryData::Mode::nodal)
    for (const double x : d.values) os << ',' << x;
  return os.str();
}

std::mutex g_cache_mu;
std::map<std::string, double> g_cache;

}  // namespace

std::string FunctionalSpec::cache_key() const {
  if (f.mode == BoundaryData::Mode::function || g.mode == BoundaryData::Mode::function) return {};
  std::ostringstream os;
  os << std::setprecision(17);
  os << static_cast<int>(domain.kind) << ':' << domain.sides << ':' << domain.radius << '|' << polygon_literal(poly)
     << '|' << k.k << '|' << data_key(f) << '|' << data_key(g) << '|' << grading.h << ':' << grading.h_min << ':'
     << grading.mu << ':' << grading.r_g << ':' << grading.interface_h << '|' << static_cast<int>(pairing) << '|'
     << (anchor ? polygon_literal(*anchor) : std::string("-")) << '|' << solver.rtol;
  return os.str();
}

MeshPtr mesh_for(const FunctionalSpec& spec) {
  MeshOptions opts;
  if (spec.anchor) opts.anchor = std::vector<Polygon>{*spec.anchor};
  return generate_mesh(spec.domain, {spec.poly}, spec.grading, opts);
}

ForwardState forward_state(const FunctionalSpec& spec) {
  ForwardState st;
  st.mesh = mesh_for(spec);
  st.ring = interface_ring(*st.mesh, spec.poly);
  using K = BoundaryData::Kind;
  if (spec.pairing == FunctionalSpec::Pairing::dirichlet) {
    st.u = solve_dirichlet(st.mesh, spec.k, spec.f.as(K::dirichlet), spec.solver);
    st.v = solve_dirichlet(st.mesh, spec.k, spec.g.as(K::dirichlet), spec.solver);
    st.value = boundary_pairing(st.u, spec.g);
  } else {
    st.u = solve_neumann(st.mesh, spec.k, spec.f.as(K::neumann), spec.solver);
    st.v = solve_neumann(st.mesh, spec.k, spec.g.as(K::neumann), spec.solver);
    st.value = boundary_inner(*st.mesh, spec.g.as(K::neumann).boundary_values(*st.mesh), st.u.trace());
  }
  return st;
}

double functional_G(const FunctionalSpec& spec) {
  const std::string key = spec.cache_key();
  if (!key.empty()) {
    std::lock_guard lock(g_cache_mu);
    auto it = g_cache.find(key);
    if (it != g_cache.end()) return it->second;
  }
  MeshPtr mesh = mesh_for(spec);
  double value;
  using K = BoundaryData::Kind;
  if (spec.pairing == FunctionalSpec::Pairing::dirichlet) {
    const Field u = solve_dirichlet(mesh, spec.k, spec.f.as(K::dirichlet), spec.solver);
    value = boundary_pairing(u, spec.g);
  } else {
    const Field u = solve_neumann(mesh, spec.k, spec.f.as(K::neumann), spec.solver);
    value = boundary_inner(*mesh, spec.g.as(K::neumann).boundary_values(*mesh), u.trace());
  }
  if (!key.empty()) {
    std::lock_guard lock(g_cache_mu);
    g_cache.emplace(key, value);
  }
  return value;
}

double functional_G(const DomainSpec& dom, const Polygon& poly, const ConductivitySpec& k, const BoundaryData& f,
                    const BoundaryData& g, const GradingSpec& grading) {
  FunctionalSpec s;
  s.domain = dom;
  s.poly = poly;
  s.k = k;
  s.f = f;
  s.g = g;
  s.grading = grading;
  return functional_G(s);
}

void clear_functional_cache() {
  std::lock_guard lock(g_cache_mu);
  g_cache.clear();
}

}  // namespace polyeit
