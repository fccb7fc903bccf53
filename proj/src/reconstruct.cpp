#include "polyeit/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/parallel.hpp"

namespace polyeit {

void OptimizerConfig::validate() const {
  if (max_iter < 0) throw ValidationError("optimizer.max_iter must be non-negative");
  if (!(c1 > 0.0 && c1 < 1.0)) throw ValidationError("optimizer.c1 must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ValidationError("optimizer.backtrack must lie in (0, 1)");
  if (!(initial_step >= 0.0)) throw ValidationError("optimizer.initial_step must be non-negative");
  if (max_backtracks < 1) throw ValidationError("optimizer.max_backtracks must be positive");
  if (!(grad_tol >= 0.0) || !(j_tol >= 0.0)) throw ValidationError("optimizer tolerances must be non-negative");
  if (fd_check_every < 0) throw ValidationError("optimizer.fd_check_every must be non-negative");
  constraints.validate();
}

MisfitSum total_misfit(const InverseProblem& prob, const Polygon& poly, const std::vector<Measurement>& data,
                       bool with_gradient, const Polygon* anchor) {
  if (data.empty()) throw ValidationError("reconstruction needs at least one measurement");
  std::vector<MisfitEvaluation> ev(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    ev[i] = evaluate_misfit(prob.domain, poly, prob.k, data[i].f, data[i].u_meas, prob.grading, anchor, with_gradient,
                            prob.solver);
  });
  MisfitSum s;
  for (auto& e : ev) {
    s.J += e.J;
    if (with_gradient) s.gradient = s.gradient + e.gradient;
  }
  return s;
}

namespace {

std::string vertex_key(const Polygon& p) {
  std::ostringstream os;
  for (const auto& v : p.vertices()) os << std::llround(v.x * 1e12) << ',' << std::llround(v.y * 1e12) << ';';
  return os.str();
}

double dot_stacked(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += dot(a[i], b[i]);
  return s;
}

double max_len(const std::vector<Vec2>& a) {
  double m = 0.0;
  for (const auto& x : a) m = std::max(m, norm(x));
  return m;
}

}  // namespace

Trajectory reconstruct(const InverseProblem& prob, const Polygon& initial, const std::vector<Measurement>& data,
                       const OptimizerConfig& cfg) {
  cfg.validate();
  prob.k.validate(false);
  prob.grading.validate();
  const auto rep0 = validate_constraints(initial, cfg.constraints, prob.domain);
  if (!rep0.ok()) throw GeometryError("initial polygon is not admissible: " + rep0.describe());
  for (const auto& m : data)
    if (m.f.kind != BoundaryData::Kind::neumann) throw ValidationError("measurement excitation must be neumann data");

  std::map<std::string, MisfitSum> cache;
  auto eval = [&](const Polygon& p) -> const MisfitSum& {
    const std::string key = vertex_key(p);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, total_misfit(prob, p, data, true)).first;
    return it->second;
  };

  Trajectory tr;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Polygon x = initial;
  MisfitSum cur = eval(x);
  tr.J_initial = cur.J;
  tr.records.push_back({0, cur.J, cur.gradient.norm(), 0.0, true, x});

  const double diam = x.diameter();
  double alpha = cfg.initial_step;
  std::vector<Vec2> x_prev, g_prev;
  tr.status = "max_iter";

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double gn = cur.gradient.norm();
    if (gn <= cfg.grad_tol) {
      tr.status = "converged";
      break;
    }
    const std::vector<Vec2>& g = cur.gradient.g;

    if (cfg.fd_check_every > 0 && (it - 1) % cfg.fd_check_every == 0) {
      // random unit direction in vertex space
      std::vector<Vec2> d(x.size());
      double dn = 0.0;
      for (auto& v : d) {
        v = {normal(rng), normal(rng)};
        dn += norm2(v);
      }
      dn = std::sqrt(dn);
      for (auto& v : d) v = v / dn;
      const double eps = 1e-3 * diam;
      const VelocityField D(d);
      try {
        const Polygon xp = perturb(x, D, eps), xm = perturb(x, D, -eps);
        const double fd =
            (total_misfit(prob, xp, data, false, &x).J - total_misfit(prob, xm, data, false, &x).J) / (2.0 * eps);
        const double ad = dot_stacked(g, d);
        const double den = std::max({std::abs(fd), std::abs(ad), 1e-300});
        std::ostringstream os;
        os.precision(6);
        os << "iter " << it - 1 << ": gradient check adjoint " << ad << " fd " << fd << " rel "
           << std::abs(fd - ad) / den;
        tr.log.push_back(os.str());
      } catch (const std::exception& e) {
        tr.log.push_back("iter " + std::to_string(it - 1) + ": gradient check skipped: " + e.what());
      }
    }

    // trial step: BB1 when curvature information is usable
    if (!x_prev.empty()) {
      std::vector<Vec2> s(x.size()), y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        s[i] = x[i] - x_prev[i];
        y[i] = g[i] - g_prev[i];
      }
      const double sy = dot_stacked(s, y);
      alpha = sy > 0.0 ? dot_stacked(s, s) / sy : 2.0 * alpha;
    } else if (!(alpha > 0.0)) {
      alpha = 0.02 * diam / max_len(g);
    }
    // keep every vertex within a quarter of d0 per iteration
    alpha = std::min(alpha, cfg.constraints.d0 / (4.0 * max_len(g)));

    VelocityField dir(g);
    dir = dir.scaled(-1.0);
    bool accepted = false;
    for (int b = 0; b < cfg.max_backtracks; ++b, alpha *= cfg.backtrack) {
      Polygon trial;
      try {
        trial = perturb(x, dir, alpha);
      } catch (const GeometryError&) {
        tr.records.push_back({it, std::nan(""), 0.0, alpha, false, x});
        continue;
      }
      if (!validate_constraints(trial, cfg.constraints, prob.domain).ok()) {
        tr.records.push_back({it, std::nan(""), 0.0, alpha, false, trial});
        continue;
      }
      const MisfitSum& next = eval(trial);
      if (next.J <= cur.J - cfg.c1 * alpha * gn * gn) {
        tr.records.push_back({it, next.J, next.gradient.norm(), alpha, true, trial});
        x_prev = x.vertices();
        g_prev = g;
        const double dj = cur.J - next.J;
        x = trial;
        cur = next;
        accepted = true;
        tr.iterations = it;
        if (dj <= cfg.j_tol * (cur.J + dj)) tr.status = "stagnated";
        break;
      }
      tr.records.push_back({it, next.J, next.gradient.norm(), alpha, false, trial});
    }
    if (!accepted) {
      tr.status = "stalled";
      break;
    }
    if (tr.status == "stagnated") break;
  }
  if (tr.status == "max_iter" && cur.gradient.norm() <= cfg.grad_tol) tr.status = "converged";
  tr.final_poly = x;
  tr.J_final = cur.J;
  return tr;
}

std::vector<Measurement> synthesize_data(const InverseProblem& prob, const Polygon& true_poly,
                                         const std::vector<BoundaryData>& excitations, double mesh_scale,
                                         double noise_level, std::uint64_t seed) {
  if (!(mesh_scale >= 1.0)) throw ValidationError("mesh_scale must be at least 1");
  if (!(noise_level >= 0.0)) throw ValidationError("noise level must be non-negative");
  GradingSpec g = prob.grading;
  g.h /= mesh_scale;
  g.h_min /= mesh_scale;
  g.interface_h /= mesh_scale;
  const MeshPtr m = generate_mesh(prob.domain, {true_poly}, g);
  std::vector<Measurement> out(excitations.size());
  parallel_for(excitations.size(), [&](std::size_t i) {
    Measurement& r = out[i];
    r.f = excitations[i].as(BoundaryData::Kind::neumann);
    r.u_meas = BoundarySamples::from_field(solve_neumann(m, prob.k, r.f, prob.solver));
    r.clean = r.u_meas.values;
  });
  // noise after the solves, in excitation order, so the stream is fixed by the seed
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& r : out) {
    r.noise_level = noise_level;
    if (noise_level == 0.0) continue;
    double c2 = 0.0;
    for (const double v : r.clean) c2 += v * v;
    const double rms = std::sqrt(c2 / static_cast<double>(r.clean.size()));
    double n2 = 0.0;
    for (std::size_t j = 0; j < r.clean.size(); ++j) {
      const double e = noise_level * rms * normal(rng);
      r.u_meas.values[j] = r.clean[j] + e;
      n2 += e * e;
    }
    r.snr = n2 > 0.0 ? std::sqrt(c2 / n2) : 0.0;
  }
  return out;
}

double hausdorff_vertex_error(const Polygon& a, const Polygon& b) { return hausdorff_distance(a, b); }

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  const auto prec = os.precision(17);
  std::size_t n = 0;
  for (const auto& r : tr.records) n = std::max(n, r.poly.size());
  os << "iter,J,grad_norm,step,accepted";
  for (std::size_t i = 1; i <= n; ++i) os << ",x" << i << ",y" << i;
  os << '\n';
  for (const auto& r : tr.records) {
    os << r.iter << ',' << r.J << ',' << r.grad_norm << ',' << r.step << ',' << (r.accepted ? 1 : 0);
    for (const auto& v : r.poly.vertices()) os << ',' << v.x << ',' << v.y;
    os << '\n';
  }
  os.precision(prec);
}

}  // namespace polyeit
