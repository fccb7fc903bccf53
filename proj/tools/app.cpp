#include "app.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <sstream>

#include "polyeit/errors.hpp"
#include "polyeit/fem.hpp"
#include "polyeit/geometry.hpp"
#include "polyeit/maps.hpp"
#include "polyeit/mesh.hpp"
#include "polyeit/parallel.hpp"
#include "polyeit/reconstruct.hpp"
#include "polyeit/shapecalc.hpp"
#include "polyeit/verify.hpp"

namespace polyeit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kVersion = "polyeit 0.1.0";

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

namespace {

// ---------------------------------------------------------------------------
// Config access with field paths in every message

struct Node {
  const json* j = nullptr;
  std::string path;

  bool has(const std::string& key) const { return j->is_object() && j->contains(key); }
  Node at(const std::string& key) const {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!j->is_object() || !j->contains(key)) throw ValidationError(p + ": required field is missing");
    return {&(*j)[key], p};
  }
  double num() const {
    if (!j->is_number()) throw ValidationError(path + ": expected a number");
    return j->get<double>();
  }
  double num(const std::string& key, double dflt) const { return has(key) ? at(key).num() : dflt; }
  int integer(const std::string& key, int dflt) const {
    if (!has(key)) return dflt;
    const Node n = at(key);
    if (!n.j->is_number_integer()) throw ValidationError(n.path + ": expected an integer");
    return n.j->get<int>();
  }
  bool flag(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const Node n = at(key);
    if (!n.j->is_boolean()) throw ValidationError(n.path + ": expected true or false");
    return n.j->get<bool>();
  }
  std::string str(const std::string& key, const std::string& dflt) const {
    if (!has(key)) return dflt;
    const Node n = at(key);
    if (!n.j->is_string()) throw ValidationError(n.path + ": expected a string");
    return n.j->get<std::string>();
  }
  std::vector<Vec2> points() const {
    if (!j->is_array()) throw ValidationError(path + ": expected a list of [x, y] pairs");
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < j->size(); ++i) {
      const json& p = (*j)[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw ValidationError(path + "[" + std::to_string(i) + "]: expected [x, y]");
      out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
  }
  std::vector<double> numbers() const {
    if (!j->is_array()) throw ValidationError(path + ": expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j->size(); ++i) {
      if (!(*j)[i].is_number()) throw ValidationError(path + "[" + std::to_string(i) + "]: expected a number");
      out.push_back((*j)[i].get<double>());
    }
    return out;
  }
};

template <class F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const GeometryError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

DomainSpec domain_of(const Node& root) {
  if (!root.has("domain")) return DomainSpec::unit_square();
  const Node d = root.at("domain");
  const std::string kind = d.str("kind", "unit_square");
  DomainSpec dom;
  if (kind == "unit_square")
    dom = DomainSpec::unit_square(d.num("margin", 0.1));
  else if (kind == "regular_ngon")
    dom = DomainSpec::regular_ngon(d.integer("sides", 6), d.num("radius", 1.0), d.num("margin", 0.1));
  else
    throw ValidationError(d.path + ".kind: unknown domain kind '" + kind + "'");
  with_path(d.path, [&] {
    dom.validate();
    return 0;
  });
  return dom;
}

Polygon polygon_at(const Node& n) {
  return with_path(n.path, [&] { return Polygon(n.points()); });
}

ConstraintParams constraints_of(const Node& root, const DomainSpec& dom) {
  ConstraintParams c;
  c.d0 = dom.margin;
  if (root.has("constraints")) {
    const Node n = root.at("constraints");
    c.alpha0 = n.num("alpha0_deg", c.alpha0 * 180.0 / M_PI) * M_PI / 180.0;
    c.alpha1 = n.num("alpha1", c.alpha1);
    c.d0 = n.num("d0", c.d0);
  }
  with_path("constraints", [&] {
    c.validate();
    return 0;
  });
  return c;
}

GradingSpec grading_of(const Node& root) {
  GradingSpec g = GradingSpec::with_defaults(0.05);
  if (root.has("mesh")) {
    const Node m = root.at("mesh");
    g = GradingSpec::with_defaults(m.num("h", 0.05));
    g.h_min = m.num("h_min", g.h_min);
    g.mu = m.num("mu", g.mu);
    g.r_g = m.num("r_g", g.r_g);
    g.interface_h = m.num("interface_h", g.interface_h);
  }
  with_path("mesh", [&] {
    g.validate();
    return 0;
  });
  return g;
}

MeshOptions mesh_options_of(const Node& root) {
  MeshOptions o;
  if (root.has("mesh")) o.min_angle_deg = root.at("mesh").num("min_angle_deg", o.min_angle_deg);
  return o;
}

SolverOptions solver_of(const Node& root) {
  SolverOptions s;
  if (root.has("solver")) {
    const Node n = root.at("solver");
    s.rtol = n.num("rtol", s.rtol);
    s.cap_factor = n.num("cap_factor", s.cap_factor);
    if (!(s.rtol > 0.0 && s.rtol < 1.0)) throw ValidationError("solver.rtol: must lie in (0, 1)");
    if (!(s.cap_factor > 0.0)) throw ValidationError("solver.cap_factor: must be positive");
  }
  return s;
}

BoundaryData data_at(const Node& n, BoundaryData::Kind kind) {
  const std::string type = n.str("type", "");
  const int idx = n.integer("n", 1);
  if (type == "x") return BoundaryData::coordinate_x(kind);
  if (type == "y") return BoundaryData::coordinate_y(kind);
  if (idx < 0) throw ValidationError(n.path + ".n: must be non-negative");
  if (type == "cos") return BoundaryData::cosine(kind, idx);
  if (type == "sin") {
    if (idx < 1) throw ValidationError(n.path + ".n: sine modes start at 1");
    return BoundaryData::sine(kind, idx);
  }
  throw ValidationError(n.path + ".type: expected x, y, cos or sin");
}

struct Inclusion {
  Polygon poly;
  ConductivitySpec k;
};

Inclusion inclusion_of(const Node& root, const DomainSpec& dom, const ConstraintParams& c, bool allow_unit = true) {
  const Node n = root.at("inclusion");
  Inclusion inc;
  inc.poly = polygon_at(n.at("vertices"));
  inc.k.k = n.at("k").num();
  with_path(n.path + ".k", [&] {
    inc.k.validate(allow_unit);
    return 0;
  });
  const auto rep = validate_constraints(inc.poly, c, dom);
  if (!rep.ok()) throw ValidationError(n.path + ".vertices: not admissible: " + rep.describe());
  return inc;
}

FunctionalSpec functional_of(const Node& root, const DomainSpec& dom, const Inclusion& inc) {
  FunctionalSpec s;
  s.domain = dom;
  s.poly = inc.poly;
  s.k = inc.k;
  s.grading = grading_of(root);
  s.solver = solver_of(root);
  const Node d = root.at("data");
  s.f = data_at(d.at("f"), BoundaryData::Kind::dirichlet);
  s.g = data_at(d.at("g"), BoundaryData::Kind::dirichlet);
  return s;
}

VelocityField velocity_of(const Node& study, const Polygon& poly) {
  const Node v = study.at("V");
  VelocityField V(v.points());
  if (V.size() != poly.size())
    throw ValidationError(v.path + ": has " + std::to_string(V.size()) + " entries for " +
                          std::to_string(poly.size()) + " vertices");
  return V;
}

std::vector<double> t_list_of(const Node& study) {
  if (!study.has("t_list")) return default_t_list();
  auto t = study.at("t_list").numbers();
  for (const double x : t)
    if (!(x > 0.0)) throw ValidationError(study.path + ".t_list: values must be positive");
  if (t.size() < 4) throw ValidationError(study.path + ".t_list: needs at least 4 values");
  return t;
}

// ---------------------------------------------------------------------------
// Overrides

json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void apply_override(json& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set " + spec + ": expected path=value");
  const std::string path = spec.substr(0, eq);
  json* cur = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError("--set " + spec + ": empty path component");
    if (!cur->is_object()) throw ValidationError("--set " + spec + ": " + path.substr(0, start) + " is not a section");
    if (dot == std::string::npos) {
      (*cur)[key] = parse_scalar(spec.substr(eq + 1));
      return;
    }
    if (!cur->contains(key)) (*cur)[key] = json::object();
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Output handling

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    if (name.find("..") != std::string::npos || fs::path(name).is_absolute())
      throw ValidationError("output name " + name + " leaves the output directory");
    fs::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ValidationError("output.dir: cannot write " + (dir_ / name).string());
    f << content;
    files_.emplace_back(name, content);
  }

  json inventory() const {
    json a = json::array();
    for (const auto& [name, content] : files_)
      a.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    return a;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

template <class F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands. Each one validates everything before any solve, then either
// prints its plan (dry run) or runs.

struct Context {
  json cfg;
  Node root{nullptr, ""};
  bool dry_run = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  Outputs* files = nullptr;
  json summary = json::object();
};

using Plan = std::vector<std::string>;

bool plan_only(Context& c, const Plan& plan) {
  if (!c.dry_run) return false;
  *c.out << "plan:\n";
  for (const auto& s : plan) *c.out << "  - " << s << '\n';
  *c.out << "outputs go to " << c.files->dir().string() << '\n';
  return true;
}

void write_rate(Context& c, const std::string& name, const RateFit& fit) {
  c.files->write(name, render([&](std::ostream& os) { write_rate_csv(os, fit); }));
  for (const auto& w : fit.warnings) *c.err << "warning: " << name << ": " << w << '\n';
  c.summary[name] = {{"slope", fit.degenerate ? json(nullptr) : json(fit.slope)},
                     {"n_used", fit.n_used},
                     {"degenerate", fit.degenerate},
                     {"monotone", fit.monotone}};
}

void cmd_mesh(Context& c) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  const Inclusion inc = inclusion_of(c.root, dom, cp);
  const GradingSpec g = grading_of(c.root);
  const MeshOptions mo = mesh_options_of(c.root);
  if (plan_only(c, {"mesh the domain around " + polygon_literal(inc.poly), "write mesh.txt"})) return;
  const MeshPtr m = generate_mesh(dom, {inc.poly}, g, mo);
  c.files->write("mesh.txt", render([&](std::ostream& os) { write_mesh(os, *m); }));
  const MeshQuality q = mesh_quality(*m);
  c.summary["nodes"] = q.node_count;
  c.summary["triangles"] = q.triangle_count;
  c.summary["min_angle_deg"] = q.min_angle_deg;
  c.summary["h_eff"] = q.h_eff;
}

void cmd_solve(Context& c) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  const Inclusion inc = inclusion_of(c.root, dom, cp);
  const FunctionalSpec s = functional_of(c.root, dom, inc);
  const std::string bc = c.root.at("data").str("problem", "dirichlet");
  if (bc != "dirichlet" && bc != "neumann") throw ValidationError("data.problem: expected dirichlet or neumann");
  if (plan_only(c, {"mesh", bc + " solve for data.f", "write mesh.txt, field.txt, norms.csv"})) return;
  const MeshPtr m = mesh_for(s);
  const Field u = bc == "dirichlet" ? solve_dirichlet(m, s.k, s.f, s.solver)
                                    : solve_neumann(m, s.k, s.f.as(BoundaryData::Kind::neumann), s.solver);
  c.files->write("mesh.txt", render([&](std::ostream& os) { write_mesh(os, *m); }));
  c.files->write("field.txt", render([&](std::ostream& os) { write_field(os, u); }));
  const auto tr = u.trace();
  c.files->write("norms.csv", render([&](std::ostream& os) {
                   os << std::setprecision(17) << "energy,boundary_l2,iterations,residual\n"
                      << energy(u) << ',' << std::sqrt(boundary_inner(*m, tr, tr)) << ',' << u.stats.iterations << ','
                      << u.stats.residual << '\n';
                 }));
  c.summary["energy"] = energy(u);
  c.summary["iterations"] = u.stats.iterations;
}

BoundaryBasis basis_of(const Node& root, const Mesh* m, bool mean_zero) {
  std::string kind = "trig";
  int n_max = 8;
  if (root.has("basis")) {
    const Node b = root.at("basis");
    kind = b.str("kind", kind);
    n_max = b.integer("n_max", n_max);
  }
  if (n_max < 1) throw ValidationError("basis.n_max: must be at least 1");
  if (kind == "trig") return BoundaryBasis::trig(n_max, mean_zero);
  if (kind == "diamond") {
    if (!m) return BoundaryBasis{};
    return BoundaryBasis::diamond(*m);
  }
  throw ValidationError("basis.kind: expected trig or diamond");
}

void cmd_operator(Context& c, bool dtn) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  const Inclusion inc = inclusion_of(c.root, dom, cp);
  const GradingSpec g = grading_of(c.root);
  const SolverOptions so = solver_of(c.root);
  basis_of(c.root, nullptr, !dtn);
  const std::string name = dtn ? "dtn.csv" : "ntd.csv";
  if (plan_only(c, {"mesh", std::string("one ") + (dtn ? "dirichlet" : "neumann") + " solve per basis element",
                    "write " + name}))
    return;
  const MeshPtr m = generate_mesh(dom, {inc.poly}, g, mesh_options_of(c.root));
  const BoundaryBasis b = basis_of(c.root, m.get(), !dtn);
  const OperatorMatrix op = dtn ? dtn_matrix(m, inc.k, b, so) : ntd_matrix(m, inc.k, b, so);
  c.files->write(name, render([&](std::ostream& os) { write_operator_csv(os, op.m); }));
  c.summary["basis_size"] = b.size();
  c.summary["symmetry_defect"] = symmetry_defect(op.m);
}

StudySetup setup_of(Context& c, Inclusion& inc, Node& study) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  inc = inclusion_of(c.root, dom, cp);
  StudySetup s;
  s.spec = functional_of(c.root, dom, inc);
  s.constraints = cp;
  study = c.root.at("study");
  s.anchored = study.flag("anchored", true);
  s.estimate_floor = study.flag("estimate_floor", true);
  return s;
}

void cmd_deriv_check(Context& c) {
  Inclusion inc;
  Node study;
  const StudySetup s = setup_of(c, inc, study);
  const VelocityField V = velocity_of(study, inc.poly);
  const auto t = t_list_of(study);
  const auto fd_t = study.has("fd_t") ? study.at("fd_t").numbers() : std::vector<double>{4e-3, 2e-3, 1e-3};
  if (plan_only(c, {"forward state and shape gradient at t = 0",
                    "central FD of G over " + std::to_string(fd_t.size()) + " steps",
                    "G(t) for " + std::to_string(t.size()) + " values of t",
                    "write shape_gradient.csv, fd_check.csv, derivative_rate.csv"}))
    return;
  FunctionalSpec spec = s.spec;
  const ForwardState st = forward_state(spec);
  const ShapeGradient grad = functional_gradient(spec, st);
  c.files->write("shape_gradient.csv", render([&](std::ostream& os) { write_shape_gradient_csv(os, grad); }));
  const double d = grad.pair(V);
  const FdEstimate fd = functional_fd(spec, V, s.anchored, fd_t);
  c.files->write("fd_check.csv", render([&](std::ostream& os) {
                   os << std::setprecision(17) << "t,central\n";
                   for (std::size_t i = 0; i < fd.t.size(); ++i) os << fd.t[i] << ',' << fd.central[i] << '\n';
                   os << "formula,raw,extrapolated,relative_error\n"
                      << d << ',' << fd.raw << ',' << fd.extrapolated << ','
                      << std::abs(d - fd.extrapolated) / std::max(std::abs(fd.extrapolated), 1e-300) << '\n';
                 }));
  c.summary["G0"] = st.value;
  c.summary["derivative"] = d;
  c.summary["fd_extrapolated"] = fd.extrapolated;
  write_rate(c, "derivative_rate.csv", derivative_rate_study(s, V, t));
}

void cmd_rate_study(Context& c) {
  Inclusion inc;
  Node study;
  const StudySetup s = setup_of(c, inc, study);
  const VelocityField V = velocity_of(study, inc.poly);
  const auto t = t_list_of(study);
  const std::string which = study.str("which", "all");
  if (which != "all" && which != "energy" && which != "boundary")
    throw ValidationError(study.path + ".which: expected all, energy or boundary");
  Plan plan{"symmetric-difference areas"};
  if (which != "boundary") plan.push_back("energy-norm study over " + std::to_string(t.size()) + " values of t");
  if (which != "energy") plan.push_back("boundary-trace study over " + std::to_string(t.size()) + " values of t");
  if (plan_only(c, plan)) return;
  write_rate(c, "area_rate.csv", area_rate_study(inc.poly, V, t));
  if (which != "boundary") write_rate(c, "energy_rate.csv", energy_rate_study(s, V, t));
  if (which != "energy") write_rate(c, "boundary_rate.csv", boundary_rate_study(s, V, t));
}

void cmd_op_deriv(Context& c) {
  Inclusion inc;
  Node study;
  const StudySetup s = setup_of(c, inc, study);
  const VelocityField V = velocity_of(study, inc.poly);
  const auto t = t_list_of(study);
  const int n_max = study.integer("n_max", 4);
  if (n_max < 1) throw ValidationError(study.path + ".n_max: must be at least 1");
  if (plan_only(c, {"operator derivative on " + std::to_string(2 * n_max) + " trig modes",
                    "DtN matrices for " + std::to_string(t.size()) + " values of t",
                    "write operator_derivative.csv, operator_rate.csv"}))
    return;
  const OperatorStudy os = operator_derivative_check(s, V, t, n_max);
  c.files->write("operator_derivative.csv", render([&](std::ostream& o) { write_operator_csv(o, os.derivative); }));
  c.summary["symmetry_defect"] = os.symmetry;
  write_rate(c, "operator_rate.csv", os.fit);
}

void cmd_singularity(Context& c) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  const Inclusion inc = inclusion_of(c.root, dom, cp);
  const GradingSpec g = grading_of(c.root);
  const SolverOptions so = solver_of(c.root);
  const Node study = c.root.at("study");
  const int vertex = study.integer("vertex", 0);
  if (vertex < 0 || static_cast<std::size_t>(vertex) >= inc.poly.size())
    throw ValidationError(study.path + ".vertex: out of range");
  const BoundaryData f = data_at(c.root.at("data").at("f"), BoundaryData::Kind::dirichlet);
  std::vector<double> radii;
  if (study.has("radii")) radii = study.at("radii").numbers();
  if (plan_only(c, {"mesh and dirichlet solve", "annulus fit at vertex " + std::to_string(vertex),
                    "write singularity.csv"}))
    return;
  const MeshPtr m = generate_mesh(dom, {inc.poly}, g, mesh_options_of(c.root));
  const Field u = solve_dirichlet(m, inc.k, f, so);
  const SingularityFit fit = singularity_study(u, inc.poly, static_cast<std::size_t>(vertex), radii);
  c.files->write("singularity.csv", render([&](std::ostream& os) {
                   os << std::setprecision(17) << "r_outer,r_inner,r_at_max,grad_max,elements\n";
                   for (std::size_t j = 0; j < fit.grad_max.size(); ++j)
                     os << fit.radii[j] << ',' << fit.radii[j + 1] << ',' << fit.r_at_max[j] << ','
                        << fit.grad_max[j] << ',' << fit.elements[j] << '\n';
                   os << "omega,slope,residual\n" << fit.omega << ',' << fit.slope << ',' << fit.residual << '\n';
                 }));
  c.summary["omega"] = fit.omega;
}

void cmd_reconstruct(Context& c) {
  const DomainSpec dom = domain_of(c.root);
  const ConstraintParams cp = constraints_of(c.root, dom);
  const Node r = c.root.at("reconstruct");
  const Polygon truth = polygon_at(r.at("true_vertices"));
  const Polygon init = polygon_at(r.at("initial_vertices"));
  if (truth.size() != init.size()) throw ValidationError(r.path + ".initial_vertices: vertex count differs from the truth");
  for (const auto* p : {&truth, &init}) {
    const auto rep = validate_constraints(*p, cp, dom);
    if (!rep.ok())
      throw ValidationError(r.path + (p == &truth ? ".true_vertices" : ".initial_vertices") +
                            ": not admissible: " + rep.describe());
  }
  InverseProblem prob;
  prob.domain = dom;
  prob.k.k = r.at("k").num();
  with_path(r.path + ".k", [&] {
    prob.k.validate(true);
    return 0;
  });
  prob.grading = grading_of(c.root);
  prob.solver = solver_of(c.root);
  const Node ex = r.at("excitations");
  if (!ex.j->is_array() || ex.j->empty()) throw ValidationError(ex.path + ": expected a non-empty list");
  std::vector<BoundaryData> excitations;
  for (std::size_t i = 0; i < ex.j->size(); ++i)
    excitations.push_back(data_at(Node{&(*ex.j)[i], ex.path + "[" + std::to_string(i) + "]"}, BoundaryData::Kind::neumann));
  const double scale = r.num("mesh_scale", 2.0);
  const double noise = r.num("noise", 0.0);
  const auto seed = static_cast<std::uint64_t>(r.integer("seed", 1));
  OptimizerConfig oc;
  oc.constraints = cp;
  oc.seed = seed;
  if (r.has("optimizer")) {
    const Node o = r.at("optimizer");
    oc.max_iter = o.integer("max_iter", oc.max_iter);
    oc.c1 = o.num("c1", oc.c1);
    oc.backtrack = o.num("backtrack", oc.backtrack);
    oc.initial_step = o.num("initial_step", oc.initial_step);
    oc.max_backtracks = o.integer("max_backtracks", oc.max_backtracks);
    oc.grad_tol = o.num("grad_tol", oc.grad_tol);
    oc.j_tol = o.num("j_tol", oc.j_tol);
    oc.fd_check_every = o.integer("fd_check_every", oc.fd_check_every);
  }
  with_path(r.path + ".optimizer", [&] {
    oc.validate();
    return 0;
  });
  if (plan_only(c, {"synthesize " + std::to_string(excitations.size()) + " measurements on a mesh refined by " +
                        fmt(scale),
                    "descent from " + polygon_literal(init) + ", at most " + std::to_string(oc.max_iter) +
                        " iterations",
                    "write trajectory.csv, reconstruct.csv"}))
    return;
  const auto data = synthesize_data(prob, truth, excitations, scale, noise, seed);
  const Trajectory tr = reconstruct(prob, init, data, oc);
  c.files->write("trajectory.csv", render([&](std::ostream& os) { write_trajectory_csv(os, tr); }));
  const double hd = hausdorff_vertex_error(tr.final_poly, truth);
  c.files->write("reconstruct.csv", render([&](std::ostream& os) {
                   os << std::setprecision(17) << "status,iterations,J_initial,J_final,hausdorff\n"
                      << tr.status << ',' << tr.iterations << ',' << tr.J_initial << ',' << tr.J_final << ',' << hd
                      << '\n';
                 }));
  for (const auto& l : tr.log) *c.err << l << '\n';
  *c.out << "final polygon: " << polygon_literal(tr.final_poly) << '\n';
  c.summary["status"] = tr.status;
  c.summary["final_polygon"] = polygon_literal(tr.final_poly);
  c.summary["hausdorff"] = hd;
  c.summary["J_reduction"] = tr.J_initial > 0.0 ? 1.0 - tr.J_final / tr.J_initial : 0.0;
}

const std::map<std::string, void (*)(Context&)>& commands() {
  static const std::map<std::string, void (*)(Context&)> m{
      {"mesh", cmd_mesh},
      {"solve", cmd_solve},
      {"dtn", [](Context& c) { cmd_operator(c, true); }},
      {"ntd", [](Context& c) { cmd_operator(c, false); }},
      {"deriv-check", cmd_deriv_check},
      {"rate-study", cmd_rate_study},
      {"op-deriv", cmd_op_deriv},
      {"singularity", cmd_singularity},
      {"reconstruct", cmd_reconstruct},
  };
  return m;
}

std::string usage() {
  std::string s = "usage: polyeit <subcommand> <config.json> [--set path=value]... [--out dir] [--threads n] "
                  "[--dry-run]\nsubcommands:";
  for (const auto& [name, f] : commands()) s += " " + name;
  return s + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"polygonal inclusion shape-derivative toolkit", "polyeit"};
  std::string sub, config_path, out_dir;
  std::vector<std::string> sets;
  bool dry = false;
  unsigned threads = 0;
  app.add_option("subcommand", sub, "subcommand")->required();
  app.add_option("config", config_path, "JSON config")->required();
  app.add_option("--set", sets, "override a dotted config path, e.g. mesh.h=0.01");
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--threads", threads, "worker thread cap");
  app.add_flag("--dry-run", dry, "validate and print the plan");
  app.set_version_flag("--version", kVersion);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << usage();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << usage();
    return kUsage;
  }
  const auto it = commands().find(sub);
  if (it == commands().end()) {
    err << "unknown subcommand '" << sub << "'\n" << usage();
    return kUsage;
  }
  if (threads > 0) set_thread_limit(threads);

  Context c;
  c.dry_run = dry;
  c.out = &out;
  c.err = &err;
  const std::string started = timestamp();
  try {
    std::ifstream f(config_path);
    if (!f) throw ValidationError("config: cannot open " + config_path);
    try {
      c.cfg = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    if (!c.cfg.is_object()) throw ValidationError("config: top level must be an object");
    for (const auto& s : sets) apply_override(c.cfg, s);
    c.root = Node{&c.cfg, ""};
    if (out_dir.empty()) out_dir = c.root.has("output") ? c.root.at("output").str("dir", "out") : "out";
    Outputs files(out_dir);
    c.files = &files;
    it->second(c);
    if (dry) return kOk;
    const std::string canon = c.cfg.dump();
    json manifest{{"tool_version", kVersion},
                  {"subcommand", sub},
                  {"config_hash", sha256_hex(canon)},
                  {"config", c.cfg},
                  {"started", started},
                  {"finished", timestamp()},
                  {"threads", thread_limit()},
                  {"outputs", files.inventory()},
                  {"summary", c.summary}};
    fs::create_directories(files.dir());
    std::ofstream mf(files.dir() / "manifest.json");
    mf << manifest.dump(2) << '\n';
    if (!mf) throw ValidationError("output.dir: cannot write manifest.json");
    out << sub << ": wrote " << files.inventory().size() << " files to " << files.dir().string() << '\n';
    return kOk;
  } catch (const ValidationError& e) {
    err << "invalid: " << e.what() << '\n';
    return kInvalid;
  } catch (const GeometryError& e) {
    err << "invalid: " << e.what() << '\n';
    return kInvalid;
  } catch (const SolverError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const MeshError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "invalid: " << e.what() << '\n';
    return kInvalid;
  }
}

}  // namespace polyeit::cli
