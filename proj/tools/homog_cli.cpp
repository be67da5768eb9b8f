// homog_cli: nets, partitions, oscillation diagnostics, cell problems, P1
// solves and the convergence study from the command line.
//
// Every subcommand writes <command>.csv and <command>.json into --out and
// prints the JSON summary. Exit codes: 0 pass, 1 threshold failure (or a
// numerical failure), 2 usage or configuration error.

#include "homog/homog.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace homog;

namespace {

constexpr int kPass = 0;
constexpr int kThresholdFailure = 1;
constexpr int kUsageError = 2;

struct Output {
  std::string dir = ".";

  void write(const std::string& file, const std::string& content) const {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / file;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path.string() + "'");
    out << content;
  }

  void write_csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) const {
    std::string s = header + "\n";
    for (const auto& r : rows) s += r + "\n";
    write(name + ".csv", s);
  }

  int finish(const std::string& name, Json summary, bool passed) const {
    summary["passed"] = passed;
    write(name + ".json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return passed ? kPass : kThresholdFailure;
  }
};

std::string num(double v) { return detail::csv_number(v); }

bool is_config_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::ScaleOrderViolated:
    case ErrorKind::ExponentOrderViolated:
    case ErrorKind::SeparationTooLarge:
    case ErrorKind::RadiusExceeded:
    case ErrorKind::NotElliptic:
      return true;
    default:
      return false;
  }
}

/// HOMOG_THREADS, when set, must be a positive integer.
void check_threads_env() {
  const char* env = std::getenv("HOMOG_THREADS");
  if (!env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1)
    throw Error(ErrorKind::InvalidConfig, std::string("HOMOG_THREADS must be a positive integer, got '") + env + "'");
}

Json tolerances_json() {
  return {{"separation_relative", 1e-12}, {"partition_sum", 1e-12}, {"laminate_relative", 1e-6}, {"solver_relative_residual", SolveOptions{}.tolerance}};
}

// ---------------------------------------------------------------------------

struct NetArgs {
  std::string model = "flat";
  double separation = 0.1;
  std::uint64_t seed = 1;
  std::string order = "farthest";
};

int run_net(const NetArgs& a, const Output& out) {
  const auto model = ManifoldModel<2>::from_preset(a.model);
  NetOptions no;
  if (a.order == "random") no.order = InsertionOrder::Random;
  else if (a.order != "farthest") throw Error(ErrorKind::InvalidConfig, "unknown insertion order '" + a.order + "' (farthest | random)");
  const auto net = build_net(model, a.separation, a.seed, no);
  const VoronoiDecomposition<2> dec(model, net);

  std::vector<std::string> rows;
  for (std::size_t j = 0; j < net.size(); ++j) rows.push_back(std::to_string(j) + "," + num(net.points[j][0]) + "," + num(net.points[j][1]));
  out.write_csv("net", "j,x1,x2", rows);

  const double min_dist = min_pairwise_distance(model, net);
  const double covering = dec.covering_radius();
  double adj_min = 1e300, adj_max = 0.0;
  for (const auto& [i, j] : dec.adjacency_pairs()) {
    const double d = model.distance(net.points[static_cast<std::size_t>(i)], net.points[static_cast<std::size_t>(j)]);
    adj_min = std::min(adj_min, d);
    adj_max = std::max(adj_max, d);
  }
  const bool separated = min_dist >= a.separation * (1.0 - 1e-12);
  const bool covered = covering <= a.separation * (1.0 + 1e-12);
  Json j;
  j["model"] = model.name();
  j["separation"] = a.separation;
  j["seed"] = a.seed;
  j["order"] = a.order;
  j["J"] = net.size();
  j["K"] = overlap_constant(dec);
  j["min_angle"] = min_adjacent_angle(dec);
  j["min_pairwise_distance"] = min_dist;
  j["covering_radius"] = covering;
  j["covering_exact"] = dec.covering_is_exact();
  j["adjacent_distance_min"] = adj_min;
  j["adjacent_distance_max"] = adj_max;
  j["packing_constant"] = packing_constant(model, net);
  j["chart_constant"] = euclidean_chart_constant(model, a.separation, 64, a.seed);
  j["separated"] = separated;
  j["covered"] = covered;
  j["tolerances"] = tolerances_json();
  return out.finish("net", j, separated && covered);
}

// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::string model = "flat";
  double eps = 0.01;
  double alpha = 0.8;
  double beta = 0.6;
  std::uint64_t seed = 1;
  std::string profile = "quintic";
  int grid = 0;
  int dump = 0;
};

int run_partition(const PartitionArgs& a, const Output& out) {
  const auto model = ManifoldModel<2>::from_preset(a.model);
  check_exponents(a.alpha, a.beta);
  const auto net = build_net(model, std::pow(a.eps, a.beta), a.seed);
  const VoronoiDecomposition<2> dec(model, net);
  PartitionOptions po;
  po.profile = step_profile_from_string(a.profile);
  const PartitionOfUnity<2> pu(dec, a.alpha, a.beta, a.eps, po);
  const auto d = partition_diagnostics(pu, a.grid);

  std::vector<std::string> rows;
  if (a.dump > 0) {
    for (std::size_t c = 0; c < GridIndex<2>::size(a.dump); ++c) {
      const Vec<2> q = GridIndex<2>::midpoint(c, a.dump);
      const auto s = pu.evaluate_all(q);
      const Mat<2> ginv = model.inverse_metric(q);
      for (std::size_t k = 0; k < s.sites.size(); ++k)
        rows.push_back(num(q[0]) + "," + num(q[1]) + "," + std::to_string(s.sites[k]) + "," + num(s.values[k]) + "," +
                       num(std::sqrt(s.differentials[k].dot(ginv * s.differentials[k]))));
    }
    out.write_csv("partition", "x1,x2,j,psi,grad_psi", rows);
  }

  Json j;
  j["model"] = model.name();
  j["epsilon"] = d.epsilon;
  j["alpha"] = d.alpha;
  j["beta"] = d.beta;
  j["delta"] = d.delta;
  j["separation"] = d.separation;
  j["seed"] = a.seed;
  j["profile"] = a.profile;
  j["grid_n"] = d.grid_n;
  j["sites"] = d.sites;
  j["max_sum_error"] = d.max_sum_error;
  j["min_denominator"] = d.min_denominator;
  j["max_gradient"] = d.max_gradient;
  j["scaled_gradient"] = d.scaled_gradient;
  j["gradient_support_union"] = d.gradient_support_union;
  j["gradient_support_sum"] = d.gradient_support_sum;
  j["gradient_support_max"] = d.gradient_support_max;
  j["max_transition_count"] = d.max_transition_count;
  j["max_support_distance"] = d.max_support_distance;
  j["locality_violations"] = d.locality_violations;
  j["product_violations"] = d.product_violations;
  j["square_violations"] = d.square_violations;
  j["inner_violations"] = d.inner_violations;
  j["tolerances"] = tolerances_json();
  const bool ok = d.max_sum_error < 1e-12 && d.locality_violations == 0 && d.product_violations == 0 &&
                  d.square_violations == 0 && d.inner_violations == 0;
  return out.finish("partition", j, ok);
}

// ---------------------------------------------------------------------------

int run_verify(SuiteConfig c, const Output& out) {
  c.suites.erase(std::remove(c.suites.begin(), c.suites.end(), std::string{}), c.suites.end());
  const auto rep = run_diagnostic_suite(c);
  std::vector<std::string> rows;
  for (const auto& r : rep.reports)
    for (auto& row : suite_csv_rows(r)) rows.push_back(std::move(row));
  out.write_csv("verify", suite_csv_header(), rows);
  Json j = suite_json(rep);
  j["tolerances"] = tolerances_json();
  return out.finish("verify", j, rep.passed);
}

// ---------------------------------------------------------------------------

struct HomogenizeArgs {
  std::string model = "flat";
  std::string tensor = "laminate";
  int modes = 32;
  int grid = 8;
};

int run_homogenize(const HomogenizeArgs& a, const Output& out) {
  if (a.modes < 1 || a.grid < 1) throw Error(ErrorKind::InvalidConfig, "--fiber-modes and --base-grid must be positive");
  const auto model = ManifoldModel<2>::from_preset(a.model);
  const auto tensor = TensorField<2>::preset(a.tensor);
  CellOptions co;
  co.modes = a.modes;
  const HomogenizedField<2> field(model, tensor, DirectionKind::GramSchmidt, co);

  const std::size_t n = GridIndex<2>::size(a.grid);
  std::vector<HomogenizedTensor<2>> t(n);
  std::vector<EllipticityBounds> source(n);
  parallel_for(n, [&](std::size_t c) {
    const Vec<2> p = GridIndex<2>::midpoint(c, a.grid);
    t[c] = field.tensor(p);
    source[c] = ellipticity(tensor, p, model.frame_gram(p));
  });

  std::vector<std::string> rows;
  double lower = 1e300, upper = 0.0, src_lower = 1e300, src_upper = 0.0, asym = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const Vec<2> p = GridIndex<2>::midpoint(c, a.grid);
    const Mat<2>& e = t[c].endomorphism;
    rows.push_back(num(p[0]) + "," + num(p[1]) + "," + num(e(0, 0)) + "," + num(e(0, 1)) + "," + num(e(1, 0)) + "," + num(e(1, 1)) +
                   "," + num(t[c].lower) + "," + num(t[c].upper));
    lower = std::min(lower, t[c].lower);
    upper = std::max(upper, t[c].upper);
    src_lower = std::min(src_lower, source[c].lower);
    src_upper = std::max(src_upper, source[c].upper);
    asym = std::max(asym, t[c].asymmetry);
  }
  out.write_csv("homogenize", "x1,x2,a11,a12,a21,a22,lower,upper", rows);

  Json j;
  j["model"] = model.name();
  j["tensor"] = a.tensor;
  j["fiber_modes"] = a.modes;
  j["base_grid"] = a.grid;
  j["homogenized_lower"] = lower;
  j["homogenized_upper"] = upper;
  j["source_lower"] = src_lower;
  j["source_upper"] = src_upper;
  j["max_asymmetry"] = asym;
  // A* stays within the ellipticity bounds of A (up to the solver tolerance)
  bool ok = lower >= src_lower * (1.0 - 1e-8) && upper <= src_upper * (1.0 + 1e-8);
  if (a.tensor == "laminate" && model.is_flat()) {
    const Mat<2>& e = t.front().endomorphism;
    const double err11 = std::abs(e(0, 0) - std::sqrt(3.0)) / std::sqrt(3.0), err22 = std::abs(e(1, 1) - 2.0) / 2.0;
    j["laminate_check"] = {{"a11", e(0, 0)}, {"a22", e(1, 1)}, {"relative_error_11", err11}, {"relative_error_22", err22}};
    ok = ok && err11 < 1e-6 && err22 < 1e-6;
  }
  j["tolerances"] = tolerances_json();
  return out.finish("homogenize", j, ok);
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string model = "flat";
  std::string domain = "torus-minus-disk";
  std::string coef = "star";
  std::string tensor = "laminate";
  std::string load = "one";
  std::string tensor_mode = "coords";
  double eps = 0.02;
  double alpha = 0.8;
  double beta = 0.6;
  std::uint64_t seed = 1;
  int modes = 32;
  int cells = 0;
  double points_per_epsilon = 8.0;
  int homogenized_grid = 32;
  double memory_limit_mb = 4000.0;
};

/// --coef eps: the oscillating A^eps_sym; star: the homogenized A*; const: the
/// fiber average of A (the naive arithmetic-mean coefficient).
int run_solve(const SolveArgs& a, const Output& out) {
  const auto model = ManifoldModel<2>::from_preset(a.model);
  const auto tensor = TensorField<2>::preset(a.tensor);
  const DomainSpec domain = DomainSpec::from_preset(a.domain);
  const auto f = load_preset(a.load);
  int cells = a.cells;
  if (a.coef == "eps") {
    if (a.points_per_epsilon < 8.0) throw Error(ErrorKind::InvalidConfig, "oscillating runs need h <= eps/8");
    const int needed = static_cast<int>(std::ceil(a.points_per_epsilon / a.eps - 1e-9));
    if (cells == 0) cells = needed;
    if (cells < needed) throw Error(ErrorKind::InvalidConfig, "--cells " + std::to_string(cells) + " leaves h > eps/8 (need >= " + std::to_string(needed) + ")");
  } else if (a.coef != "star" && a.coef != "const") {
    throw Error(ErrorKind::InvalidConfig, "unknown coefficient '" + a.coef + "' (eps | star | const)");
  }
  if (cells == 0) cells = 128;
  if (StudyConfig::memory_estimate_mb(cells) > a.memory_limit_mb)
    throw Error(ErrorKind::InvalidConfig, std::to_string(cells) + " cells per side exceed --memory-limit-mb");
  const Mesh mesh(model, domain, cells);

  std::optional<Ladder<2>> ladder;
  std::optional<detail::HomogenizedSampler> star;
  ChartCoefficient coeff;
  if (a.coef == "eps") {
    LadderConfig lc;
    lc.epsilons = {a.eps};
    lc.alpha = a.alpha;
    lc.beta = a.beta;
    lc.seed = a.seed;
    ladder.emplace(model, lc);
    const TensorMode mode = tensor_mode_from_string(a.tensor_mode);
    coeff = [&, mode](const Vec<2>& x) { return chart_coefficient(model, (*ladder)[0].tensor_value(tensor, x, mode, true), x); };
  } else if (a.coef == "star") {
    star.emplace(model, tensor, a.modes, a.homogenized_grid);
    coeff = [&](const Vec<2>& x) { return chart_coefficient(model, (*star)(x), x); };
  } else {
    const FiberGrid<2> fg{16};
    coeff = [&, fg](const Vec<2>& x) {
      Mat<2> m = Mat<2>::Zero();
      for (std::size_t s = 0; s < fg.size(); ++s) m += tensor(x, fg.point(s));
      m /= static_cast<double>(fg.size());
      return chart_coefficient(model, TensorField<2>::symmetrize(m, model.frame_gram(x)), x);
    };
  }
  const DirichletProblem problem(model, mesh, coeff);
  const auto sol = problem.solve(f);

  std::vector<std::string> rows;
  rows.reserve(mesh.node_count());
  for (std::size_t k = 0; k < mesh.node_count(); ++k) {
    const Vec<2> x = mesh.node(k);
    rows.push_back(std::to_string(k) + "," + num(x[0]) + "," + num(x[1]) + "," + num(sol.u[k]));
  }
  out.write_csv("solve", "node,x1,x2,u", rows);

  Json j;
  j["model"] = model.name();
  j["domain"] = domain.name();
  j["coef"] = a.coef;
  j["tensor"] = a.tensor;
  j["load"] = a.load;
  if (a.coef == "eps") j["epsilon"] = a.eps;
  j["cells"] = cells;
  j["unknowns"] = mesh.unknowns();
  j["iterations"] = sol.iterations;
  j["relative_residual"] = sol.relative_residual;
  j["multigrid_levels"] = sol.multigrid_levels;
  j["l2_norm"] = l2_norm(model, mesh, sol.u);
  j["h1_seminorm"] = h1_seminorm(model, mesh, sol.u);
  j["tolerances"] = tolerances_json();
  return out.finish("solve", j, sol.relative_residual <= SolveOptions{}.tolerance);
}

// ---------------------------------------------------------------------------

int run_study(StudyConfig c, const Output& out) {
  if (c.output_dir.empty()) c.output_dir = out.dir;
  const auto rep = run_homogenization_study(c, [](const StudyRow& r) {
    std::cerr << "eps " << r.epsilon << ": " << r.cells << "^2 cells, L2 gap " << r.l2_gap << " (" << r.seconds << " s)\n";
  });
  std::cout << study_json(rep).dump(2) << "\n";
  return rep.passed ? kPass : kThresholdFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale homogenization on manifolds: nets, partitions, diagnostics, cell problems and studies"};
  app.require_subcommand(1);
  Output out;
  app.add_option("--out", out.dir, "Output directory for <command>.csv and <command>.json")->capture_default_str();

  NetArgs net;
  auto* net_cmd = app.add_subcommand("net", "Build a maximal separated net and report its invariants");
  net_cmd->add_option("--model", net.model, "Manifold preset: flat | warped | warped-sin(a) | skew-frame(b)")->capture_default_str();
  net_cmd->add_option("--sep", net.separation, "Separation")->capture_default_str()->check(CLI::PositiveNumber);
  net_cmd->add_option("--seed", net.seed, "Seed")->capture_default_str();
  net_cmd->add_option("--order", net.order, "Insertion order: farthest | random")->capture_default_str();

  PartitionArgs part;
  auto* part_cmd = app.add_subcommand("partition", "Build the partition of unity for one eps and report diagnostics");
  part_cmd->add_option("--model", part.model, "Manifold preset")->capture_default_str();
  part_cmd->add_option("--eps", part.eps, "Fast scale eps")->capture_default_str();
  part_cmd->add_option("--alpha", part.alpha, "Transition exponent alpha")->capture_default_str();
  part_cmd->add_option("--beta", part.beta, "Net exponent beta")->capture_default_str();
  part_cmd->add_option("--seed", part.seed, "Seed")->capture_default_str();
  part_cmd->add_option("--profile", part.profile, "Step profile: quintic | mollified")->capture_default_str();
  part_cmd->add_option("--grid", part.grid, "Diagnostic grid per side (0: automatic)")->capture_default_str();
  part_cmd->add_option("--dump", part.dump, "Also write psi and |grad psi| on an n x n grid (0: no dump)")->capture_default_str();

  SuiteConfig suite;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oscillation diagnostic suites over an eps-ladder");
  verify_cmd->add_option("--model", suite.model, "Manifold preset")->capture_default_str();
  verify_cmd->add_option("--suite", suite.suites, "Suites: rl, admissible, algebra, gradcomm, byparts, compensated")
      ->delimiter(',')
      ->capture_default_str();
  verify_cmd->add_option("--eps-list", suite.epsilons, "eps ladder")->delimiter(',')->capture_default_str();
  verify_cmd->add_option("--alpha", suite.alpha, "Transition exponent alpha")->capture_default_str();
  verify_cmd->add_option("--beta", suite.beta, "Net exponent beta")->capture_default_str();
  verify_cmd->add_option("--seed", suite.seed, "Seed")->capture_default_str();
  verify_cmd->add_option("--profile", suite.profile, "Step profile: quintic | mollified")->capture_default_str();
  verify_cmd->add_flag("--aligned", suite.lattice_aligned, "Lattice-aligned nets (the classical periodic reference)");

  HomogenizeArgs hom;
  auto* hom_cmd = app.add_subcommand("homogenize", "Solve cell problems and tabulate A* over a base grid");
  hom_cmd->add_option("--model", hom.model, "Manifold preset")->capture_default_str();
  hom_cmd->add_option("--tensor-preset", hom.tensor,
                      "identity | laminate | laminate-v2 | checkerboard | modulated-laminate | anisotropic | constant:a,b,c,d | scalar:<expr>")
      ->capture_default_str();
  hom_cmd->add_option("--fiber-modes", hom.modes, "Fiber modes N (2N samples per axis)")->capture_default_str();
  hom_cmd->add_option("--base-grid", hom.grid, "Base grid points per side")->capture_default_str();

  SolveArgs sol;
  auto* solve_cmd = app.add_subcommand("solve", "Solve the Dirichlet problem with an oscillating, homogenized or averaged coefficient");
  solve_cmd->add_option("--model", sol.model, "Manifold preset")->capture_default_str();
  solve_cmd->add_option("--domain-preset", sol.domain, "square | torus-minus-disk")->capture_default_str();
  solve_cmd->add_option("--coef", sol.coef, "eps | star | const")->capture_default_str();
  solve_cmd->add_option("--tensor-preset", sol.tensor, "Tensor preset")->capture_default_str();
  solve_cmd->add_option("--f-preset", sol.load, "Load: one | sin-bump | manufactured | <expression in x1, x2>")->capture_default_str();
  solve_cmd->add_option("--tensor-mode", sol.tensor_mode, "coords | pullback")->capture_default_str();
  solve_cmd->add_option("--eps", sol.eps, "Fast scale for --coef eps")->capture_default_str();
  solve_cmd->add_option("--alpha", sol.alpha, "Transition exponent alpha")->capture_default_str();
  solve_cmd->add_option("--beta", sol.beta, "Net exponent beta")->capture_default_str();
  solve_cmd->add_option("--seed", sol.seed, "Seed")->capture_default_str();
  solve_cmd->add_option("--fiber-modes", sol.modes, "Fiber modes for A*")->capture_default_str();
  solve_cmd->add_option("--homogenized-grid", sol.homogenized_grid, "Base grid for A* when it varies")->capture_default_str();
  solve_cmd->add_option("--cells", sol.cells, "Mesh cells per side (0: ceil(8/eps) for eps, 128 otherwise)")->capture_default_str();
  solve_cmd->add_option("--points-per-epsilon", sol.points_per_epsilon, "Mesh cells per eps for --coef eps")->capture_default_str();
  solve_cmd->add_option("--memory-limit-mb", sol.memory_limit_mb, "Refuse meshes estimated above this")->capture_default_str();

  std::string config_path;
  StudyConfig study;
  std::string name, model, tensor, domain, load, tensor_mode, profile;
  std::vector<double> epsilons;
  std::vector<std::uint64_t> seeds;
  double alpha = 0, beta = 0, ppe = 0;
  int modes = 0;
  bool aligned = false;
  auto* study_cmd = app.add_subcommand("study", "Run the homogenization convergence study (config file, flags override)");
  study_cmd->add_option("--config", config_path, "StudyConfig JSON file")->check(CLI::ExistingFile);
  auto* o_name = study_cmd->add_option("--name", name, "Study name (output file stem)");
  auto* o_model = study_cmd->add_option("--model", model, "Manifold preset");
  auto* o_tensor = study_cmd->add_option("--tensor-preset", tensor, "Tensor preset");
  auto* o_domain = study_cmd->add_option("--domain-preset", domain, "square | torus-minus-disk");
  auto* o_load = study_cmd->add_option("--f-preset", load, "Load preset or expression");
  auto* o_eps = study_cmd->add_option("--eps-list", epsilons, "eps ladder")->delimiter(',');
  auto* o_seeds = study_cmd->add_option("--seeds", seeds, "Seeds")->delimiter(',');
  auto* o_alpha = study_cmd->add_option("--alpha", alpha, "Transition exponent alpha");
  auto* o_beta = study_cmd->add_option("--beta", beta, "Net exponent beta");
  auto* o_modes = study_cmd->add_option("--fiber-modes", modes, "Fiber modes N");
  auto* o_ppe = study_cmd->add_option("--points-per-epsilon", ppe, "Mesh cells per eps (>= 8)");
  auto* o_mode = study_cmd->add_option("--tensor-mode", tensor_mode, "coords | pullback");
  auto* o_profile = study_cmd->add_option("--profile", profile, "quintic | mollified");
  auto* o_aligned = study_cmd->add_flag("--aligned", aligned, "Lattice-aligned nets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsageError;
  }

  try {
    check_threads_env();
    if (net_cmd->parsed()) return run_net(net, out);
    if (part_cmd->parsed()) return run_partition(part, out);
    if (verify_cmd->parsed()) return run_verify(suite, out);
    if (hom_cmd->parsed()) return run_homogenize(hom, out);
    if (solve_cmd->parsed()) return run_solve(sol, out);
    if (study_cmd->parsed()) {
      if (!config_path.empty()) study = StudyConfig::load_file(config_path);
      if (o_name->count()) study.name = name;
      if (o_model->count()) study.model = model;
      if (o_tensor->count()) study.tensor = tensor;
      if (o_domain->count()) study.domain = domain;
      if (o_load->count()) study.load = load;
      if (o_eps->count()) study.epsilons = epsilons;
      if (o_seeds->count()) study.seeds = seeds;
      if (o_alpha->count()) study.alpha = alpha;
      if (o_beta->count()) study.beta = beta;
      if (o_modes->count()) study.fiber_modes = modes;
      if (o_ppe->count()) study.points_per_epsilon = ppe;
      if (o_mode->count()) study.tensor_mode = tensor_mode;
      if (o_profile->count()) study.profile = profile;
      if (o_aligned->count()) study.lattice_aligned = aligned;
      if (app.get_option("--out")->count()) study.output_dir = out.dir;
      return run_study(study, out);
    }
  } catch (const Error& e) {
    std::cerr << "homog_cli: " << e.what() << "\n";
    return is_config_error(e.kind()) ? kUsageError : kThresholdFailure;
  } catch (const std::exception& e) {
    std::cerr << "homog_cli: " << e.what() << "\n";
    return kThresholdFailure;
  }
  return kUsageError;
}
