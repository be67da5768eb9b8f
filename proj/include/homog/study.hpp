#pragma once

// Homogenization study: for each eps of a ladder build the net, partition and
// oscillating tensor, solve u_eps on a mesh resolving eps, solve u* with the
// homogenized tensor on the same mesh, and record the L2 gap and weak pairings.
// Configuration and reports are JSON; the per-eps table is CSV.

#include "homog/oscillate.hpp"
#include "homog/two_scale.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace homog {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

struct StudyConfig {
  std::string name = "laminate";
  std::string model = "flat";
  std::string tensor = "laminate";
  std::string domain = "torus-minus-disk";
  std::string load = "one";
  std::vector<double> epsilons{0.02, 0.01, 0.005};
  double alpha = 0.8;
  double beta = 0.6;
  int fiber_modes = 32;
  double points_per_epsilon = 8.0;  // base mesh h = eps / points_per_epsilon
  int homogenized_grid = 32;        // A* sampled on this grid when it varies over the base
  int two_scale_cells = 64;
  std::vector<std::uint64_t> seeds{1};
  std::string tensor_mode = "coords";
  std::string profile = "quintic";
  bool lattice_aligned = false;
  std::vector<std::string> test_functions{"1", "sin(2*pi*x1)", "cos(2*pi*x2)", "sin(2*pi*x1)*cos(2*pi*x2)",
                                          "cos(2*pi*(x1+2*x2))"};
  double gap_ratio = 0.35;         // final gap must be below gap_ratio * initial gap
  double constant_tolerance = 1e-8;  // gap bound when A does not oscillate
  double memory_limit_mb = 4000.0;
  std::string output_dir;

  Json to_json() const {
    Json j;
    j["name"] = name;
    j["model"] = model;
    j["tensor"] = tensor;
    j["domain"] = domain;
    j["load"] = load;
    j["epsilons"] = epsilons;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["fiber_modes"] = fiber_modes;
    j["points_per_epsilon"] = points_per_epsilon;
    j["homogenized_grid"] = homogenized_grid;
    j["two_scale_cells"] = two_scale_cells;
    j["seeds"] = seeds;
    j["tensor_mode"] = tensor_mode;
    j["profile"] = profile;
    j["lattice_aligned"] = lattice_aligned;
    j["test_functions"] = test_functions;
    j["gap_ratio"] = gap_ratio;
    j["constant_tolerance"] = constant_tolerance;
    j["memory_limit_mb"] = memory_limit_mb;
    j["output_dir"] = output_dir;
    return j;
  }

  /// Unknown keys are configuration errors; absent keys keep their defaults.
  static StudyConfig from_json(const Json& j) {
    StudyConfig c;
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "study configuration must be a JSON object");
    const Json defaults = c.to_json();
    for (const auto& [key, value] : j.items())
      if (!defaults.contains(key)) throw Error(ErrorKind::InvalidConfig, "unknown study configuration key '" + key + "'");
    try {
      auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
      };
      get("name", c.name);
      get("model", c.model);
      get("tensor", c.tensor);
      get("domain", c.domain);
      get("load", c.load);
      get("epsilons", c.epsilons);
      get("alpha", c.alpha);
      get("beta", c.beta);
      get("fiber_modes", c.fiber_modes);
      get("points_per_epsilon", c.points_per_epsilon);
      get("homogenized_grid", c.homogenized_grid);
      get("two_scale_cells", c.two_scale_cells);
      get("seeds", c.seeds);
      get("tensor_mode", c.tensor_mode);
      get("profile", c.profile);
      get("lattice_aligned", c.lattice_aligned);
      get("test_functions", c.test_functions);
      get("gap_ratio", c.gap_ratio);
      get("constant_tolerance", c.constant_tolerance);
      get("memory_limit_mb", c.memory_limit_mb);
      get("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, std::string("study configuration: ") + e.what());
    }
    return c;
  }

  static StudyConfig load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read configuration '" + path + "'");
    try {
      return from_json(Json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, "configuration '" + path + "' is not valid JSON: " + e.what());
    }
  }

  /// FNV-1a of the canonical JSON without output_dir: identifies the
  /// computation, not where it was written. Stable across platforms and runs.
  std::string hash() const {
    Json j = to_json();
    j.erase("output_dir");
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }

  int mesh_cells(double eps) const { return static_cast<int>(std::ceil(points_per_epsilon / eps - 1e-9)); }

  /// Checks everything that can be checked before any solve.
  void validate() const {
    if (epsilons.empty()) throw Error(ErrorKind::InvalidConfig, "the eps ladder is empty");
    if (seeds.empty()) throw Error(ErrorKind::InvalidConfig, "at least one seed is required");
    check_exponents(alpha, beta);
    for (double e : epsilons) {
      if (!(e > 0.0 && e < 1.0)) throw Error(ErrorKind::InvalidConfig, "eps must lie in (0, 1)");
      // eps << eps^alpha << eps^beta, with at least four fiber periods per net cell
      if (e > max_epsilon_for_separation(std::pow(e, beta)))
        throw Error(ErrorKind::ScaleOrderViolated, "eps = " + detail::format_number(e) + " is not small against eps^beta");
    }
    if (points_per_epsilon < 8.0)
      throw Error(ErrorKind::InvalidConfig, "oscillating runs need h <= eps/8 (points_per_epsilon >= 8)");
    if (fiber_modes < 1 || homogenized_grid < 2 || two_scale_cells < 2)
      throw Error(ErrorKind::InvalidConfig, "fiber_modes, homogenized_grid and two_scale_cells must be positive");
    if (test_functions.empty()) throw Error(ErrorKind::InvalidConfig, "at least one test function is required");
    for (const auto& f : test_functions) (void)load_preset(f);
    (void)load_preset(load);
    (void)tensor_mode_from_string(tensor_mode);
    (void)step_profile_from_string(profile);
    (void)DomainSpec::from_preset(domain);
    for (double e : epsilons) {
      const double mb = memory_estimate_mb(mesh_cells(e));
      if (mb > memory_limit_mb)
        throw Error(ErrorKind::InvalidConfig, "eps = " + detail::format_number(e) + " needs about " + detail::format_number(mb) +
                                                  " MB (> memory_limit_mb); lower points_per_epsilon or raise the limit");
    }
  }

  /// Peak memory of one eps step: two assembled problems with multigrid
  /// hierarchies plus nodal fields, about 700 bytes per node (measured 1.6 GB
  /// at 1600^2).
  static double memory_estimate_mb(int cells) { return 700.0 * static_cast<double>(cells) * cells / 1.0e6; }
};

struct StudyRow {
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  int cells = 0;
  double l2_gap = 0.0;
  double h1_gap = 0.0;
  double star_norm = 0.0;
  std::vector<double> pairings;  // |int (u_eps - u*) phi| per test function
  int iterations_eps = 0;
  int iterations_star = 0;
  double seconds = 0.0;
};

struct StudyVerdict {
  bool oscillating = true;
  bool gap_strictly_decreasing = false;
  double gap_ratio = 0.0;
  bool gap_ratio_pass = false;
  std::vector<bool> pairings_decreasing;
  bool constant_gap_pass = false;
  bool passed = false;
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyRow> rows;
  std::vector<StudyVerdict> verdicts;  // one per seed
  TwoScaleReport two_scale;
  bool passed = false;
  double seconds = 0.0;
};

namespace detail {

/// A* (frame components) over the base: exact when constant, otherwise
/// bilinear interpolation of cell solves on a periodic grid.
class HomogenizedSampler {
 public:
  HomogenizedSampler(const ManifoldModel<2>& model, const TensorField<2>& a, int modes, int grid) : grid_(grid) {
    CellOptions co;
    co.modes = modes;
    const HomogenizedField<2> field(model, a, DirectionKind::GramSchmidt, co);
    if (field.constant()) {
      constant_ = field.constant_tensor().endomorphism;
      is_constant_ = true;
      return;
    }
    std::vector<Vec<2>> points;
    for (int j = 0; j < grid; ++j)
      for (int i = 0; i < grid; ++i) points.emplace_back(static_cast<double>(i) / grid, static_cast<double>(j) / grid);
    samples_ = field.endomorphisms(points);
  }

  Mat<2> operator()(const Vec<2>& x) const {
    if (is_constant_) return constant_;
    const double gx = wrap01(x[0]) * grid_, gy = wrap01(x[1]) * grid_;
    const int i0 = static_cast<int>(std::floor(gx)), j0 = static_cast<int>(std::floor(gy));
    const double tx = gx - i0, ty = gy - j0;
    auto at = [&](int i, int j) -> const Mat<2>& { return samples_[static_cast<std::size_t>(((j % grid_) + grid_) % grid_) * grid_ + ((i % grid_) + grid_) % grid_]; };
    return (1 - tx) * (1 - ty) * at(i0, j0) + tx * (1 - ty) * at(i0 + 1, j0) + (1 - tx) * ty * at(i0, j0 + 1) +
           tx * ty * at(i0 + 1, j0 + 1);
  }

 private:
  int grid_;
  bool is_constant_ = false;
  Mat<2> constant_ = Mat<2>::Identity();
  std::vector<Mat<2>> samples_;
};

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

}  // namespace detail

inline std::string study_csv_header(const StudyConfig& c) {
  std::string h = "seed,epsilon,cells,l2_gap,h1_gap,star_l2";
  for (std::size_t k = 0; k < c.test_functions.size(); ++k) h += ",pairing_" + std::to_string(k + 1);
  h += ",iterations_eps,iterations_star,two_scale_residual";
  return h;
}

/// One CSV line; deterministic given the configuration (no timings).
inline std::string study_csv_row(const StudyRow& r, double two_scale) {
  std::string s = std::to_string(r.seed) + "," + detail::csv_number(r.epsilon) + "," + std::to_string(r.cells) + "," +
                  detail::csv_number(r.l2_gap) + "," + detail::csv_number(r.h1_gap) + "," + detail::csv_number(r.star_norm);
  for (double p : r.pairings) s += "," + detail::csv_number(p);
  s += "," + std::to_string(r.iterations_eps) + "," + std::to_string(r.iterations_star) + "," + detail::csv_number(two_scale);
  return s;
}

inline Json study_json(const StudyReport& rep, const std::string& error = {}) {
  Json j;
  j["config_hash"] = rep.config.hash();
  j["config"] = rep.config.to_json();
  j["tolerances"] = {{"dirichlet_relative_residual", SolveOptions{}.tolerance},
                     {"cell_relative_residual", CellOptions{}.tolerance},
                     {"gap_ratio", rep.config.gap_ratio},
                     {"constant_tolerance", rep.config.constant_tolerance}};
  j["two_scale"] = {{"residual", rep.two_scale.residual},
                    {"base_residual", rep.two_scale.base_residual},
                    {"fiber_residual", rep.two_scale.fiber_residual},
                    {"tests", rep.two_scale.tests},
                    {"base_cells", rep.two_scale.base_cells}};
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"seed", r.seed},
                    {"epsilon", r.epsilon},
                    {"cells", r.cells},
                    {"l2_gap", r.l2_gap},
                    {"h1_gap", r.h1_gap},
                    {"star_l2", r.star_norm},
                    {"pairings", r.pairings},
                    {"iterations_eps", r.iterations_eps},
                    {"iterations_star", r.iterations_star},
                    {"seconds", r.seconds}});
  j["rows"] = rows;
  Json verdicts = Json::array();
  for (std::size_t s = 0; s < rep.verdicts.size(); ++s) {
    const auto& v = rep.verdicts[s];
    Json pv = Json::array();
    for (bool b : v.pairings_decreasing) pv.push_back(b);
    verdicts.push_back({{"seed", rep.config.seeds[s]},
                        {"oscillating", v.oscillating},
                        {"gap_strictly_decreasing", v.gap_strictly_decreasing},
                        {"gap_ratio", v.gap_ratio},
                        {"gap_ratio_pass", v.gap_ratio_pass},
                        {"pairings_decreasing", pv},
                        {"constant_gap_pass", v.constant_gap_pass},
                        {"passed", v.passed}});
  }
  j["verdicts"] = verdicts;
  j["passed"] = rep.passed;
  j["seconds"] = rep.seconds;
  if (!error.empty()) j["error"] = error;
  return j;
}

inline StudyVerdict judge_study(const StudyConfig& c, const std::vector<StudyRow>& rows, bool oscillating) {
  StudyVerdict v;
  v.oscillating = oscillating;
  if (rows.empty()) return v;
  v.gap_strictly_decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) v.gap_strictly_decreasing &= rows[i].l2_gap < rows[i - 1].l2_gap;
  v.gap_ratio = rows.front().l2_gap > 0.0 ? rows.back().l2_gap / rows.front().l2_gap : 0.0;
  v.gap_ratio_pass = rows.size() >= 2 && v.gap_ratio < c.gap_ratio;
  for (std::size_t k = 0; k < c.test_functions.size(); ++k) {
    bool dec = true;
    for (std::size_t i = 1; i < rows.size(); ++i) dec &= rows[i].pairings[k] < rows[i - 1].pairings[k];
    v.pairings_decreasing.push_back(dec);
  }
  v.constant_gap_pass = true;
  for (const auto& r : rows) v.constant_gap_pass &= r.l2_gap < c.constant_tolerance;
  if (oscillating) {
    bool all_pairings = true;
    for (bool b : v.pairings_decreasing) all_pairings &= b;
    v.passed = v.gap_strictly_decreasing && v.gap_ratio_pass && all_pairings;
  } else {
    v.passed = v.constant_gap_pass;
  }
  return v;
}

/// One eps step: u_eps (coefficient A^eps symmetrized) and u* on the same mesh.
inline StudyRow run_study_step(const StudyConfig& c, const ManifoldModel<2>& model, const TensorField<2>& a,
                               const Oscillator<2>& osc, const detail::HomogenizedSampler& star, double eps, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  StudyRow row;
  row.seed = seed;
  row.epsilon = eps;
  row.cells = c.mesh_cells(eps);
  const Mesh mesh(model, DomainSpec::from_preset(c.domain), row.cells);
  const auto f = load_preset(c.load);
  const TensorMode mode = tensor_mode_from_string(c.tensor_mode);
  std::vector<double> ustar, ueps;
  {
    const DirichletProblem p(model, mesh, [&](const Vec<2>& x) { return chart_coefficient(model, star(x), x); });
    const auto s = p.solve(f);
    ustar = s.u;
    row.iterations_star = s.iterations;
  }
  {
    ChartCoefficient coeff = [&](const Vec<2>& x) {
      return chart_coefficient(model, osc.tensor_value(a, x, mode, true), x);
    };
    const DirichletProblem p(model, mesh, coeff);
    const auto s = p.solve(f);
    ueps = s.u;
    row.iterations_eps = s.iterations;
  }
  const auto d = difference(ueps, ustar);
  row.l2_gap = l2_norm(model, mesh, d);
  row.h1_gap = h1_seminorm(model, mesh, d);
  row.star_norm = l2_norm(model, mesh, ustar);
  for (const auto& phi : c.test_functions) row.pairings.push_back(std::abs(weak_pairing(model, mesh, d, load_preset(phi))));
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

/// Runs the study; writes <name>.csv and <name>.json into output_dir when set.
/// Rows are flushed as they complete and the JSON records any error.
inline StudyReport run_homogenization_study(const StudyConfig& c, const std::function<void(const StudyRow&)>& progress = {}) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  StudyReport rep;
  rep.config = c;
  std::ofstream csv;
  std::filesystem::path json_path;
  if (!c.output_dir.empty()) {
    std::filesystem::create_directories(c.output_dir);
    csv.open(std::filesystem::path(c.output_dir) / (c.name + ".csv"));
    json_path = std::filesystem::path(c.output_dir) / (c.name + ".json");
    if (!csv) throw Error(ErrorKind::InvalidConfig, "cannot write to output_dir '" + c.output_dir + "'");
    csv << study_csv_header(c) << "\n" << std::flush;
  }
  auto write_json = [&](const std::string& error) {
    if (json_path.empty()) return;
    std::ofstream out(json_path);
    out << study_json(rep, error).dump(2) << "\n";
  };
  try {
    const auto model = ManifoldModel<2>::from_preset(c.model);
    const auto a = TensorField<2>::preset(c.tensor);
    const bool oscillating = a.depends_on_fiber;
    const detail::HomogenizedSampler star(model, a, c.fiber_modes, c.homogenized_grid);
    TwoScaleOptions tso;
    tso.base_cells = c.two_scale_cells;
    tso.cell.modes = c.fiber_modes;
    tso.load = c.load;
    tso.domain = DomainSpec::from_preset(c.domain);
    rep.two_scale = two_scale_residual(model, a, tso);
    for (std::uint64_t seed : c.seeds) {
      LadderConfig lc;
      lc.epsilons = c.epsilons;
      lc.alpha = c.alpha;
      lc.beta = c.beta;
      lc.seed = seed;
      lc.profile = step_profile_from_string(c.profile);
      lc.lattice_aligned = c.lattice_aligned;
      const Ladder<2> ladder(model, lc);
      std::vector<StudyRow> rows;
      for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
        const StudyRow row = run_study_step(c, model, a, ladder[i], star, c.epsilons[i], seed);
        rows.push_back(row);
        rep.rows.push_back(row);
        if (csv) csv << study_csv_row(row, rep.two_scale.residual) << "\n" << std::flush;
        if (progress) progress(row);
      }
      rep.verdicts.push_back(judge_study(c, rows, oscillating));
    }
  } catch (const std::exception& e) {
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(e.what());
    throw;
  }
  rep.passed = !rep.verdicts.empty();
  for (const auto& v : rep.verdicts) rep.passed &= v.passed;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json({});
  return rep;
}

}  // namespace homog
