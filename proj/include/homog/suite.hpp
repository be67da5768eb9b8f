#pragma once

// The diagnostic suite: the oscillation checks (Riemann-Lebesgue,
// admissibility, almost-algebra, gradient commutation, integration by parts,
// compensated pairing) run over one eps-ladder with fixed preset fields.

#include "homog/oscillate.hpp"
#include "homog/study.hpp"

#include <string>
#include <vector>

namespace homog {

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"rl", "admissible", "algebra", "gradcomm", "byparts", "compensated"};
  return names;
}

struct SuiteConfig {
  std::string model = "flat";
  std::vector<double> epsilons{0.02, 0.01, 0.005};
  double alpha = 0.8;
  double beta = 0.6;
  std::uint64_t seed = 1;
  std::string profile = "quintic";
  bool lattice_aligned = false;
  std::vector<std::string> suites = suite_names();

  void validate() const {
    for (const auto& s : suites)
      if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
        throw Error(ErrorKind::InvalidConfig, "unknown suite '" + s + "' (rl | admissible | algebra | gradcomm | byparts | compensated)");
    check_exponents(alpha, beta);
    (void)step_profile_from_string(profile);
  }

  LadderConfig ladder() const {
    LadderConfig c;
    c.epsilons = epsilons;
    c.alpha = alpha;
    c.beta = beta;
    c.seed = seed;
    c.profile = step_profile_from_string(profile);
    c.lattice_aligned = lattice_aligned;
    return c;
  }

  Json to_json() const {
    Json j;
    j["model"] = model;
    j["epsilons"] = epsilons;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["seed"] = seed;
    j["profile"] = profile;
    j["lattice_aligned"] = lattice_aligned;
    j["suites"] = suites;
    return j;
  }
};

struct SuiteReport {
  SuiteConfig config;
  std::vector<LadderReport> reports;
  bool passed = true;
};

/// Fields per suite: sin 2 pi v1 and 2 + cos 2 pi v1 for the integral checks,
/// sin 2 pi v1 and (1 + 0.5 sin 2 pi x1) sin 2 pi v1 for gradient commutation,
/// the three preset (u, X) pairs for integration by parts.
inline std::vector<LadderReport> run_suite(const Ladder<2>& ladder, const std::string& suite) {
  const auto sin_v1 = fiber_preset<2>("sin-v1");
  const auto cos_v1 = fiber_preset<2>("2+cos-v1");
  std::vector<LadderReport> out;
  if (suite == "rl") {
    out.push_back(riemann_lebesgue_check(ladder, sin_v1));
    out.push_back(riemann_lebesgue_check(ladder, cos_v1));
  } else if (suite == "admissible") {
    out.push_back(admissibility_check(ladder, sin_v1));
    out.push_back(admissibility_check(ladder, cos_v1));
  } else if (suite == "algebra") {
    out.push_back(algebra_check(ladder, sin_v1, sin_v1));
  } else if (suite == "gradcomm") {
    out.push_back(gradient_commutator_check(ladder, sin_v1));
    out.push_back(gradient_commutator_check(ladder, fiber_preset<2>("h-sin-v1")));
  } else if (suite == "byparts") {
    for (const auto& c : by_parts_presets()) out.push_back(by_parts_residual(ladder, c.u, c.x, c.name));
  } else if (suite == "compensated") {
    const BaseFunction<2> one{"1", [](const Vec<2>&) { return 1.0; }, [](const Vec<2>&) { return Vec<2>::Zero(); }};
    out.push_back(compensated_pairing(ladder, sin_v1, sin_v1, one));
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown suite '" + suite + "'");
  }
  return out;
}

/// Runs the requested suites; an empty list is a successful no-op.
inline SuiteReport run_diagnostic_suite(const SuiteConfig& c) {
  c.validate();
  SuiteReport rep;
  rep.config = c;
  if (c.suites.empty()) return rep;
  const Ladder<2> ladder(ManifoldModel<2>::from_preset(c.model), c.ladder());
  for (const auto& s : c.suites)
    for (auto& r : run_suite(ladder, s)) {
      rep.passed &= r.passed;
      rep.reports.push_back(std::move(r));
    }
  return rep;
}

inline std::string suite_csv_header() { return "suite,name,epsilon,measured,target,error,relative_error"; }

inline std::vector<std::string> suite_csv_rows(const LadderReport& r) {
  std::vector<std::string> out;
  for (const auto& row : r.rows)
    out.push_back(r.suite + ",\"" + r.name + "\"," + detail::csv_number(row.epsilon) + "," + detail::csv_number(row.measured) +
                  "," + detail::csv_number(row.target) + "," + detail::csv_number(row.error) + "," +
                  detail::csv_number(row.relative_error));
  return out;
}

inline Json suite_json(const SuiteReport& rep) {
  Json j;
  j["config"] = rep.config.to_json();
  Json reports = Json::array();
  for (const auto& r : rep.reports) {
    Json e;
    e["suite"] = r.suite;
    e["name"] = r.name;
    e["requirement"] = r.requirement;
    e["slope"] = r.slope;
    e["decreasing"] = r.decreasing;
    e["passed"] = r.passed;
    Json rows = Json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"epsilon", row.epsilon},
                      {"measured", row.measured},
                      {"target", row.target},
                      {"error", row.error},
                      {"relative_error", row.relative_error},
                      {"quadrature_error", row.quadrature_error}});
    e["rows"] = rows;
    reports.push_back(e);
  }
  j["reports"] = reports;
  j["passed"] = rep.passed;
  return j;
}

}  // namespace homog
