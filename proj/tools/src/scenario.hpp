#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario files: a network case reference plus fault, machine,
 * integrator, objective, tuner and verification settings (JSON, units in
 * field names).
 */

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsopt/cgm.hpp"
#include "tsopt/objective.hpp"
#include "tsopt/power_system.hpp"

namespace tsopt::app {

inline constexpr int kScenarioSchemaVersion = 1;

struct ObjectiveSettings {
  std::optional<double> t0;  ///< defaults to the integrator window
  std::optional<double> tf;
  std::vector<int> generators;  ///< empty: all machines
  std::string speed_units = "rad_per_s";  ///< "rad_per_s" or "pu"
};

struct Bound {
  double lower = 0.0;
  double upper = 0.0;
};

struct TunerSettings {
  double rho = 0.5;
  double sigma = 1e-4;
  double epsilon = 1e-4;
  int max_iter = 100;
  int max_backtracks = 60;
  BetaRule beta_rule = BetaRule::cross;
  Bound ks{0.1, 50.0};
  Bound t1{0.01, 1.5};
  Bound t2{0.01, 0.2};
};

struct VerifySettings {
  double h = 1e-6;
  double tolerance = 1e-3;
  double threshold = 1e-6;
  double t_begin = 0.2;
  double t_end = 10.0;
};

struct Scenario {
  std::filesystem::path source;  ///< file the scenario was read from (empty for in-memory)
  std::string name;
  std::filesystem::path network_case;
  NetworkCase net;  ///< case with exciter overrides applied
  std::optional<FaultScenario> fault;
  PssMap pss;
  IntegratorConfig integrator;
  ObjectiveSettings objective;
  TunerSettings tuner;
  VerifySettings verify;
  std::filesystem::path output_dir;
  nlohmann::json document;  ///< parsed input, used to write derived scenarios
};

/// Parses scenario text; relative paths resolve against base_dir.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

/// Machine ids, bound ordering, lambda0 inside bounds, event grid alignment.
void validate_scenario(const Scenario& scenario);

PowerSystemModel build_model(const Scenario& scenario);
ObjectiveConfig objective_config(const Scenario& scenario, const PowerSystemModel& ps);
CgmConfig cgm_config(const Scenario& scenario, const PowerSystemModel& ps);
FdComparisonOptions fd_options(const Scenario& scenario);

/// "G2.Ks" style names of the lambda entries.
std::vector<std::string> lambda_names(const StateLayout& layout);

/// Same scenario with the PSS settings replaced by lambda (T3 = T1, T4 = T2).
nlohmann::json with_parameters(const Scenario& scenario, const StateLayout& layout,
                               const Vector& lambda);

/// Copy of the scenario with PSS settings taken from lambda.
Scenario retuned(const Scenario& scenario, const StateLayout& layout, const Vector& lambda);

}  // namespace tsopt::app
