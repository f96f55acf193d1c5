#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenario.hpp"

namespace tsopt::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumerical = 2,
  kExitCheckFailed = 3,
};

/// Maps an exception to an exit code and a one-line JSON error record.
int report_error(const std::exception& e, std::ostream& err);

/// max |s - s(tf)| over [0.5, 5] s versus [5, 10] s.
struct Envelope {
  std::string signal;
  double early = 0.0;
  double late = 0.0;
  bool decaying() const { return late < early; }
};

struct EnvelopeWindows {
  double early_begin = 0.5;
  double early_end = 5.0;
  double late_begin = 5.0;
  double late_end = 10.0;
};

Envelope envelope(const std::string& name, const std::vector<double>& times,
                  const std::vector<double>& signal, const EnvelopeWindows& windows = {});

struct SimulationSummary {
  double objective = 0.0;
  std::vector<std::pair<std::string, double>> peaks;  ///< peak |delta_k1|
  std::vector<Envelope> envelopes;
  bool decaying = false;  ///< every relative angle decays
};

/// Relative angles delta_k1 = delta_k - delta_1 against the first machine in the case.
std::vector<std::pair<std::string, std::vector<double>>> relative_angles(const PowerSystemModel& ps,
                                                                         const Trajectory& traj);

SimulationSummary summarize(const PowerSystemModel& ps, const Trajectory& traj,
                            const ObjectiveConfig& objective);
nlohmann::json to_json(const SimulationSummary& s);

struct SimulateOutcome {
  Trajectory trajectory;
  SimulationSummary summary;
  std::filesystem::path output_dir;
};

SimulateOutcome run_simulate(const Scenario& scenario,
                             const std::optional<std::filesystem::path>& output_dir = std::nullopt);

using ModelHook = std::function<void(PowerSystemModel&)>;

struct VerifyOptions {
  std::optional<double> h;
  std::optional<double> tolerance;
  std::optional<std::filesystem::path> output_dir;
  ModelHook hook;  ///< applied to the built model (test fixtures)
};

struct VerifyRow {
  std::string parameter;
  SensitivityCheck check;
  bool pass = false;
};

struct VerifyOutcome {
  std::vector<VerifyRow> rows;
  double tolerance = 0.0;
  double h = 0.0;
  bool pass = false;
  std::filesystem::path output_dir;
};

VerifyOutcome run_verify(const Scenario& scenario, const VerifyOptions& options = {});

struct TuneOptions {
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> max_iter;
  std::optional<Vector> lambda0;  ///< warm start instead of the scenario's PSS settings
};

struct TuneOutcome {
  TuningResult result;
  Vector lambda0;
  std::vector<std::string> names;
  double j_before = 0.0;
  double j_after = 0.0;
  SimulationSummary before;
  SimulationSummary after;
  std::filesystem::path output_dir;
};

TuneOutcome run_tune(const Scenario& scenario, const TuneOptions& options = {});

/// J of a scenario at the given parameters (no artifacts).
double evaluate_scenario(const Scenario& scenario, const std::optional<Vector>& lambda = std::nullopt);

struct BatchEntry {
  std::string command;  ///< simulate | verify-sens | tune
  std::filesystem::path scenario;
};

/// Lines "<command> <scenario path>"; blank lines and '#' comments are skipped.
/// Relative paths resolve against the list file's directory.
std::vector<BatchEntry> load_batch_list(const std::filesystem::path& path);

struct BatchResult {
  BatchEntry entry;
  int exit_code = 0;
  std::string message;
};

std::vector<BatchResult> run_batch(const std::vector<BatchEntry>& entries, unsigned jobs);

}  // namespace tsopt::app
