#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "tsopt/csv.hpp"
#include "tsopt/errors.hpp"

namespace tsopt::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const StructuralError*>(&e)) return "structural";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const PowerFlowError*>(&e)) return "power_flow";
  if (dynamic_cast<const InitializationError*>(&e)) return "initialization";
  if (dynamic_cast<const JunctionError*>(&e)) return "junction";
  if (dynamic_cast<const StepError*>(&e)) return "step";
  if (dynamic_cast<const SensitivityError*>(&e)) return "sensitivity";
  if (dynamic_cast<const ObjectiveError*>(&e)) return "objective";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  return "internal";
}

fs::path prepare_output(const Scenario& s, const std::optional<fs::path>& override_dir) {
  const fs::path dir = override_dir.value_or(s.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_trajectory(const fs::path& path, const PowerSystemModel& ps, const Trajectory& traj) {
  write_trajectory_csv(path.string(), ps.model, traj, relative_angles(ps, traj));
}

json lambda_json(const std::vector<std::string>& names, const Vector& lambda) {
  json out = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = lambda[static_cast<Index>(i)];
  return out;
}

}  // namespace

int report_error(const std::exception& e, std::ostream& err) {
  const int code = dynamic_cast<const ValidationError*>(&e) ? kExitValidation : kExitNumerical;
  json record{{"error", {{"kind", error_kind(e)}, {"message", e.what()}, {"exit_code", code}}}};
  err << record.dump() << '\n';
  return code;
}

Envelope envelope(const std::string& name, const std::vector<double>& times,
                  const std::vector<double>& signal, const EnvelopeWindows& w) {
  Envelope env;
  env.signal = name;
  if (signal.empty()) return env;
  const double final_value = signal.back();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double dev = std::abs(signal[k] - final_value);
    if (times[k] >= w.early_begin && times[k] <= w.early_end) env.early = std::max(env.early, dev);
    if (times[k] >= w.late_begin && times[k] <= w.late_end) env.late = std::max(env.late, dev);
  }
  return env;
}

std::vector<std::pair<std::string, std::vector<double>>> relative_angles(const PowerSystemModel& ps,
                                                                         const Trajectory& traj) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  const int ref = ps.net.generators.front().id;
  for (const GeneratorParams& g : ps.net.generators) {
    if (g.id == ref) continue;
    out.emplace_back("delta_" + std::to_string(g.id) + std::to_string(ref),
                     relative_angle(traj, ps.layout, g.id, ref));
  }
  return out;
}

SimulationSummary summarize(const PowerSystemModel& ps, const Trajectory& traj,
                            const ObjectiveConfig& objective) {
  SimulationSummary s;
  s.objective = integrate_objective(traj, objective);
  s.decaying = true;
  for (const auto& [name, values] : relative_angles(ps, traj)) {
    double peak = 0.0;
    for (double v : values) peak = std::max(peak, std::abs(v));
    s.peaks.emplace_back(name, peak);
    s.envelopes.push_back(envelope(name, traj.times, values));
    s.decaying = s.decaying && s.envelopes.back().decaying();
  }
  return s;
}

json to_json(const SimulationSummary& s) {
  json out;
  out["J"] = s.objective;
  json peaks = json::object();
  for (const auto& [name, v] : s.peaks) peaks[name] = v;
  out["peak_abs_rad"] = peaks;
  json env = json::object();
  for (const Envelope& e : s.envelopes) {
    env[e.signal] = {{"early_rad", e.early}, {"late_rad", e.late}, {"decaying", e.decaying()}};
  }
  out["envelope"] = env;
  out["decaying"] = s.decaying;
  return out;
}

SimulateOutcome run_simulate(const Scenario& s, const std::optional<fs::path>& output_dir) {
  PowerSystemModel ps = build_model(s);
  SimulateOutcome out;
  out.trajectory = simulate(ps.model, ps.op.x0.values(), ps.schedule, s.integrator, ps.op.y0);
  out.summary = summarize(ps, out.trajectory, objective_config(s, ps));
  out.output_dir = prepare_output(s, output_dir);
  write_trajectory(out.output_dir / "trajectory.csv", ps, out.trajectory);
  write_junctions_csv((out.output_dir / "junctions.csv").string(), ps.model, out.trajectory);
  json summary = to_json(out.summary);
  summary["scenario"] = s.name;
  write_json(out.output_dir / "summary.json", summary);
  return out;
}

VerifyOutcome run_verify(const Scenario& scenario, const VerifyOptions& options) {
  Scenario s = scenario;
  if (options.h) s.verify.h = *options.h;
  if (options.tolerance) s.verify.tolerance = *options.tolerance;
  PowerSystemModel ps = build_model(s);
  if (ps.layout.dims.p == 0) throw ConfigError("verify-sens needs at least one PSS-equipped machine");
  if (options.hook) options.hook(ps);

  VerifyOutcome out;
  out.h = s.verify.h;
  out.tolerance = s.verify.tolerance;
  const ColumnSet columns = lambda_columns(ps.layout.dims);
  const std::vector<Index> rows = ps.layout.speed_rows();
  const std::vector<SensitivityCheck> checks = compare_with_fd(
      ps.model, ps.schedule, s.integrator, ps.op.x0.values(), columns, rows, fd_options(s), ps.op.y0);
  const std::vector<std::string> names = lambda_names(ps.layout);
  out.pass = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    VerifyRow row{names[i], checks[i], checks[i].max_rel_error <= out.tolerance};
    out.pass = out.pass && row.pass;
    out.rows.push_back(row);
  }

  out.output_dir = prepare_output(s, options.output_dir);
  SimulationWithSensitivity run = simulate_with_sensitivities(ps.model, ps.op.x0.values(), ps.schedule,
                                                              s.integrator, columns, ps.op.y0);
  std::vector<SensitivityChannel> channels;
  for (const MachineLayout& m : ps.layout.machines) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      channels.push_back(SensitivityChannel{
          "d_omega" + std::to_string(m.generator_id) + "/d_" + names[i], m.omega, columns[i]});
    }
  }
  write_sensitivity_csv((out.output_dir / "sensitivity.csv").string(), run.sensitivity, channels);

  CsvWriter report((out.output_dir / "verify_report.csv").string(), "tsopt-verify", 1,
                   {"parameter", "max_rel_error", "max_abs_fd", "compared", "pass"});
  for (const VerifyRow& r : out.rows) {
    report.cell(r.parameter)
        .cell(r.check.max_rel_error)
        .cell(r.check.max_abs_fd)
        .cell(static_cast<long long>(r.check.compared))
        .cell(static_cast<long long>(r.pass ? 1 : 0));
    report.end_row();
  }
  return out;
}

double evaluate_scenario(const Scenario& s, const std::optional<Vector>& lambda) {
  PowerSystemModel ps = build_model(s);
  const Vector x0 = lambda ? ps.x0_with(*lambda) : ps.op.x0.values();
  const Trajectory traj = simulate(ps.model, x0, ps.schedule, s.integrator, ps.op.y0);
  return integrate_objective(traj, objective_config(s, ps));
}

TuneOutcome run_tune(const Scenario& scenario, const TuneOptions& options) {
  Scenario s = scenario;
  if (options.max_iter) s.tuner.max_iter = *options.max_iter;
  PowerSystemModel ps = build_model(s);
  if (ps.layout.dims.p == 0) throw ConfigError("tune needs at least one PSS-equipped machine");

  const ObjectiveConfig oc = objective_config(s, ps);
  const CgmConfig cgm = cgm_config(s, ps);
  TrajectoryObjective objective(ps.model, ps.schedule, s.integrator, ps.op.x0.values(), oc, ps.op.y0);

  TuneOutcome out;
  out.names = lambda_names(ps.layout);
  out.lambda0 = options.lambda0.value_or(ps.lambda0());
  out.output_dir = prepare_output(s, options.output_dir);
  out.result = tune(objective, out.lambda0, cgm);
  out.j_before = out.result.iterates.front().value;
  out.j_after = out.result.value;

  const Trajectory before = objective.simulate_at(out.lambda0);
  const Trajectory after = objective.simulate_at(out.result.lambda_star);
  out.before = summarize(ps, before, oc);
  out.after = summarize(ps, after, oc);

  write_tuning_trace((out.output_dir / "tuning_trace.csv").string(), out.result, out.names);
  write_trajectory(out.output_dir / "trajectory_before.csv", ps, before);
  write_trajectory(out.output_dir / "trajectory_after.csv", ps, after);
  write_json(out.output_dir / "scenario_optimized.json",
             with_parameters(s, ps.layout, out.result.lambda_star));

  json summary;
  summary["scenario"] = s.name;
  summary["status"] = status_name(out.result.status);
  summary["iterations"] = static_cast<int>(out.result.iterates.size()) - 1;
  summary["objective_evaluations"] = out.result.evaluations;
  summary["lambda0"] = lambda_json(out.names, out.lambda0);
  summary["lambda_star"] = lambda_json(out.names, out.result.lambda_star);
  summary["J_before"] = out.j_before;
  summary["J_after"] = out.j_after;
  summary["final_grad_norm"] = out.result.iterates.back().grad_norm;
  summary["before"] = to_json(out.before);
  summary["after"] = to_json(out.after);
  write_json(out.output_dir / "tune_summary.json", summary);
  return out;
}

std::vector<BatchEntry> load_batch_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("batch list not found: " + path.string());
  std::vector<BatchEntry> entries;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    BatchEntry e;
    std::string scenario;
    if (!(fields >> e.command)) continue;
    if (!(fields >> scenario)) {
      throw ConfigError("batch list line " + std::to_string(number) + " needs '<command> <scenario>'");
    }
    if (e.command != "simulate" && e.command != "verify-sens" && e.command != "tune") {
      throw ConfigError("batch list line " + std::to_string(number) + ": unknown command '" + e.command + "'");
    }
    const fs::path p = scenario;
    e.scenario = p.is_absolute() ? p : path.parent_path() / p;
    entries.push_back(e);
  }
  return entries;
}

std::vector<BatchResult> run_batch(const std::vector<BatchEntry>& entries, unsigned jobs) {
  std::vector<BatchResult> results(entries.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> guard(lock);
        if (next >= entries.size()) return;
        i = next++;
      }
      BatchResult& r = results[i];
      r.entry = entries[i];
      std::ostringstream err;
      try {
        const Scenario s = load_scenario(r.entry.scenario);
        if (r.entry.command == "simulate") {
          run_simulate(s);
        } else if (r.entry.command == "verify-sens") {
          if (!run_verify(s).pass) {
            r.exit_code = kExitCheckFailed;
            r.message = "sensitivity check failed";
          }
        } else {
          run_tune(s);
        }
      } catch (const std::exception& e) {
        r.exit_code = report_error(e, err);
        r.message = e.what();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, entries.size()))));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return results;
}

}  // namespace tsopt::app
