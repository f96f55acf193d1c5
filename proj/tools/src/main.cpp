#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "tsopt/errors.hpp"

using namespace tsopt;
using namespace tsopt::app;
using nlohmann::json;

namespace {

std::optional<std::filesystem::path> maybe_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

int cmd_simulate(const std::string& path, const std::string& out_dir) {
  const Scenario s = load_scenario(path);
  const SimulateOutcome r = run_simulate(s, maybe_path(out_dir));
  json summary = to_json(r.summary);
  summary["scenario"] = s.name;
  summary["output_dir"] = r.output_dir.string();
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& path, const std::string& out_dir, std::optional<double> h,
               std::optional<double> tol) {
  const Scenario s = load_scenario(path);
  VerifyOptions options;
  options.h = h;
  options.tolerance = tol;
  options.output_dir = maybe_path(out_dir);
  const VerifyOutcome r = run_verify(s, options);
  std::cout << "parameter      max_rel_error  max_abs_fd     compared  status\n";
  for (const VerifyRow& row : r.rows) {
    std::printf("%-14s %-14.3e %-14.3e %-9zu %s\n", row.parameter.c_str(), row.check.max_rel_error,
                row.check.max_abs_fd, row.check.compared, row.pass ? "ok" : "FAIL");
  }
  std::printf("h = %g, tolerance = %g: %s\n", r.h, r.tolerance, r.pass ? "PASS" : "FAIL");
  return r.pass ? kExitOk : kExitCheckFailed;
}

int cmd_tune(const std::string& path, const std::string& out_dir, std::optional<int> max_iter) {
  const Scenario s = load_scenario(path);
  TuneOptions options;
  options.output_dir = maybe_path(out_dir);
  options.max_iter = max_iter;
  const TuneOutcome r = run_tune(s, options);
  json out;
  out["scenario"] = s.name;
  out["status"] = status_name(r.result.status);
  out["iterations"] = static_cast<int>(r.result.iterates.size()) - 1;
  out["J_before"] = r.j_before;
  out["J_after"] = r.j_after;
  json lambda = json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) lambda[r.names[i]] = r.result.lambda_star[static_cast<Index>(i)];
  out["lambda_star"] = lambda;
  out["decaying_after"] = r.after.decaying;
  out["output_dir"] = r.output_dir.string();
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_batch(const std::string& list, unsigned jobs) {
  const std::vector<BatchEntry> entries = load_batch_list(list);
  const std::vector<BatchResult> results = run_batch(entries, jobs);
  int code = kExitOk;
  for (const BatchResult& r : results) {
    std::cout << r.entry.command << ' ' << r.entry.scenario.string() << ": "
              << (r.exit_code == 0 ? std::string("ok") : "exit " + std::to_string(r.exit_code) + " (" + r.message + ")")
              << '\n';
    code = std::max(code, r.exit_code);
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid DAE power-system simulator with trajectory sensitivities and PSS tuning"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir;
  std::optional<double> h;
  std::optional<double> tolerance;
  std::optional<int> max_iter;
  std::string list;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  CLI::App* sim = app.add_subcommand("simulate", "Simulate a scenario; write trajectory, junction and summary files");
  sim->add_option("scenario", scenario, "Scenario file")->required();
  sim->add_option("-o,--output-dir", out_dir, "Override the scenario output directory");

  CLI::App* ver = app.add_subcommand("verify-sens", "Compare propagated sensitivities with finite differences");
  ver->add_option("scenario", scenario, "Scenario file")->required();
  ver->add_option("-o,--output-dir", out_dir, "Override the scenario output directory");
  ver->add_option("--fd-h", h, "Central-difference perturbation h");
  ver->add_option("--tolerance", tolerance, "Maximum relative error");

  CLI::App* tun = app.add_subcommand("tune", "Tune PSS parameters by conjugate gradients");
  tun->add_option("scenario", scenario, "Scenario file")->required();
  tun->add_option("-o,--output-dir", out_dir, "Override the scenario output directory");
  tun->add_option("--max-iter", max_iter, "Override tuner.max_iter");

  CLI::App* bat = app.add_subcommand("batch", "Run '<command> <scenario>' lines in parallel");
  bat->add_option("list", list, "Batch list file")->required();
  bat->add_option("-j,--jobs", jobs, "Parallel workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(scenario, out_dir);
    if (*ver) return cmd_verify(scenario, out_dir, h, tolerance);
    if (*tun) return cmd_tune(scenario, out_dir, max_iter);
    if (*bat) return cmd_batch(list, jobs);
  } catch (const std::exception& e) {
    return report_error(e, std::cerr);
  }
  return kExitOk;
}
