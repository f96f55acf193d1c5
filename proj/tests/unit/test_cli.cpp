#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "scenario.hpp"
#include "tsopt/errors.hpp"

using namespace tsopt;
using namespace tsopt::app;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = TSOPT_SCENARIO_DIR;

json scenario_doc(const std::string& name) {
  std::ifstream in(kScenarios / (name + ".json"));
  return json::parse(in);
}

Scenario from_doc(const json& doc) { return parse_scenario(doc.dump(), kScenarios); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tsopt_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

double worst_ratio(const SimulationSummary& s) {
  double r = 0.0;
  for (const Envelope& e : s.envelopes) r = std::max(r, e.late / e.early);
  return r;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("scenario parsing errors") {
    CHECK_THROWS_AS(parse_scenario("{", kScenarios), ConfigError);
    json doc = scenario_doc("nominal");
    doc["typo"] = 1;
    CHECK_THROWS_AS(from_doc(doc), ConfigError);
    CHECK_THROWS_AS(load_scenario(kScenarios / "missing.json"), IoError);

    doc = scenario_doc("nominal");
    doc["network_case"] = "nowhere.json";
    CHECK_THROWS_AS(from_doc(doc), IoError);
  }

  TEST_CASE("scenario validation") {
    json doc = scenario_doc("nominal");
    doc["fault"]["t_off_s"] = 0.105;
    CHECK_THROWS_AS(validate_scenario(from_doc(doc)), ValidationError);

    doc = scenario_doc("nominal");
    doc["machines"][1]["pss"]["ks_pu"] = 60.0;
    CHECK_THROWS_AS(validate_scenario(from_doc(doc)), ValidationError);

    doc = scenario_doc("nominal");
    doc["machines"][1]["generator"] = 7;
    CHECK_THROWS_AS(validate_scenario(from_doc(doc)), ValidationError);

    doc = scenario_doc("nominal");
    doc["verify"]["h"] = 0.0;
    CHECK_THROWS_AS(validate_scenario(from_doc(doc)), ValidationError);

    doc = scenario_doc("nominal");
    doc["objective"]["speed_units"] = "furlongs";
    CHECK_THROWS_AS(validate_scenario(from_doc(doc)), ValidationError);

    CHECK_NOTHROW(validate_scenario(from_doc(scenario_doc("nominal"))));
  }

  TEST_CASE("scenario defaults and derived settings") {
    const Scenario s = load_scenario(kScenarios / "nominal.json");
    CHECK(s.name == "nominal");
    CHECK(s.fault->bus == 9);
    CHECK_FALSE(s.net.generator(1).exciter.has_value());
    CHECK(s.output_dir.is_absolute());
    const PowerSystemModel ps = build_model(s);
    const ObjectiveConfig c = objective_config(s, ps);
    CHECK(c.speed_rows.size() == 3);
    CHECK(c.weight == doctest::Approx(std::pow(2.0 * M_PI * 60.0, 2)));
    CHECK(lambda_names(ps.layout)[3] == "G3.Ks");

    const Vector lambda = (Vector(6) << 9.0, 0.3, 0.06, 8.0, 0.2, 0.07).finished();
    const Scenario r = retuned(s, ps.layout, lambda);
    CHECK(r.pss.at(2).ks == 9.0);
    CHECK(r.pss.at(2).t3 == 0.3);
    CHECK(r.pss.at(3).t4 == 0.07);
  }

  TEST_CASE("simulate writes deterministic artifacts") {
    const Scenario s = load_scenario(kScenarios / "nominal.json");
    const fs::path a = scratch("sim_a"), b = scratch("sim_b");
    const SimulateOutcome out = run_simulate(s, a);
    run_simulate(s, b);
    CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    CHECK(first_line(a / "trajectory.csv") == "# tsopt-trajectory v1");
    CHECK(first_line(a / "junctions.csv") == "# tsopt-junctions v1");
    const json summary = json::parse(slurp(a / "summary.json"));
    CHECK(summary["J"].get<double>() == doctest::Approx(out.summary.objective));
    CHECK(summary["envelope"].contains("delta_31"));
    CHECK(out.summary.objective > 0.0);
    CHECK(out.summary.envelopes.size() == 2);
    CHECK(out.summary.envelopes[0].signal == "delta_21");
  }

  TEST_CASE("a stabilizer improves the envelope decay") {
    const SimulateOutcome with = run_simulate(load_scenario(kScenarios / "nominal.json"), scratch("env_pss"));
    const SimulateOutcome without = run_simulate(load_scenario(kScenarios / "nopss.json"), scratch("env_nopss"));
    CHECK(worst_ratio(without.summary) > worst_ratio(with.summary));
    CHECK(without.summary.objective > with.summary.objective);
  }

  TEST_CASE("verify-sens passes on the analytic model and fails on a corrupted one") {
    const Scenario s = load_scenario(kScenarios / "nominal.json");
    VerifyOptions options;
    options.output_dir = scratch("verify_ok");
    const VerifyOutcome ok = run_verify(s, options);
    CHECK(ok.pass);
    CHECK(ok.rows.size() == 6);
    CHECK(first_line(*options.output_dir / "verify_report.csv") == "# tsopt-verify v1");

    options.output_dir = scratch("verify_bad");
    options.hook = [](PowerSystemModel& ps) {
      const HybridModel original = ps.model;
      const Index n = original.dims().n;
      ps.model.set_differential([original, n](const Vector& x, const Vector& y) -> Vector { return original.eval_f(x, y).head(n); },
                                [original, n](const Vector& x, const Vector& y) {
                                  const JacobianBlocks j = original.jacobian_f(x, y);
                                  return JacobianBlocks{1.1 * j.dx.topRows(n), j.dy.topRows(n)};
                                });
    };
    const VerifyOutcome bad = run_verify(s, options);
    CHECK_FALSE(bad.pass);
  }

  TEST_CASE("tune improves the objective and writes a loadable scenario") {
    const Scenario s = load_scenario(kScenarios / "nominal.json");
    TuneOptions options;
    options.output_dir = scratch("tune");
    options.max_iter = 3;
    const TuneOutcome out = run_tune(s, options);
    CHECK(out.j_after <= out.j_before);
    CHECK(out.result.iterates.size() == 4);
    for (const char* f : {"tuning_trace.csv", "trajectory_before.csv", "trajectory_after.csv",
                          "scenario_optimized.json", "tune_summary.json"}) {
      CHECK(fs::exists(*options.output_dir / f));
    }
    const Scenario reloaded = load_scenario(*options.output_dir / "scenario_optimized.json");
    CHECK(evaluate_scenario(reloaded) == doctest::Approx(out.j_after).epsilon(1e-9));
  }

  TEST_CASE("batch runs each entry and reports failures") {
    const fs::path dir = scratch("batch");
    {
      std::ofstream list(dir / "list.txt");
      list << "# smoke\n\nsimulate " << (kScenarios / "steady.json").string() << "\n";
      list << "simulate " << (dir / "absent.json").string() << "\n";
    }
    const std::vector<BatchEntry> entries = load_batch_list(dir / "list.txt");
    REQUIRE(entries.size() == 2);
    const std::vector<BatchResult> results = run_batch(entries, 2);
    CHECK(results[0].exit_code == kExitOk);
    CHECK(results[1].exit_code == kExitValidation);

    {
      std::ofstream list(dir / "bad.txt");
      list << "explode " << (kScenarios / "steady.json").string() << "\n";
    }
    CHECK_THROWS_AS(load_batch_list(dir / "bad.txt"), ValidationError);
  }

  TEST_CASE("error records and exit codes") {
    std::ostringstream err;
    CHECK(report_error(ConfigError("bad key"), err) == kExitValidation);
    json rec = json::parse(err.str());
    CHECK(rec["error"]["kind"] == "config");
    CHECK(rec["error"]["exit_code"] == 1);

    err.str("");
    CHECK(report_error(ObjectiveError("nan"), err) == kExitNumerical);
    rec = json::parse(err.str());
    CHECK(rec["error"]["kind"] == "objective");
  }
}
