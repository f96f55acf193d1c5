#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "tsopt/errors.hpp"

namespace tsopt::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> keys;
  for (const char* k : allowed) keys.insert(k);
  for (const auto& item : obj.items()) {
    if (!keys.contains(item.key())) throw ConfigError("unknown field '" + item.key() + "' in " + where);
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

Bound parse_bound(const json& value, const std::string& name) {
  if (!value.is_array() || value.size() != 2) throw ConfigError("bound " + name + " must be [lower, upper]");
  return Bound{value[0].get<double>(), value[1].get<double>()};
}

PssParams parse_pss(const json& p) {
  check_keys(p, "pss", {"ks_pu", "tw_s", "t1_s", "t2_s", "t3_s", "t4_s"});
  PssParams out;
  out.ks = p.at("ks_pu").get<double>();
  out.tw = get_or(p, "tw_s", 10.0);
  out.t1 = p.at("t1_s").get<double>();
  out.t2 = p.at("t2_s").get<double>();
  out.t3 = get_or(p, "t3_s", out.t1);
  out.t4 = get_or(p, "t4_s", out.t2);
  return out;
}

Scenario parse_document(const json& doc, const fs::path& base_dir) {
  check_keys(doc, "scenario",
             {"schema_version", "name", "network_case", "fault", "machines", "integrator", "objective",
              "tuner", "verify", "output_dir"});
  const int version = get_or(doc, "schema_version", 0);
  if (version != kScenarioSchemaVersion) {
    throw ConfigError("unsupported scenario schema_version " + std::to_string(version));
  }
  Scenario s;
  s.document = doc;
  s.name = get_or<std::string>(doc, "name", "scenario");

  const fs::path case_path = doc.at("network_case").get<std::string>();
  s.network_case = case_path.is_absolute() ? case_path : base_dir / case_path;
  s.net = load_case_file(s.network_case.string());

  if (doc.contains("fault") && !doc.at("fault").is_null()) {
    const json& f = doc.at("fault");
    check_keys(f, "fault", {"bus", "t_on_s", "t_off_s", "admittance_g_pu", "admittance_b_pu"});
    FaultScenario fault;
    fault.bus = f.at("bus").get<int>();
    fault.t_on = get_or(f, "t_on_s", 0.0);
    fault.t_off = f.at("t_off_s").get<double>();
    fault.admittance = Complex(get_or(f, "admittance_g_pu", 1e4), get_or(f, "admittance_b_pu", 0.0));
    s.fault = fault;
  }

  if (doc.contains("machines")) {
    for (const json& m : doc.at("machines")) {
      check_keys(m, "machines[]", {"generator", "exciter", "pss"});
      const int id = m.at("generator").get<int>();
      auto gen = s.net.generators.begin() + s.net.generator_index(id);
      if (m.contains("exciter")) {
        const json& e = m.at("exciter");
        if (e.is_null()) {
          gen->exciter.reset();
        } else {
          check_keys(e, "exciter", {"ka_pu", "ta_s"});
          gen->exciter = ExciterParams{e.at("ka_pu").get<double>(), e.at("ta_s").get<double>(), 0.0};
        }
      }
      if (m.contains("pss") && !m.at("pss").is_null()) {
        if (s.pss.contains(id)) throw ConfigError("generator " + std::to_string(id) + " listed twice");
        s.pss[id] = parse_pss(m.at("pss"));
      }
    }
  }

  if (doc.contains("integrator")) {
    const json& i = doc.at("integrator");
    check_keys(i, "integrator", {"dt_s", "t0_s", "tf_s", "newton_tol", "newton_max_iter"});
    s.integrator.dt = get_or(i, "dt_s", s.integrator.dt);
    s.integrator.t0 = get_or(i, "t0_s", s.integrator.t0);
    s.integrator.tf = get_or(i, "tf_s", s.integrator.tf);
    s.integrator.newton_tol = get_or(i, "newton_tol", s.integrator.newton_tol);
    s.integrator.newton_max_iter = get_or(i, "newton_max_iter", s.integrator.newton_max_iter);
  }

  if (doc.contains("objective")) {
    const json& o = doc.at("objective");
    check_keys(o, "objective", {"t0_s", "tf_s", "generators", "speed_units"});
    if (o.contains("t0_s")) s.objective.t0 = o.at("t0_s").get<double>();
    if (o.contains("tf_s")) s.objective.tf = o.at("tf_s").get<double>();
    if (o.contains("generators")) {
      const json& g = o.at("generators");
      if (g.is_string()) {
        const std::string which = g.get<std::string>();
        if (which == "pss") {
          for (const auto& [id, p] : s.pss) s.objective.generators.push_back(id);
        } else if (which != "all") {
          throw ConfigError("objective.generators must be \"all\", \"pss\" or a list of ids");
        }
      } else {
        s.objective.generators = g.get<std::vector<int>>();
      }
    }
    s.objective.speed_units = get_or<std::string>(o, "speed_units", s.objective.speed_units);
  }

  if (doc.contains("tuner")) {
    const json& t = doc.at("tuner");
    check_keys(t, "tuner", {"rho", "sigma", "epsilon", "max_iter", "max_backtracks", "beta_rule", "bounds"});
    TunerSettings& ts = s.tuner;
    ts.rho = get_or(t, "rho", ts.rho);
    ts.sigma = get_or(t, "sigma", ts.sigma);
    ts.epsilon = get_or(t, "epsilon", ts.epsilon);
    ts.max_iter = get_or(t, "max_iter", ts.max_iter);
    ts.max_backtracks = get_or(t, "max_backtracks", ts.max_backtracks);
    if (t.contains("beta_rule")) ts.beta_rule = parse_beta_rule(t.at("beta_rule").get<std::string>());
    if (t.contains("bounds")) {
      const json& b = t.at("bounds");
      check_keys(b, "tuner.bounds", {"ks_pu", "t1_s", "t2_s"});
      if (b.contains("ks_pu")) ts.ks = parse_bound(b.at("ks_pu"), "ks_pu");
      if (b.contains("t1_s")) ts.t1 = parse_bound(b.at("t1_s"), "t1_s");
      if (b.contains("t2_s")) ts.t2 = parse_bound(b.at("t2_s"), "t2_s");
    }
  }

  if (doc.contains("verify")) {
    const json& v = doc.at("verify");
    check_keys(v, "verify", {"h", "tolerance", "threshold", "window_s"});
    s.verify.h = get_or(v, "h", s.verify.h);
    s.verify.tolerance = get_or(v, "tolerance", s.verify.tolerance);
    s.verify.threshold = get_or(v, "threshold", s.verify.threshold);
    if (v.contains("window_s")) {
      const Bound w = parse_bound(v.at("window_s"), "window_s");
      s.verify.t_begin = w.lower;
      s.verify.t_end = w.upper;
    }
  }

  const fs::path out = get_or<std::string>(doc, "output_dir", "out/" + s.name);
  s.output_dir = out.is_absolute() ? out : base_dir / out;
  return s;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    return parse_document(doc, base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scenario file not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario s = parse_scenario(buf.str(), path.parent_path());
  s.source = path;
  return s;
}

void validate_scenario(const Scenario& s) {
  s.net.validate();
  s.integrator.validate();
  if (s.fault) {
    s.fault->validate();
    s.net.bus_index(s.fault->bus);
  }
  for (const auto& [id, p] : s.pss) {
    const GeneratorParams& g = s.net.generator(id);
    if (!g.exciter) throw ConfigError("PSS on generator " + std::to_string(id) + " requires a fast exciter");
    p.validate();
    if (p.t3 != p.t1 || p.t4 != p.t2) {
      throw ConfigError("PSS on generator " + std::to_string(id) + " must have t3_s = t1_s and t4_s = t2_s");
    }
  }
  for (int id : s.objective.generators) s.net.generator(id);
  if (s.objective.speed_units != "rad_per_s" && s.objective.speed_units != "pu") {
    throw ConfigError("objective.speed_units must be \"rad_per_s\" or \"pu\"");
  }
  const double t0 = s.objective.t0.value_or(s.integrator.t0);
  const double tf = s.objective.tf.value_or(s.integrator.tf);
  if (!(tf > t0) || t0 < s.integrator.t0 || tf > s.integrator.tf) {
    throw ConfigError("objective window must lie inside the simulation window");
  }
  if (s.fault && !(tf > s.fault->t_off)) throw ConfigError("objective window must end after fault clearing");

  const TunerSettings& t = s.tuner;
  for (const auto& [name, b] : {std::pair{"ks_pu", t.ks}, std::pair{"t1_s", t.t1}, std::pair{"t2_s", t.t2}}) {
    if (!(b.lower < b.upper)) throw ConfigError(std::string("bound ") + name + " must have lower < upper");
  }
  if (!(t.t1.lower > 0.0) || !(t.t2.lower > 0.0)) throw ConfigError("time-constant bounds must be positive");
  for (const auto& [id, p] : s.pss) {
    auto inside = [](double v, const Bound& b) { return v >= b.lower && v <= b.upper; };
    if (!inside(p.ks, t.ks) || !inside(p.t1, t.t1) || !inside(p.t2, t.t2)) {
      throw ConfigError("initial PSS parameters of generator " + std::to_string(id) + " lie outside the bounds");
    }
  }
  if (!(s.verify.h > 0.0)) throw ConfigError("verify.h must be positive");
  if (!(s.verify.tolerance > 0.0)) throw ConfigError("verify.tolerance must be positive");
  if (!(s.verify.t_end > s.verify.t_begin)) throw ConfigError("verify.window_s must be increasing");

  // event grid alignment, mode chain
  HybridModel probe(Dimensions{1, 0, 0, 1});
  const AlgebraicMode stub{[](const Vector&, const Vector& y) { return Vector(y); },
                           [](const Vector& x, const Vector& y) {
                             return JacobianBlocks{Matrix::Zero(y.size(), x.size()),
                                                   Matrix::Identity(y.size(), y.size())};
                           }};
  probe.add_mode(kBaseMode, stub);
  probe.add_mode(kFaultedMode, stub);
  EventSchedule schedule;
  if (s.fault) {
    schedule.events.push_back(make_switching_event(s.fault->t_on, kBaseMode, kFaultedMode));
    schedule.events.push_back(make_switching_event(s.fault->t_off, kFaultedMode, kBaseMode));
  }
  validate_schedule(probe, schedule, s.integrator);
  CgmConfig c;
  c.rho = t.rho;
  c.sigma = t.sigma;
  c.epsilon = t.epsilon;
  c.max_iter = t.max_iter;
  c.max_backtracks = t.max_backtracks;
  c.validate(0);
}

PowerSystemModel build_model(const Scenario& s) {
  validate_scenario(s);
  return build_hybrid_model(s.net, s.fault, s.pss);
}

ObjectiveConfig objective_config(const Scenario& s, const PowerSystemModel& ps) {
  ObjectiveConfig c;
  c.t0 = s.objective.t0.value_or(s.integrator.t0);
  c.tf = s.objective.tf.value_or(s.integrator.tf);
  if (s.objective.generators.empty()) {
    c.speed_rows = ps.layout.speed_rows();
  } else {
    for (int id : s.objective.generators) c.speed_rows.push_back(ps.layout.machine(id).omega);
  }
  const double omega_s = 2.0 * std::numbers::pi * s.net.frequency_hz;
  c.weight = s.objective.speed_units == "rad_per_s" ? omega_s * omega_s : 1.0;
  return c;
}

CgmConfig cgm_config(const Scenario& s, const PowerSystemModel& ps) {
  const TunerSettings& t = s.tuner;
  CgmConfig c;
  c.rho = t.rho;
  c.sigma = t.sigma;
  c.epsilon = t.epsilon;
  c.max_iter = t.max_iter;
  c.max_backtracks = t.max_backtracks;
  c.beta_rule = t.beta_rule;
  const auto entries = ps.layout.lambda_entries();
  c.lower.resize(static_cast<Index>(entries.size()));
  c.upper.resize(static_cast<Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Bound& b = entries[i].second == PssParameter::ks   ? t.ks
                     : entries[i].second == PssParameter::t1 ? t.t1
                                                             : t.t2;
    c.lower[static_cast<Index>(i)] = b.lower;
    c.upper[static_cast<Index>(i)] = b.upper;
  }
  return c;
}

FdComparisonOptions fd_options(const Scenario& s) {
  FdComparisonOptions o;
  o.h = s.verify.h;
  o.threshold = s.verify.threshold;
  o.t_begin = s.verify.t_begin;
  o.t_end = s.verify.t_end;
  return o;
}

std::vector<std::string> lambda_names(const StateLayout& layout) {
  std::vector<std::string> names;
  for (const auto& [id, which] : layout.lambda_entries()) {
    names.push_back("G" + std::to_string(id) + "." + parameter_name(which));
  }
  return names;
}

json with_parameters(const Scenario& s, const StateLayout& layout, const Vector& lambda) {
  json doc = s.document;
  doc["network_case"] = fs::absolute(s.network_case).lexically_normal().string();
  doc["output_dir"] = fs::absolute(s.output_dir).lexically_normal().string();
  if (!doc.contains("machines")) doc["machines"] = json::array();
  const auto entries = layout.lambda_entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const int id = entries[i].first;
    json* machine = nullptr;
    for (json& m : doc["machines"]) {
      if (m.at("generator").get<int>() == id) machine = &m;
    }
    if (!machine) {
      doc["machines"].push_back(json{{"generator", id}});
      machine = &doc["machines"].back();
    }
    json& pss = (*machine)["pss"];
    const double v = lambda[static_cast<Index>(i)];
    switch (entries[i].second) {
      case PssParameter::ks:
        pss["ks_pu"] = v;
        break;
      case PssParameter::t1:
        pss["t1_s"] = v;
        pss["t3_s"] = v;
        break;
      case PssParameter::t2:
        pss["t2_s"] = v;
        pss["t4_s"] = v;
        break;
    }
  }
  return doc;
}

Scenario retuned(const Scenario& s, const StateLayout& layout, const Vector& lambda) {
  Scenario out = s;
  out.document = with_parameters(s, layout, lambda);
  const auto entries = layout.lambda_entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    PssParams& p = out.pss.at(entries[i].first);
    const double v = lambda[static_cast<Index>(i)];
    switch (entries[i].second) {
      case PssParameter::ks:
        p.ks = v;
        break;
      case PssParameter::t1:
        p.t1 = p.t3 = v;
        break;
      case PssParameter::t2:
        p.t2 = p.t4 = v;
        break;
    }
  }
  return out;
}

}  // namespace tsopt::app
