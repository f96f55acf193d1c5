#include "tsopt/network.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tsopt/errors.hpp"

namespace tsopt {

using nlohmann::json;

void ExciterParams::validate() const {
  if (!(ka > 0.0) || !(ta > 0.0)) throw ConfigError("exciter requires K_a > 0 and T_a > 0");
}

void PssParams::validate() const {
  if (!(tw > 0.0) || !(t1 > 0.0) || !(t2 > 0.0) || !(t3 > 0.0) || !(t4 > 0.0)) {
    throw ConfigError("PSS time constants must be positive");
  }
}

void GeneratorParams::validate() const {
  const std::string who = "generator " + std::to_string(id);
  if (!(h > 0.0)) throw ConfigError(who + ": inertia H must be positive");
  if (!(xd_prime > 0.0) || xd < xd_prime) throw ConfigError(who + ": requires X_d >= X'_d > 0");
  if (!(xq > 0.0)) throw ConfigError(who + ": X_q must be positive");
  if (!(tdo_prime > 0.0)) throw ConfigError(who + ": T'_do must be positive");
  if (d < 0.0) throw ConfigError(who + ": damping must be non-negative");
  if (exciter) exciter->validate();
}

Index NetworkCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<Index>(i);
  }
  throw ConfigError("unknown bus id " + std::to_string(id));
}

Index NetworkCase::generator_index(int id) const {
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].id == id) return static_cast<Index>(i);
  }
  throw ConfigError("unknown generator id " + std::to_string(id));
}

const GeneratorParams& NetworkCase::generator(int id) const {
  return generators[static_cast<std::size_t>(generator_index(id))];
}

void NetworkCase::validate() const {
  if (buses.empty()) throw ConfigError("case has no buses");
  if (!(base_mva > 0.0) || !(frequency_hz > 0.0)) throw ConfigError("invalid base MVA or frequency");
  std::set<int> ids;
  int slack = 0;
  for (const Bus& b : buses) {
    if (!ids.insert(b.id).second) throw ConfigError("duplicate bus id " + std::to_string(b.id));
    if (b.type == BusType::slack) ++slack;
    if (b.type != BusType::pq && !(b.v_set > 0.0)) {
      throw ConfigError("bus " + std::to_string(b.id) + " needs a positive voltage setpoint");
    }
  }
  if (slack != 1) throw ConfigError("case must have exactly one slack bus");

  // connectivity by union-find over branches
  std::vector<Index> parent(buses.size());
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
    return i;
  };
  for (const Branch& br : branches) {
    const Index a = bus_index(br.from);
    const Index b = bus_index(br.to);
    if (a == b) throw ConfigError("branch connects bus " + std::to_string(br.from) + " to itself");
    parent[static_cast<std::size_t>(find(a))] = find(b);
  }
  const Index root = find(0);
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (find(static_cast<Index>(i)) != root) throw ConfigError("network graph is not connected");
  }

  std::set<int> gen_ids;
  std::set<int> gen_buses;
  for (const GeneratorParams& g : generators) {
    if (!gen_ids.insert(g.id).second) throw ConfigError("duplicate generator id " + std::to_string(g.id));
    if (!gen_buses.insert(g.bus).second) {
      throw ConfigError("more than one generator at bus " + std::to_string(g.bus));
    }
    const Bus& b = buses[static_cast<std::size_t>(bus_index(g.bus))];
    if (b.type == BusType::pq) {
      throw ConfigError("generator " + std::to_string(g.id) + " sits on a PQ bus");
    }
    g.validate();
  }
  for (const Bus& b : buses) {
    if (b.type != BusType::pq && !gen_buses.contains(b.id)) {
      throw ConfigError("voltage-controlled bus " + std::to_string(b.id) + " has no generator");
    }
  }
}

namespace {

BusType parse_bus_type(const std::string& s) {
  if (s == "slack") return BusType::slack;
  if (s == "pv" || s == "PV") return BusType::pv;
  if (s == "pq" || s == "PQ") return BusType::pq;
  throw ConfigError("unknown bus type '" + s + "'");
}

}  // namespace

NetworkCase parse_case(const std::string& json_text) {
  NetworkCase net;
  try {
    const json j = json::parse(json_text);
    net.schema_version = j.value("schema_version", 1);
    if (net.schema_version != 1) {
      throw ConfigError("unsupported case schema version " + std::to_string(net.schema_version));
    }
    net.name = j.value("name", std::string{});
    net.base_mva = j.value("base_mva", 100.0);
    net.frequency_hz = j.value("frequency_hz", 60.0);
    for (const json& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.type = parse_bus_type(b.at("type").get<std::string>());
      bus.p_load = b.value("p_load_pu", 0.0);
      bus.q_load = b.value("q_load_pu", 0.0);
      bus.g_shunt = b.value("g_shunt_pu", 0.0);
      bus.b_shunt = b.value("b_shunt_pu", 0.0);
      bus.v_set = b.value("v_set_pu", 1.0);
      bus.p_gen = b.value("p_gen_pu", 0.0);
      net.buses.push_back(bus);
    }
    for (const json& b : j.at("branches")) {
      Branch br;
      br.from = b.at("from").get<int>();
      br.to = b.at("to").get<int>();
      br.r = b.value("r_pu", 0.0);
      br.x = b.value("x_pu", 0.0);
      br.b = b.value("b_pu", 0.0);
      net.branches.push_back(br);
    }
    for (const json& g : j.at("generators")) {
      GeneratorParams gen;
      gen.id = g.at("id").get<int>();
      gen.bus = g.at("bus").get<int>();
      gen.h = g.at("h_s").get<double>();
      gen.d = g.value("d_pu", 0.0);
      gen.xd = g.at("xd_pu").get<double>();
      gen.xd_prime = g.at("xd_prime_pu").get<double>();
      gen.xq = g.at("xq_pu").get<double>();
      gen.tdo_prime = g.at("tdo_prime_s").get<double>();
      if (g.contains("exciter") && !g.at("exciter").is_null()) {
        const json& e = g.at("exciter");
        gen.exciter = ExciterParams{e.at("ka_pu").get<double>(), e.at("ta_s").get<double>(), 0.0};
      }
      net.generators.push_back(gen);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed network case: ") + e.what());
  }
  net.validate();
  return net;
}

NetworkCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network case file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

ComplexVector PowerFlowResult::voltages() const {
  ComplexVector v(vm.size());
  for (Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
  return v;
}

ComplexMatrix build_ybus(const NetworkCase& net) {
  const Index nb = static_cast<Index>(net.buses.size());
  ComplexMatrix y = ComplexMatrix::Zero(nb, nb);
  for (const Branch& br : net.branches) {
    const Complex z(br.r, br.x);
    if (std::abs(z) == 0.0) {
      throw ConfigError("zero-impedance branch " + std::to_string(br.from) + "-" +
                        std::to_string(br.to));
    }
    const Complex ys = 1.0 / z;
    const Complex ysh(0.0, 0.5 * br.b);
    const Index a = net.bus_index(br.from);
    const Index b = net.bus_index(br.to);
    y(a, a) += ys + ysh;
    y(b, b) += ys + ysh;
    y(a, b) -= ys;
    y(b, a) -= ys;
  }
  for (Index i = 0; i < nb; ++i) {
    const Bus& bus = net.buses[static_cast<std::size_t>(i)];
    y(i, i) += Complex(bus.g_shunt, bus.b_shunt);
  }
  return y;
}

ComplexMatrix build_ybus(const NetworkCase& net, const PowerFlowResult& flow) {
  ComplexMatrix y = build_ybus(net);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& bus = net.buses[i];
    const double v = flow.vm[static_cast<Index>(i)];
    // S = V conj(Y V) = |V|^2 conj(Y)  =>  Y = conj(S) / |V|^2
    y(static_cast<Index>(i), static_cast<Index>(i)) += Complex(bus.p_load, -bus.q_load) / (v * v);
  }
  return y;
}

void add_shunt(ComplexMatrix& ybus, Index bus, Complex admittance) { ybus(bus, bus) += admittance; }

namespace {

ComplexVector scheduled_injections(const NetworkCase& net) {
  ComplexVector s(static_cast<Index>(net.buses.size()));
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    const double pg = b.type == BusType::pv ? b.p_gen : 0.0;
    s[static_cast<Index>(i)] = Complex(pg - b.p_load, -b.q_load);
  }
  return s;
}

}  // namespace

ComplexVector power_mismatch(const NetworkCase& net, const ComplexVector& v) {
  const ComplexMatrix y = build_ybus(net);
  const ComplexVector current = y * v;
  ComplexVector mis = scheduled_injections(net);
  for (Index i = 0; i < v.size(); ++i) mis[i] -= v[i] * std::conj(current[i]);
  return mis;
}

PowerFlowResult solve_power_flow(const NetworkCase& net, const PowerFlowOptions& options) {
  net.validate();
  const Index nb = static_cast<Index>(net.buses.size());
  const ComplexMatrix ybus = build_ybus(net);
  const ComplexVector s_spec = scheduled_injections(net);

  std::vector<Index> pvpq;
  std::vector<Index> pq;
  for (Index i = 0; i < nb; ++i) {
    const BusType t = net.buses[static_cast<std::size_t>(i)].type;
    if (t != BusType::slack) pvpq.push_back(i);
    if (t == BusType::pq) pq.push_back(i);
  }
  const Index npvpq = static_cast<Index>(pvpq.size());
  const Index npq = static_cast<Index>(pq.size());

  Vector vm = Vector::Ones(nb);
  Vector va = Vector::Zero(nb);
  for (Index i = 0; i < nb; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    if (b.type != BusType::pq) vm[i] = b.v_set;
  }

  auto complex_voltage = [&]() {
    ComplexVector v(nb);
    for (Index i = 0; i < nb; ++i) v[i] = std::polar(vm[i], va[i]);
    return v;
  };
  auto mismatch = [&](const ComplexVector& v) {
    const ComplexVector current = ybus * v;
    Vector f(npvpq + npq);
    for (Index k = 0; k < npvpq; ++k) {
      const Index i = pvpq[static_cast<std::size_t>(k)];
      f[k] = (v[i] * std::conj(current[i]) - s_spec[i]).real();
    }
    for (Index k = 0; k < npq; ++k) {
      const Index i = pq[static_cast<std::size_t>(k)];
      f[npvpq + k] = (v[i] * std::conj(current[i]) - s_spec[i]).imag();
    }
    return f;
  };
  auto newton_update = [&](const ComplexVector& v, const Vector& f) {
    // dS/dVa and dS/dVm in polar form
    const ComplexVector current = ybus * v;
    ComplexVector vnorm(nb);
    for (Index i = 0; i < nb; ++i) vnorm[i] = v[i] / std::abs(v[i]);
    ComplexMatrix ds_dva(nb, nb);
    ComplexMatrix ds_dvm(nb, nb);
    for (Index i = 0; i < nb; ++i) {
      for (Index k = 0; k < nb; ++k) {
        const Complex yv = ybus(i, k) * v[k];
        ds_dva(i, k) = Complex(0.0, 1.0) * v[i] * std::conj((i == k ? current[i] : Complex{}) - yv);
        ds_dvm(i, k) = v[i] * std::conj(ybus(i, k) * vnorm[k]) +
                       (i == k ? std::conj(current[i]) * vnorm[i] : Complex{});
      }
    }
    Matrix jac(npvpq + npq, npvpq + npq);
    for (Index r = 0; r < npvpq; ++r) {
      const Index i = pvpq[static_cast<std::size_t>(r)];
      for (Index c = 0; c < npvpq; ++c) jac(r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).real();
      for (Index c = 0; c < npq; ++c) jac(r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).real();
    }
    for (Index r = 0; r < npq; ++r) {
      const Index i = pq[static_cast<std::size_t>(r)];
      for (Index c = 0; c < npvpq; ++c) {
        jac(npvpq + r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).imag();
      }
      for (Index c = 0; c < npq; ++c) {
        jac(npvpq + r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).imag();
      }
    }
    Eigen::PartialPivLU<Matrix> lu(jac);
    if (!(lu.rcond() > 1e-14)) throw PowerFlowError("singular power-flow Jacobian");
    const Vector dx = lu.solve(-f);
    for (Index k = 0; k < npvpq; ++k) va[pvpq[static_cast<std::size_t>(k)]] += dx[k];
    for (Index k = 0; k < npq; ++k) vm[pq[static_cast<std::size_t>(k)]] += dx[npvpq + k];
  };

  PowerFlowResult out;
  ComplexVector v = complex_voltage();
  Vector f = mismatch(v);
  for (int it = 0;; ++it) {
    const double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(norm) || norm > 1e8) {
      throw PowerFlowError("power flow diverged after " + std::to_string(it) + " iterations");
    }
    if (norm <= options.tol) {
      if (it > 0) {
        // polish: one more Newton correction from a converged point
        const Vector vm_save = vm;
        const Vector va_save = va;
        newton_update(v, f);
        const ComplexVector vp = complex_voltage();
        const Vector fp = mismatch(vp);
        if (fp.cwiseAbs().maxCoeff() <= norm) {
          v = vp;
          f = fp;
        } else {
          vm = vm_save;
          va = va_save;
        }
      }
      out.iterations = it;
      break;
    }
    if (it >= options.max_iter) {
      throw PowerFlowError("power flow did not converge in " + std::to_string(options.max_iter) +
                           " iterations (mismatch " + std::to_string(norm) + ")");
    }
    newton_update(v, f);
    if ((vm.array() <= 0.0).any()) throw PowerFlowError("power flow produced a non-positive voltage");
    v = complex_voltage();
    f = mismatch(v);
  }

  out.vm = vm;
  out.va = va;
  out.mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  const ComplexVector current = ybus * v;
  out.p_inj.resize(nb);
  out.q_inj.resize(nb);
  for (Index i = 0; i < nb; ++i) {
    const Complex s = v[i] * std::conj(current[i]);
    out.p_inj[i] = s.real();
    out.q_inj[i] = s.imag();
  }
  return out;
}

}  // namespace tsopt
