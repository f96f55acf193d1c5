#include "tsopt/power_system.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "tsopt/errors.hpp"
#include "tsopt/machines.hpp"

namespace tsopt {

void FaultScenario::validate() const {
  if (!(t_on >= 0.0) || !(t_off > t_on)) throw ConfigError("fault requires t_off > t_on >= 0");
  if (std::abs(admittance) == 0.0) throw ConfigError("fault admittance must be nonzero");
}

const char* parameter_name(PssParameter p) {
  switch (p) {
    case PssParameter::ks:
      return "Ks";
    case PssParameter::t1:
      return "T1";
    case PssParameter::t2:
      return "T2";
  }
  return "?";
}

const MachineLayout& StateLayout::machine(int generator_id) const {
  for (const MachineLayout& m : machines) {
    if (m.generator_id == generator_id) return m;
  }
  throw ConfigError("unknown generator id " + std::to_string(generator_id));
}

std::vector<Index> StateLayout::speed_rows() const {
  std::vector<Index> rows;
  for (const MachineLayout& m : machines) rows.push_back(m.omega);
  return rows;
}

std::vector<std::string> StateLayout::state_names() const {
  std::vector<std::string> names(static_cast<std::size_t>(dims.augmented()));
  for (const MachineLayout& m : machines) {
    const std::string g = "G" + std::to_string(m.generator_id) + ".";
    auto put = [&](std::optional<Index> i, const char* what) {
      if (i) names[static_cast<std::size_t>(*i)] = g + what;
    };
    put(m.delta, "delta");
    put(m.omega, "omega");
    put(m.eq, "eq_prime");
    put(m.efd, "efd");
    put(m.pss_w, "pss_xw");
    put(m.pss_1, "pss_x1");
    put(m.pss_2, "pss_x2");
    put(m.ks, "Ks");
    put(m.t1, "T1");
    put(m.t2, "T2");
  }
  return names;
}

std::vector<std::string> StateLayout::algebraic_names(const NetworkCase& net) const {
  std::vector<std::string> names(static_cast<std::size_t>(dims.m));
  for (Index b = 0; b < bus_count; ++b) {
    const std::string bus = "B" + std::to_string(net.buses[static_cast<std::size_t>(b)].id) + ".";
    names[static_cast<std::size_t>(vre(b))] = bus + "v_re";
    names[static_cast<std::size_t>(vim(b))] = bus + "v_im";
  }
  for (const MachineLayout& m : machines) {
    const std::string g = "G" + std::to_string(m.generator_id) + ".";
    names[static_cast<std::size_t>(m.id)] = g + "i_d";
    names[static_cast<std::size_t>(m.iq)] = g + "i_q";
  }
  return names;
}

std::vector<std::pair<int, PssParameter>> StateLayout::lambda_entries() const {
  std::vector<std::pair<int, PssParameter>> out;
  for (const MachineLayout& m : machines) {
    if (!m.has_pss()) continue;
    out.emplace_back(m.generator_id, PssParameter::ks);
    out.emplace_back(m.generator_id, PssParameter::t1);
    out.emplace_back(m.generator_id, PssParameter::t2);
  }
  return out;
}

StateLayout make_layout(const NetworkCase& net, const PssMap& pss) {
  for (const auto& [id, params] : pss) {
    const GeneratorParams& g = net.generator(id);
    if (!g.exciter) {
      throw ConfigError("PSS on generator " + std::to_string(id) + " requires a fast exciter");
    }
    params.validate();
  }
  StateLayout layout;
  layout.bus_count = static_cast<Index>(net.buses.size());
  Index next = 0;
  for (const GeneratorParams& g : net.generators) {
    MachineLayout m;
    m.generator_id = g.id;
    m.bus = net.bus_index(g.bus);
    m.delta = next++;
    m.omega = next++;
    m.eq = next++;
    if (g.exciter) m.efd = next++;
    if (pss.contains(g.id)) {
      m.pss_w = next++;
      m.pss_1 = next++;
      m.pss_2 = next++;
    }
    layout.machines.push_back(m);
  }
  layout.dims.n = next;
  layout.dims.l = 0;
  for (MachineLayout& m : layout.machines) {
    if (!m.pss_w) continue;
    m.ks = next++;
    m.t1 = next++;
    m.t2 = next++;
  }
  layout.dims.p = next - layout.dims.n;
  Index alg = 2 * layout.bus_count;
  for (MachineLayout& m : layout.machines) {
    m.id = alg++;
    m.iq = alg++;
  }
  layout.dims.m = alg;
  return layout;
}

namespace {

// Immutable data shared by the model evaluators.
struct ModelData {
  StateLayout layout;
  std::vector<GeneratorParams> gens;
  std::vector<MachineSetpoint> setpoints;
  std::vector<double> tw;  ///< washout per machine (0 without PSS)
  double omega_s = 0.0;
  Matrix y_healthy;  ///< real 2nb x 2nb block form of the bus admittance matrix
  Matrix y_faulted;
};

Matrix real_block(const ComplexMatrix& y) {
  const Index nb = y.rows();
  Matrix out(2 * nb, 2 * nb);
  for (Index i = 0; i < nb; ++i) {
    for (Index k = 0; k < nb; ++k) {
      const double g = y(i, k).real();
      const double b = y(i, k).imag();
      out(2 * i, 2 * k) = g;
      out(2 * i, 2 * k + 1) = -b;
      out(2 * i + 1, 2 * k) = b;
      out(2 * i + 1, 2 * k + 1) = g;
    }
  }
  return out;
}

PssParams pss_from_state(const MachineLayout& m, double tw, const Vector& x) {
  return PssParams::tied(x[*m.ks], tw, x[*m.t1], x[*m.t2]);
}

PssState pss_state(const MachineLayout& m, const Vector& x) {
  return PssState{x[*m.pss_w], x[*m.pss_1], x[*m.pss_2]};
}

Vector differential(const ModelData& d, const Vector& x, const Vector& y) {
  Vector out(d.layout.dims.n);
  for (std::size_t i = 0; i < d.gens.size(); ++i) {
    const GeneratorParams& g = d.gens[i];
    const MachineLayout& m = d.layout.machines[i];
    const MachineSetpoint& sp = d.setpoints[i];
    const double omega = x[m.omega];
    const double eq = x[m.eq];
    const double id = y[m.id];
    const double iq = y[m.iq];
    const double pe = eq * iq + (g.xq - g.xd_prime) * id * iq;
    out[m.delta] = d.omega_s * omega;
    out[m.omega] = (sp.pm - pe - g.d * omega) / (2.0 * g.h);
    const double efd = m.efd ? x[*m.efd] : sp.efd;
    out[m.eq] = (-eq - (g.xd - g.xd_prime) * id + efd) / g.tdo_prime;
    if (m.efd) {
      double vs = 0.0;
      if (m.has_pss()) {
        const PssOutput p = pss_dynamics(pss_from_state(m, d.tw[i], x), omega, pss_state(m, x));
        out[*m.pss_w] = p.dxw;
        out[*m.pss_1] = p.dx1;
        out[*m.pss_2] = p.dx2;
        vs = p.vs;
      }
      const double vt = std::hypot(y[StateLayout::vre(m.bus)], y[StateLayout::vim(m.bus)]);
      const ExciterParams& e = *g.exciter;
      out[*m.efd] = (-efd + e.ka * (sp.vref - vt + vs)) / e.ta;
    }
  }
  return out;
}

JacobianBlocks differential_jacobian(const ModelData& d, const Vector& x, const Vector& y) {
  const Dimensions& dims = d.layout.dims;
  JacobianBlocks jac{Matrix::Zero(dims.n, dims.augmented()), Matrix::Zero(dims.n, dims.m)};
  for (std::size_t i = 0; i < d.gens.size(); ++i) {
    const GeneratorParams& g = d.gens[i];
    const MachineLayout& m = d.layout.machines[i];
    const double eq = x[m.eq];
    const double id = y[m.id];
    const double iq = y[m.iq];
    const double two_h = 2.0 * g.h;

    jac.dx(m.delta, m.omega) = d.omega_s;

    jac.dx(m.omega, m.omega) = -g.d / two_h;
    jac.dx(m.omega, m.eq) = -iq / two_h;
    jac.dy(m.omega, m.id) = -(g.xq - g.xd_prime) * iq / two_h;
    jac.dy(m.omega, m.iq) = -(eq + (g.xq - g.xd_prime) * id) / two_h;

    jac.dx(m.eq, m.eq) = -1.0 / g.tdo_prime;
    jac.dy(m.eq, m.id) = -(g.xd - g.xd_prime) / g.tdo_prime;
    if (!m.efd) continue;
    jac.dx(m.eq, *m.efd) = 1.0 / g.tdo_prime;

    const ExciterParams& e = *g.exciter;
    const Index row = *m.efd;
    jac.dx(row, row) = -1.0 / e.ta;
    const double vr = y[StateLayout::vre(m.bus)];
    const double vi = y[StateLayout::vim(m.bus)];
    const double vt = std::hypot(vr, vi);
    jac.dy(row, StateLayout::vre(m.bus)) = -e.ka * vr / (vt * e.ta);
    jac.dy(row, StateLayout::vim(m.bus)) = -e.ka * vi / (vt * e.ta);

    if (!m.has_pss()) continue;
    const PssPartials p = pss_partials(pss_from_state(m, d.tw[i], x), x[m.omega], pss_state(m, x));
    // map cascade inputs onto augmented-state columns; T3/T4 are tied to T1/T2
    auto scatter = [&](Index r, const PssGradient& grad, double scale) {
      jac.dx(r, m.omega) += scale * grad[kPssOmega];
      jac.dx(r, *m.pss_w) += scale * grad[kPssXw];
      jac.dx(r, *m.pss_1) += scale * grad[kPssX1];
      jac.dx(r, *m.pss_2) += scale * grad[kPssX2];
      jac.dx(r, *m.ks) += scale * grad[kPssKs];
      jac.dx(r, *m.t1) += scale * (grad[kPssT1] + grad[kPssT3]);
      jac.dx(r, *m.t2) += scale * (grad[kPssT2] + grad[kPssT4]);
    };
    scatter(*m.pss_w, p.dxw, 1.0);
    scatter(*m.pss_1, p.dx1, 1.0);
    scatter(*m.pss_2, p.dx2, 1.0);
    scatter(row, p.vs, e.ka / e.ta);
  }
  return jac;
}

Vector algebraic(const ModelData& d, const Matrix& ybus, const Vector& x, const Vector& y) {
  const Index nv = 2 * d.layout.bus_count;
  Vector r(d.layout.dims.m);
  r.head(nv) = ybus * y.head(nv);
  for (std::size_t i = 0; i < d.gens.size(); ++i) {
    const GeneratorParams& g = d.gens[i];
    const MachineLayout& m = d.layout.machines[i];
    const double s = std::sin(x[m.delta]);
    const double c = std::cos(x[m.delta]);
    const double id = y[m.id];
    const double iq = y[m.iq];
    const double vr = y[StateLayout::vre(m.bus)];
    const double vi = y[StateLayout::vim(m.bus)];
    // machine current injected into the network
    r[StateLayout::vre(m.bus)] -= id * s + iq * c;
    r[StateLayout::vim(m.bus)] -= -id * c + iq * s;
    // stator: V_d = X_q I_q, E'_q = V_q + X'_d I_d
    r[m.id] = vr * s - vi * c - g.xq * iq;
    r[m.iq] = x[m.eq] - (vr * c + vi * s) - g.xd_prime * id;
  }
  return r;
}

JacobianBlocks algebraic_jacobian(const ModelData& d, const Matrix& ybus, const Vector& x,
                                  const Vector& y) {
  const Dimensions& dims = d.layout.dims;
  const Index nv = 2 * d.layout.bus_count;
  JacobianBlocks jac{Matrix::Zero(dims.m, dims.augmented()), Matrix::Zero(dims.m, dims.m)};
  jac.dy.topLeftCorner(nv, nv) = ybus;
  for (std::size_t i = 0; i < d.gens.size(); ++i) {
    const GeneratorParams& g = d.gens[i];
    const MachineLayout& m = d.layout.machines[i];
    const double s = std::sin(x[m.delta]);
    const double c = std::cos(x[m.delta]);
    const double id = y[m.id];
    const double iq = y[m.iq];
    const Index re = StateLayout::vre(m.bus);
    const Index im = StateLayout::vim(m.bus);
    const double vr = y[re];
    const double vi = y[im];

    jac.dy(re, m.id) = -s;
    jac.dy(re, m.iq) = -c;
    jac.dx(re, m.delta) = -(id * c - iq * s);
    jac.dy(im, m.id) = c;
    jac.dy(im, m.iq) = -s;
    jac.dx(im, m.delta) = -(id * s + iq * c);

    jac.dy(m.id, re) = s;
    jac.dy(m.id, im) = -c;
    jac.dy(m.id, m.iq) = -g.xq;
    jac.dx(m.id, m.delta) = vr * c + vi * s;

    jac.dy(m.iq, re) = -c;
    jac.dy(m.iq, im) = -s;
    jac.dy(m.iq, m.id) = -g.xd_prime;
    jac.dx(m.iq, m.eq) = 1.0;
    jac.dx(m.iq, m.delta) = vr * s - vi * c;
  }
  return jac;
}

}  // namespace

OperatingPoint init_dynamic_states(const NetworkCase& net, const PowerFlowResult& flow,
                                   const StateLayout& layout, const PssMap& pss) {
  const Dimensions& dims = layout.dims;
  Vector x = Vector::Zero(dims.augmented());
  AlgebraicState y = AlgebraicState::Zero(dims.m);
  OperatingPoint op;

  for (Index b = 0; b < layout.bus_count; ++b) {
    y[StateLayout::vre(b)] = flow.vm[b] * std::cos(flow.va[b]);
    y[StateLayout::vim(b)] = flow.vm[b] * std::sin(flow.va[b]);
  }
  const Complex j(0.0, 1.0);
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    const GeneratorParams& g = net.generators[i];
    const MachineLayout& m = layout.machines[i];
    const Bus& bus = net.buses[static_cast<std::size_t>(m.bus)];
    const Complex v = std::polar(flow.vm[m.bus], flow.va[m.bus]);
    // loads sit in the admittance matrix, so the machine supplies net injection + load
    const Complex s_gen(flow.p_inj[m.bus] + bus.p_load, flow.q_inj[m.bus] + bus.q_load);
    const Complex i_gen = std::conj(s_gen / v);
    const double delta = std::arg(v + j * g.xq * i_gen);
    const Complex to_machine = std::polar(1.0, -(delta - std::numbers::pi / 2.0));
    const Complex idq = i_gen * to_machine;
    const Complex vdq = v * to_machine;
    const double eq = vdq.imag() + g.xd_prime * idq.real();
    const double efd = eq + (g.xd - g.xd_prime) * idq.real();
    if (!(efd > 0.0)) {
      throw InitializationError("generator " + std::to_string(g.id) +
                                    " needs a non-positive field voltage at the operating point",
                                efd);
    }
    MachineSetpoint sp;
    sp.pm = vdq.real() * idq.real() + vdq.imag() * idq.imag();
    sp.efd = efd;
    if (g.exciter) sp.vref = std::abs(v) + efd / g.exciter->ka;
    op.setpoints.push_back(sp);

    x[m.delta] = delta;
    x[m.omega] = 0.0;
    x[m.eq] = eq;
    if (m.efd) x[*m.efd] = efd;
    if (m.has_pss()) {
      const PssParams& p = pss.at(g.id);
      x[*m.ks] = p.ks;
      x[*m.t1] = p.t1;
      x[*m.t2] = p.t2;
    }
    y[m.id] = idq.real();
    y[m.iq] = idq.imag();
  }
  op.x0 = AugmentedState(dims, std::move(x));
  op.y0 = std::move(y);
  return op;
}

Vector PowerSystemModel::lambda0() const { return op.x0.lambda(); }

Vector PowerSystemModel::x0_with(const Vector& lambda) const {
  if (lambda.size() != layout.dims.p) throw StructuralError("parameter vector has wrong length");
  Vector x = op.x0.values();
  x.tail(layout.dims.p) = lambda;
  return x;
}

PowerSystemModel build_hybrid_model(const NetworkCase& net, const std::optional<FaultScenario>& fault,
                                    const PssMap& pss, const PowerFlowOptions& pf_options) {
  net.validate();
  for (const auto& [id, p] : pss) {
    if (p.t3 != p.t1 || p.t4 != p.t2) {
      throw ConfigError("PSS on generator " + std::to_string(id) +
                        " must have T3 = T1 and T4 = T2 for tuning");
    }
  }
  Index fault_bus = -1;
  if (fault) {
    fault->validate();
    fault_bus = net.bus_index(fault->bus);
  }

  PowerFlowResult flow = solve_power_flow(net, pf_options);
  StateLayout layout = make_layout(net, pss);
  OperatingPoint op = init_dynamic_states(net, flow, layout, pss);

  auto data = std::make_shared<ModelData>();
  data->layout = layout;
  data->gens = net.generators;
  data->setpoints = op.setpoints;
  for (const GeneratorParams& g : net.generators) {
    data->tw.push_back(pss.contains(g.id) ? pss.at(g.id).tw : 0.0);
  }
  data->omega_s = 2.0 * std::numbers::pi * net.frequency_hz;
  const ComplexMatrix ybus = build_ybus(net, flow);
  data->y_healthy = real_block(ybus);
  if (fault) {
    ComplexMatrix faulted = ybus;
    add_shunt(faulted, fault_bus, fault->admittance);
    data->y_faulted = real_block(faulted);
  }

  HybridModel model(layout.dims);
  model.set_differential(
      [data](const Vector& x, const Vector& y) { return differential(*data, x, y); },
      [data](const Vector& x, const Vector& y) { return differential_jacobian(*data, x, y); });
  model.add_mode(kBaseMode,
                 AlgebraicMode{
                     [data](const Vector& x, const Vector& y) {
                       return algebraic(*data, data->y_healthy, x, y);
                     },
                     [data](const Vector& x, const Vector& y) {
                       return algebraic_jacobian(*data, data->y_healthy, x, y);
                     }});
  EventSchedule schedule;
  if (fault) {
    model.add_mode(kFaultedMode,
                   AlgebraicMode{
                       [data](const Vector& x, const Vector& y) {
                         return algebraic(*data, data->y_faulted, x, y);
                       },
                       [data](const Vector& x, const Vector& y) {
                         return algebraic_jacobian(*data, data->y_faulted, x, y);
                       }});
    const std::string where = "bus " + std::to_string(fault->bus);
    schedule.events.push_back(make_switching_event(fault->t_on, kBaseMode, kFaultedMode, "fault on " + where));
    schedule.events.push_back(make_switching_event(fault->t_off, kFaultedMode, kBaseMode, "fault cleared " + where));
  }
  model.set_state_names(layout.state_names());
  model.set_algebraic_names(layout.algebraic_names(net));

  // consistent y0 and equilibrium check
  op.y0 = solve_initial_algebraic(model, op.x0.values(), kBaseMode, op.y0, 0.0, 1e-10, 20);
  const Vector f0 = model.eval_f(op.x0.values(), op.y0);
  const double drift = f0.cwiseAbs().maxCoeff();
  if (drift > 1e-8) {
    throw InitializationError("initial state is not an equilibrium (max |f| = " +
                                  std::to_string(drift) + ")",
                              drift);
  }

  return PowerSystemModel{net, std::move(flow), std::move(layout), std::move(op), pss, fault,
                          std::move(model), std::move(schedule)};
}

std::vector<double> relative_angle(const Trajectory& traj, const StateLayout& layout, int generator,
                                   int reference) {
  const Index a = layout.machine(generator).delta;
  const Index b = layout.machine(reference).delta;
  std::vector<double> out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) out[k] = traj.states[k][a] - traj.states[k][b];
  return out;
}

}  // namespace tsopt
