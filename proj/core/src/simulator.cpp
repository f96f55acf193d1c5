#include "tsopt/simulator.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "tsopt/csv.hpp"
#include "tsopt/errors.hpp"

namespace tsopt {

namespace {

constexpr double kSingularRcond = 1e-14;

double max_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Grid index of a time, or -1 when it is not on the grid.
long long grid_index(double t, const IntegratorConfig& cfg) {
  const double k = std::round((t - cfg.t0) / cfg.dt);
  const double on_grid = cfg.t0 + k * cfg.dt;
  if (std::abs(on_grid - t) > 1e-9 * std::max(1.0, std::abs(t))) return -1;
  return static_cast<long long>(k);
}

double grid_time(std::size_t k, const IntegratorConfig& cfg) {
  return cfg.t0 + static_cast<double>(k) * cfg.dt;
}

struct AlgebraicSolve {
  AlgebraicState y;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool singular = false;
};

AlgebraicSolve newton_algebraic(const HybridModel& model, const Vector& x, ModeId mode,
                                AlgebraicState y, double tol, int max_iter) {
  AlgebraicSolve out;
  if (model.dims().m == 0) {
    out.converged = true;
    out.y = std::move(y);
    return out;
  }
  Factorization lu;
  Vector r = model.eval_g(mode, x, y);
  for (int it = 0;; ++it) {
    out.residual = max_norm(r);
    if (!std::isfinite(out.residual)) break;
    if (out.residual <= tol) {
      if (lu.valid()) {
        // one extra correction with the last factorization
        Vector polished = y - lu.solve(r);
        Vector rp = model.eval_g(mode, x, polished);
        if (max_norm(rp) <= out.residual) {
          y = std::move(polished);
          r = std::move(rp);
          out.residual = max_norm(r);
        }
      }
      out.converged = true;
      break;
    }
    if (it >= max_iter) break;
    lu = Factorization(model.jacobian_g(mode, x, y).dy);
    if (lu.singular()) {
      out.singular = true;
      break;
    }
    y -= lu.solve(r);
    r = model.eval_g(mode, x, y);
    out.iterations = it + 1;
  }
  out.y = std::move(y);
  return out;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("integrator dt must be positive");
  if (!(tf > t0)) throw ConfigError("integrator tf must exceed t0");
  if (!(newton_tol > 0.0)) throw ConfigError("Newton tolerance must be positive");
  if (newton_max_iter < 1) throw ConfigError("Newton iteration limit must be at least 1");
  if (grid_index(tf, *this) < 0) throw ConfigError("tf - t0 is not a multiple of dt");
}

std::size_t IntegratorConfig::steps() const {
  return static_cast<std::size_t>(std::llround((tf - t0) / dt));
}

void validate_schedule(const HybridModel& model, const EventSchedule& schedule,
                       const IntegratorConfig& config) {
  config.validate();
  if (!model.has_mode(schedule.initial_mode)) {
    throw ConfigError("initial mode " + std::to_string(schedule.initial_mode) + " is not defined");
  }
  ModeId current = schedule.initial_mode;
  double last = -std::numeric_limits<double>::infinity();
  for (const EventSpec& ev : schedule.events) {
    const std::string name = ev.label.empty() ? std::string("event") : "event '" + ev.label + "'";
    if (!ev.time_triggered()) {
      throw ConfigError(name + " is state-triggered; only time-triggered events are supported");
    }
    const double t = ev.time();
    if (t < config.t0 || t > config.tf) throw ConfigError(name + " lies outside [t0, tf]");
    if (grid_index(t, config) < 0) throw ConfigError(name + " time is not on the integration grid");
    if (!(t > last)) throw ConfigError(name + " is not strictly after the previous event");
    if (ev.pre_mode != current) {
      throw ConfigError(name + " expects pre-mode " + std::to_string(ev.pre_mode) +
                        " but the active mode is " + std::to_string(current));
    }
    if (!model.has_mode(ev.post_mode)) {
      throw ConfigError(name + " post-mode " + std::to_string(ev.post_mode) + " is not defined");
    }
    if (ev.kind == EventKind::reset && (!ev.reset || !model.has_reset(*ev.reset))) {
      throw ConfigError(name + " references an unknown reset map");
    }
    last = t;
    current = ev.post_mode;
  }
}

Linearization linearize(const HybridModel& model, ModeId mode, const Vector& x,
                        const Vector& y) {
  return Linearization{mode, model.jacobian_f(x, y), model.jacobian_g(mode, x, y)};
}

Matrix trapezoidal_matrix(const Dimensions& dims, const Linearization& lin, double dt) {
  const Index n = dims.n;
  const Index m = dims.m;
  Matrix a(n + m, n + m);
  a.topLeftCorner(n, n) = Matrix::Identity(n, n) - 0.5 * dt * lin.f.dx.topLeftCorner(n, n);
  a.topRightCorner(n, m) = -0.5 * dt * lin.f.dy.topRows(n);
  a.bottomLeftCorner(m, n) = lin.g.dx.leftCols(n);
  a.bottomRightCorner(m, m) = lin.g.dy;
  return a;
}

Factorization::Factorization(const Matrix& a) : valid_(true) {
  if (a.rows() != a.cols()) throw StructuralError("factorization of a non-square matrix");
  if (a.rows() == 0) {
    rcond_ = 1.0;
    return;
  }
  if (!a.allFinite()) {
    singular_ = true;
    return;
  }
  lu_.compute(a);
  rcond_ = lu_.rcond();
  singular_ = !(rcond_ > kSingularRcond);
}

Matrix Factorization::solve(const Matrix& rhs) const {
  if (!valid_ || singular_) throw NumericalError("solve with an invalid or singular factorization");
  if (rhs.rows() == 0) return rhs;
  return lu_.solve(rhs);
}

AlgebraicState solve_initial_algebraic(const HybridModel& model, const Vector& x0, ModeId mode,
                                       const AlgebraicState& guess, double t0, double tol,
                                       int max_iter) {
  if (guess.size() != model.dims().m) throw StructuralError("algebraic guess has wrong size");
  AlgebraicSolve s = newton_algebraic(model, x0, mode, guess, tol, max_iter);
  if (s.singular) {
    throw InitializationError("singular algebraic Jacobian at t=" + std::to_string(t0),
                              s.residual);
  }
  if (!s.converged) {
    throw InitializationError("algebraic initialization did not converge (residual " +
                                  std::to_string(s.residual) + ")",
                              s.residual);
  }
  return s.y;
}

StepResult trapezoidal_step(const HybridModel& model, ModeId mode, const Vector& xk,
                            const AlgebraicState& yk, double tk, double dt,
                            const IntegratorConfig& config, StepWorkspace& ws) {
  const Dimensions& d = model.dims();
  const Index n = d.n;
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");

  const Vector fk = model.eval_f(xk, yk).head(n);
  Vector x1 = xk;
  AlgebraicState y1 = yk;
  const bool reuse = ws.ready && ws.end.mode == mode && ws.dt == dt && ws.lu.valid();

  auto residual = [&](const Vector& x, const AlgebraicState& y) {
    Vector r(n + d.m);
    r.head(n) = x.head(n) - xk.head(n) - 0.5 * dt * (fk + model.eval_f(x, y).head(n));
    r.tail(d.m) = model.eval_g(mode, x, y);
    return r;
  };
  auto apply = [&](const Vector& dz) {
    x1.head(n) += dz.head(n);
    y1 += dz.tail(d.m);
  };

  Factorization fresh;
  const Factorization* lu = nullptr;
  StepResult out;
  Vector r = residual(x1, y1);
  for (int it = 0;; ++it) {
    const double norm = max_norm(r);
    if (!std::isfinite(norm)) throw StepError("non-finite Newton residual", tk + dt, mode);
    if (norm <= config.newton_tol) break;
    if (it >= config.newton_max_iter) {
      throw StepError("Newton did not converge (residual " + std::to_string(norm) + ")", tk + dt,
                      mode);
    }
    if (it == 0 && reuse) {
      lu = &ws.lu;
    } else {
      fresh = Factorization(trapezoidal_matrix(d, linearize(model, mode, x1, y1), dt));
      lu = &fresh;
    }
    if (lu->singular()) throw StepError("singular Newton matrix", tk + dt, mode);
    apply(-lu->solve(r));
    r = residual(x1, y1);
    out.iterations = it + 1;
  }
  if (lu != nullptr) {
    // one extra chord correction drives the residual to rounding level
    const Vector x_save = x1;
    const AlgebraicState y_save = y1;
    apply(-lu->solve(r));
    Vector rp = residual(x1, y1);
    if (max_norm(rp) <= max_norm(r)) {
      r = std::move(rp);
    } else {
      x1 = x_save;
      y1 = y_save;
    }
  }
  out.residual = max_norm(r);

  ws.end = linearize(model, mode, x1, y1);
  ws.lu = Factorization(trapezoidal_matrix(d, ws.end, dt));
  ws.dt = dt;
  ws.ready = !ws.lu.singular();
  if (ws.lu.singular()) throw StepError("singular Newton matrix at converged point", tk + dt, mode);

  out.x = std::move(x1);
  out.y = std::move(y1);
  return out;
}

JunctionRecord switch_mode(const HybridModel& model, const EventSpec& event, const Vector& x,
                           const AlgebraicState& y_minus, double t_j,
                           const IntegratorConfig& config) {
  JunctionRecord rec;
  rec.t_j = t_j;
  rec.pre_mode = event.pre_mode;
  rec.post_mode = event.post_mode;
  rec.y_minus = y_minus;
  rec.f_minus = model.eval_f(x, y_minus);

  Vector x_plus = x;
  if (event.kind == EventKind::reset) {
    if (!event.reset) throw StructuralError("reset event without a reset map");
    rec.reset = true;
    rec.z_plus = model.apply_reset(*event.reset, x, y_minus);
    x_plus.segment(model.dims().n, model.dims().l) = rec.z_plus;
  }

  AlgebraicSolve s = newton_algebraic(model, x_plus, event.post_mode, y_minus, config.newton_tol,
                                      config.newton_max_iter);
  if (s.singular) throw JunctionError("singular post-event algebraic Jacobian", t_j, event.post_mode);
  if (!s.converged) {
    throw JunctionError("post-event algebraic solve did not converge (residual " +
                            std::to_string(s.residual) + ")",
                        t_j, event.post_mode);
  }
  rec.y_plus = std::move(s.y);
  rec.f_plus = model.eval_f(x_plus, rec.y_plus);
  return rec;
}

Trajectory simulate(const HybridModel& model, const Vector& x0, const EventSchedule& schedule,
                    const IntegratorConfig& config, const std::optional<AlgebraicState>& y_guess,
                    SimulationObserver* observer) {
  validate_schedule(model, schedule, config);
  const Dimensions& d = model.dims();
  if (x0.size() != d.augmented()) throw StructuralError("x0 has wrong dimension");

  ModeId mode = schedule.initial_mode;
  Vector x = x0;
  AlgebraicState y = solve_initial_algebraic(model, x, mode,
                                             y_guess.value_or(AlgebraicState::Zero(d.m)),
                                             config.t0, config.newton_tol,
                                             config.newton_max_iter);
  const std::size_t steps = config.steps();
  Trajectory traj;
  traj.times.reserve(steps + 1 + 2 * schedule.events.size());
  traj.states.reserve(traj.times.capacity());
  traj.algebraics.reserve(traj.times.capacity());
  traj.modes.reserve(traj.times.capacity());

  auto push = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.algebraics.push_back(y);
    traj.modes.push_back(mode);
  };

  push(config.t0);
  Linearization lin = linearize(model, mode, x, y);
  if (observer) observer->on_start(model, config.t0, x, y, lin);

  StepWorkspace ws;
  std::size_t next_event = 0;
  auto fire_events = [&](std::size_t k) {
    while (next_event < schedule.events.size() &&
           grid_index(schedule.events[next_event].time(), config) == static_cast<long long>(k)) {
      const EventSpec& ev = schedule.events[next_event];
      const double t = grid_time(k, config);
      JunctionRecord rec = switch_mode(model, ev, x, y, t, config);
      rec.sample = traj.size() - 1;
      if (rec.reset) x.segment(d.n, d.l) = rec.z_plus;
      y = rec.y_plus;
      mode = ev.post_mode;
      push(t);
      lin = linearize(model, mode, x, y);
      ws.ready = false;
      traj.junctions.push_back(std::move(rec));
      if (observer) observer->on_junction(model, ev, traj.junctions.back(), x, lin);
      ++next_event;
    }
  };

  fire_events(0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = grid_time(k, config);
    StepResult res = trapezoidal_step(model, mode, x, y, t, config.dt, config, ws);
    if (observer) {
      StepRecord rec{mode, t, grid_time(k + 1, config), config.dt, x, y, res.x, res.y, lin, ws.end, ws.lu};
      observer->on_step(model, rec);
    }
    x = std::move(res.x);
    y = std::move(res.y);
    lin = ws.end;
    push(grid_time(k + 1, config));
    fire_events(k + 1);
  }
  return traj;
}

namespace {

std::vector<std::string> state_names(const HybridModel& model) {
  std::vector<std::string> names = model.state_names();
  if (names.empty()) {
    for (Index i = 0; i < model.dims().augmented(); ++i) names.push_back("x" + std::to_string(i));
  }
  return names;
}

std::vector<std::string> algebraic_names(const HybridModel& model) {
  std::vector<std::string> names = model.algebraic_names();
  if (names.empty()) {
    for (Index i = 0; i < model.dims().m; ++i) names.push_back("y" + std::to_string(i));
  }
  return names;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const HybridModel& model,
                          const Trajectory& traj,
                          const std::vector<std::pair<std::string, std::vector<double>>>& extra) {
  const Dimensions& d = model.dims();
  const auto xs = state_names(model);
  const auto ys = algebraic_names(model);
  std::vector<std::string> header{"t", "mode"};
  header.insert(header.end(), xs.begin(), xs.begin() + d.n);
  header.insert(header.end(), ys.begin(), ys.end());
  for (const auto& [name, values] : extra) {
    if (values.size() != traj.size()) throw StructuralError("extra column '" + name + "' has wrong length");
    header.push_back(name);
  }
  CsvWriter csv(path, "tsopt-trajectory", 1, header);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    csv.cell(traj.times[k]).cell(static_cast<long long>(traj.modes[k]));
    for (Index i = 0; i < d.n; ++i) csv.cell(traj.states[k][i]);
    for (Index i = 0; i < d.m; ++i) csv.cell(traj.algebraics[k][i]);
    for (const auto& [_, values] : extra) csv.cell(values[k]);
    csv.end_row();
  }
}

void write_junctions_csv(const std::string& path, const HybridModel& model,
                         const Trajectory& traj) {
  const Dimensions& d = model.dims();
  const auto xs = state_names(model);
  const auto ys = algebraic_names(model);
  std::vector<std::string> header{"t_j", "pre_mode", "post_mode", "sample"};
  for (Index i = 0; i < d.n; ++i) header.push_back("f_minus:" + xs[i]);
  for (Index i = 0; i < d.n; ++i) header.push_back("f_plus:" + xs[i]);
  for (Index i = 0; i < d.m; ++i) header.push_back("y_minus:" + ys[i]);
  for (Index i = 0; i < d.m; ++i) header.push_back("y_plus:" + ys[i]);
  CsvWriter csv(path, "tsopt-junctions", 1, header);
  for (const JunctionRecord& j : traj.junctions) {
    csv.cell(j.t_j)
        .cell(static_cast<long long>(j.pre_mode))
        .cell(static_cast<long long>(j.post_mode))
        .cell(static_cast<long long>(j.sample));
    for (Index i = 0; i < d.n; ++i) csv.cell(j.f_minus[i]);
    for (Index i = 0; i < d.n; ++i) csv.cell(j.f_plus[i]);
    for (Index i = 0; i < d.m; ++i) csv.cell(j.y_minus[i]);
    for (Index i = 0; i < d.m; ++i) csv.cell(j.y_plus[i]);
    csv.end_row();
  }
}

}  // namespace tsopt
