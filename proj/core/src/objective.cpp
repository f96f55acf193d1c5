#include "tsopt/objective.hpp"

#include <cmath>
#include <utility>

#include "tsopt/errors.hpp"

namespace tsopt {

namespace {

bool inside(double t, const ObjectiveConfig& c) {
  const double eps = 1e-9 * std::max(1.0, std::abs(t));
  return t >= c.t0 - eps && t <= c.tf + eps;
}

double speed_square_sum(const Vector& x, const std::vector<Index>& rows) {
  double s = 0.0;
  for (Index r : rows) s += x[r] * x[r];
  return s;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(tf > t0)) throw ConfigError("objective window requires tf > t0");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("objective weight must be positive");
  if (speed_rows.empty()) throw ConfigError("objective needs at least one speed row");
}

double integrate_objective(const Trajectory& traj, const ObjectiveConfig& config) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    if (!inside(traj.times[k], config) || !inside(traj.times[k + 1], config)) continue;
    const double h = traj.times[k + 1] - traj.times[k];
    total += 0.5 * h *
             (speed_square_sum(traj.states[k], config.speed_rows) +
              speed_square_sum(traj.states[k + 1], config.speed_rows));
  }
  return config.weight * total;
}

Vector integrate_gradient(const Trajectory& traj, const SensitivityTrajectory& sens,
                          const ObjectiveConfig& config) {
  if (sens.size() != traj.size()) throw SensitivityError("sensitivity and trajectory grids differ");
  const Index c = static_cast<Index>(sens.columns.size());
  Vector grad = Vector::Zero(c);
  auto integrand = [&](std::size_t k) {
    Vector d = Vector::Zero(c);
    for (Index r : config.speed_rows) {
      d += 2.0 * traj.states[k][r] * sens.pairs[k].phi_x.row(r).transpose();
    }
    return d;
  };
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    if (!inside(traj.times[k], config) || !inside(traj.times[k + 1], config)) continue;
    const double h = traj.times[k + 1] - traj.times[k];
    if (h == 0.0) continue;
    grad += 0.5 * h * (integrand(k) + integrand(k + 1));
  }
  return config.weight * grad;
}

QuadraticObjective::QuadraticObjective(Matrix a, Vector center)
    : a_(std::move(a)), center_(std::move(center)) {
  if (a_.rows() != a_.cols() || a_.rows() != center_.size()) {
    throw StructuralError("quadratic objective dimensions disagree");
  }
}

ObjectiveValue QuadraticObjective::evaluate(const Vector& lambda, bool with_gradient) const {
  if (lambda.size() != center_.size()) throw StructuralError("parameter vector has wrong length");
  const Vector e = lambda - center_;
  const Vector ae = a_ * e;
  ObjectiveValue out;
  out.value = 0.5 * e.dot(ae);
  if (with_gradient) out.gradient = ae;
  return out;
}

TrajectoryObjective::TrajectoryObjective(const HybridModel& model, EventSchedule schedule,
                                         IntegratorConfig integrator, Vector x0,
                                         ObjectiveConfig objective,
                                         std::optional<AlgebraicState> y_guess)
    : model_(&model),
      schedule_(std::move(schedule)),
      integrator_(integrator),
      x0_(std::move(x0)),
      objective_(std::move(objective)),
      y_guess_(std::move(y_guess)) {
  objective_.validate();
  integrator_.validate();
  if (x0_.size() != model.dims().augmented()) throw StructuralError("x0 has wrong length");
  if (model.dims().p == 0) throw ConfigError("objective needs at least one parameter");
  for (const EventSpec& e : schedule_.events) {
    if (!(objective_.tf > e.time())) throw ConfigError("objective window must end after the last event");
  }
  validate_schedule(model, schedule_, integrator_);
}

Index TrajectoryObjective::dimension() const { return model_->dims().p; }

Vector TrajectoryObjective::x0_with(const Vector& lambda) const {
  if (lambda.size() != dimension()) throw StructuralError("parameter vector has wrong length");
  Vector x = x0_;
  x.segment(model_->dims().lambda_offset(), dimension()) = lambda;
  return x;
}

Trajectory TrajectoryObjective::simulate_at(const Vector& lambda) const {
  return simulate(*model_, x0_with(lambda), schedule_, integrator_, y_guess_);
}

ObjectiveValue TrajectoryObjective::evaluate(const Vector& lambda, bool with_gradient) const {
  ObjectiveValue out;
  try {
    if (with_gradient) {
      SimulationWithSensitivity run = simulate_with_sensitivities(
          *model_, x0_with(lambda), schedule_, integrator_, lambda_columns(model_->dims()), y_guess_);
      out.value = integrate_objective(run.trajectory, objective_);
      out.gradient = integrate_gradient(run.trajectory, run.sensitivity, objective_);
    } else {
      out.value = integrate_objective(simulate_at(lambda), objective_);
    }
  } catch (const ValidationError& e) {
    throw ObjectiveError(std::string("objective evaluation failed: ") + e.what());
  } catch (const NumericalError& e) {
    throw ObjectiveError(std::string("objective evaluation failed: ") + e.what());
  }
  if (!std::isfinite(out.value)) throw ObjectiveError("objective evaluation produced a non-finite value");
  return out;
}

}  // namespace tsopt
