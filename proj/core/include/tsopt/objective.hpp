#pragma once

/**
 * @file objective.hpp
 * @brief Speed-deviation objective J = w * sum_i int omega_i^2 dt and its
 * gradient with respect to the parameter block of the augmented state.
 *
 * Both use the trapezoidal rule on the simulation grid. Junction samples are
 * duplicated in time and contribute zero-width intervals, so the gradient is
 * the exact derivative of the quadrature.
 */

#include <memory>
#include <optional>
#include <vector>

#include "tsopt/sensitivity.hpp"
#include "tsopt/simulator.hpp"

namespace tsopt {

struct ObjectiveConfig {
  double t0 = 0.0;
  double tf = 10.0;
  std::vector<Index> speed_rows;  ///< omega rows of the summed generators
  double weight = 1.0;            ///< uniform scale of the quadrature

  void validate() const;
};

double integrate_objective(const Trajectory& traj, const ObjectiveConfig& config);

/// dJ/dx0 for the propagated columns of `sens`.
Vector integrate_gradient(const Trajectory& traj, const SensitivityTrajectory& sens,
                          const ObjectiveConfig& config);

struct ObjectiveValue {
  double value = 0.0;
  std::optional<Vector> gradient;
};

/// J(lambda). Failures are reported as ObjectiveError.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Index dimension() const = 0;
  virtual ObjectiveValue evaluate(const Vector& lambda, bool with_gradient) const = 0;
};

/// J = 0.5 (x - c)' A (x - c) with A symmetric positive definite.
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(Matrix a, Vector center);

  Index dimension() const override { return center_.size(); }
  ObjectiveValue evaluate(const Vector& lambda, bool with_gradient) const override;

 private:
  Matrix a_;
  Vector center_;
};

/// Simulates the hybrid model with lambda substituted into x0.
class TrajectoryObjective : public Objective {
 public:
  TrajectoryObjective(const HybridModel& model, EventSchedule schedule, IntegratorConfig integrator,
                      Vector x0, ObjectiveConfig objective,
                      std::optional<AlgebraicState> y_guess = std::nullopt);

  Index dimension() const override;
  ObjectiveValue evaluate(const Vector& lambda, bool with_gradient) const override;

  /// Full simulation at lambda (no sensitivities).
  Trajectory simulate_at(const Vector& lambda) const;
  Vector x0_with(const Vector& lambda) const;
  const ObjectiveConfig& config() const { return objective_; }

 private:
  const HybridModel* model_;
  EventSchedule schedule_;
  IntegratorConfig integrator_;
  Vector x0_;
  ObjectiveConfig objective_;
  std::optional<AlgebraicState> y_guess_;
};

}  // namespace tsopt
