#pragma once

/**
 * @file simulator.hpp
 * @brief Fixed-step implicit trapezoidal integration of the hybrid DAE.
 *
 * Each step solves the coupled difference/algebraic system
 *
 *   x1 - x0 - dt/2 (f(x0, y0) + f(x1, y1)) = 0
 *   g_mode(x1, y1)                         = 0
 *
 * for (x_c, y) by Newton's method with a dense LU of the bordered matrix.
 * z and lambda are copied through untouched. Events are time-triggered and
 * must land on the integration grid; at a junction x is held fixed and y is
 * re-solved in the post-event mode.
 */

#include <optional>
#include <string>
#include <vector>

#include "tsopt/hybrid_model.hpp"

namespace tsopt {

struct IntegratorConfig {
  double dt = 0.01;
  double newton_tol = 1e-8;  ///< max-norm of the residual
  int newton_max_iter = 20;
  double t0 = 0.0;
  double tf = 10.0;

  void validate() const;
  /// Number of steps between t0 and tf.
  std::size_t steps() const;
};

/// Ordered list of events applied to a simulation, starting from initial_mode.
struct EventSchedule {
  ModeId initial_mode = kBaseMode;
  std::vector<EventSpec> events;
};

/// Rejects unordered, off-grid, out-of-range or state-triggered events and
/// mode chains that do not connect.
void validate_schedule(const HybridModel& model, const EventSchedule& schedule,
                       const IntegratorConfig& config);

struct JunctionRecord {
  double t_j = 0.0;
  Vector f_minus;
  Vector f_plus;
  AlgebraicState y_minus;
  AlgebraicState y_plus;
  ModeId pre_mode = kBaseMode;
  ModeId post_mode = kBaseMode;
  std::size_t sample = 0;  ///< index of the t_J- sample in the trajectory
  bool reset = false;      ///< z was changed by a reset map
  Vector z_plus;           ///< new discrete state when reset is set
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;  ///< augmented x at each sample
  std::vector<AlgebraicState> algebraics;
  std::vector<ModeId> modes;
  std::vector<JunctionRecord> junctions;

  std::size_t size() const { return times.size(); }
};

/// Jacobians of f and of the active g at an accepted point.
struct Linearization {
  ModeId mode = kBaseMode;
  JacobianBlocks f;
  JacobianBlocks g;
};

Linearization linearize(const HybridModel& model, ModeId mode, const Vector& x,
                        const Vector& y);

/// Newton matrix of one trapezoidal step at a given point:
///   [ I - dt/2 df_c/dx_c   -dt/2 df_c/dy ]
///   [ dg/dx_c               dg/dy        ]
Matrix trapezoidal_matrix(const Dimensions& dims, const Linearization& lin, double dt);

/// LU of a square matrix with a singularity check on the reciprocal condition estimate.
class Factorization {
 public:
  Factorization() = default;
  explicit Factorization(const Matrix& a);

  bool valid() const { return valid_; }
  bool singular() const { return singular_; }
  double rcond() const { return rcond_; }
  Matrix solve(const Matrix& rhs) const;

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  bool valid_ = false;
  bool singular_ = false;
  double rcond_ = 0.0;
};

/// Reusable state carried between consecutive steps: the converged point's
/// linearization and the factorized Newton matrix there.
struct StepWorkspace {
  Linearization end;
  Factorization lu;
  double dt = 0.0;
  bool ready = false;
};

struct StepResult {
  Vector x;
  AlgebraicState y;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves 0 = g_mode(x0, y) for y starting from guess.
AlgebraicState solve_initial_algebraic(const HybridModel& model, const Vector& x0, ModeId mode,
                                       const AlgebraicState& guess, double t0 = 0.0,
                                       double tol = 1e-8, int max_iter = 20);

/// One trapezoidal step. On return, workspace holds the linearization and the
/// factorized Newton matrix at the new point; if it already held the matrix at
/// (xk, yk) for the same mode and dt, the first Newton iteration reuses it.
StepResult trapezoidal_step(const HybridModel& model, ModeId mode, const Vector& xk,
                            const AlgebraicState& yk, double tk, double dt,
                            const IntegratorConfig& config, StepWorkspace& workspace);

/// Re-solves y in the post-event mode with x fixed and records f before/after.
JunctionRecord switch_mode(const HybridModel& model, const EventSpec& event, const Vector& x,
                           const AlgebraicState& y_minus, double t_j,
                           const IntegratorConfig& config);

/// Data for one accepted step as seen by observers.
struct StepRecord {
  ModeId mode;
  double t0;
  double t1;  ///< grid time of the new sample
  double dt;
  const Vector& x0;
  const AlgebraicState& y0;
  const Vector& x1;
  const AlgebraicState& y1;
  const Linearization& start;
  const Linearization& end;
  const Factorization& lu;  ///< Newton matrix at (x1, y1)
};

/// Hooks called by simulate(); used for sensitivity propagation.
class SimulationObserver {
 public:
  virtual ~SimulationObserver() = default;
  virtual void on_start(const HybridModel& model, double t0, const Vector& x0,
                        const AlgebraicState& y0, const Linearization& lin) = 0;
  virtual void on_step(const HybridModel& model, const StepRecord& step) = 0;
  virtual void on_junction(const HybridModel& model, const EventSpec& event,
                           const JunctionRecord& junction, const Vector& x,
                           const Linearization& post) = 0;
};

/// Integrates over [t0, tf]. y0 is solved from the optional guess (zeros if absent).
Trajectory simulate(const HybridModel& model, const Vector& x0, const EventSchedule& schedule,
                    const IntegratorConfig& config,
                    const std::optional<AlgebraicState>& y_guess = std::nullopt,
                    SimulationObserver* observer = nullptr);

/// CSV export. Trajectory rows: t, mode, x_c..., y...; junction rows: t_J, modes, f-/f+, y-/y+.
void write_trajectory_csv(const std::string& path, const HybridModel& model,
                          const Trajectory& traj,
                          const std::vector<std::pair<std::string, std::vector<double>>>& extra = {});
void write_junctions_csv(const std::string& path, const HybridModel& model,
                         const Trajectory& traj);

}  // namespace tsopt
