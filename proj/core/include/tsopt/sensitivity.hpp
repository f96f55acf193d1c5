#pragma once

/**
 * @file sensitivity.hpp
 * @brief Forward trajectory sensitivities Phi_x = dx(t)/dx0, Phi_y = dy(t)/dx0.
 *
 * On smooth intervals the variational DAE
 *
 *   d/dt Phi_x = f_x Phi_x + f_y Phi_y,     0 = g_x Phi_x + g_y Phi_y
 *
 * is discretized with the same trapezoidal rule as the trajectory, so the
 * propagated matrices are the exact derivatives of the discrete trajectory.
 * Each step reuses the Newton matrix factorized at the converged point.
 *
 * At a junction t_J:
 *
 *   Phi_x+ = Phi_x- - (f+ - f-) dt_J/dx0
 *   Phi_y+ = -(g_y+)^-1 g_x+ Phi_x+
 *
 * Only time-triggered junctions are supported, for which dt_J/dx0 = 0.
 */

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsopt/simulator.hpp"

namespace tsopt {

/// Sensitivities for a selection of x0 columns: phi_x is (n+l+p) x c, phi_y is m x c.
struct SensitivityPair {
  Matrix phi_x;
  Matrix phi_y;
};

struct JumpRecord {
  std::size_t sample = 0;  ///< index of the t_J- sample
  SensitivityPair minus;
  SensitivityPair plus;
};

struct SensitivityTrajectory {
  ColumnSet columns;  ///< x0 indices of the propagated columns
  std::vector<double> times;
  std::vector<SensitivityPair> pairs;
  std::vector<JumpRecord> jumps;

  std::size_t size() const { return times.size(); }
  /// Position of x0 index `column` within `columns`, or nullopt.
  std::optional<Index> position(Index column) const;
};

/// All columns 0..n+l+p-1.
ColumnSet all_columns(const Dimensions& dims);
/// Parameter columns n+l..n+l+p-1.
ColumnSet lambda_columns(const Dimensions& dims);

/// Phi_x = I (selected columns), Phi_y from 0 = g_x Phi_x + g_y Phi_y.
SensitivityPair init_sensitivities(const HybridModel& model, ModeId mode, const Vector& x0,
                                   const AlgebraicState& y0, const ColumnSet& columns);

/// Trapezoidal discretization of the variational DAE over one accepted step.
SensitivityPair propagate_step(const HybridModel& model, const StepRecord& step,
                               const SensitivityPair& pair);

/// Phi_x+ = Phi_x- - (f+ - f-) grad_tj. grad_tj is a 1 x c row of dt_J/dx0.
Matrix jump_x(const Matrix& phi_x_minus, const Vector& f_minus, const Vector& f_plus,
              const RowVector& grad_tj);

/// Phi_y+ = -(g_y)^-1 g_x Phi_x+ with the post-event Jacobians.
Matrix jump_y(const Linearization& post, const Matrix& phi_x_plus);
Matrix jump_y(const HybridModel& model, ModeId post_mode, const Vector& x,
              const AlgebraicState& y_plus, const Matrix& phi_x_plus);

/**
 * Block form of the junction update for the partition x = [x_c, z, lambda]:
 *
 *   [Phi+] = [Phi-] + [f* grad_tj ; 0 ; 0],   f* = f- - f+
 *
 * lambda_columns is the n x p slice f* (dt_J/dlambda) of the jump term.
 */
struct ParamJumpBlocks {
  Vector f_star;          ///< f- - f+, x_c rows only
  Matrix jump_term;       ///< (n+l+p) x c; z and lambda rows are zero
  Matrix lambda_columns;  ///< n x (number of selected lambda columns)
  bool identity = true;   ///< jump term is exactly zero
};

ParamJumpBlocks param_jump_blocks(const Dimensions& dims, const JunctionRecord& junction,
                                  const RowVector& grad_tj, const ColumnSet& columns);

/// Applies the block update and the post-event algebraic solve. Throws if the
/// z/lambda rows of the result deviate from their initial identity pattern.
SensitivityPair apply_param_jump(const Dimensions& dims, const ParamJumpBlocks& blocks,
                                 const SensitivityPair& minus, const Linearization& post,
                                 const ColumnSet& columns);

/// True when the z and lambda rows of phi_x still equal the selected columns of I.
bool parameter_rows_intact(const Dimensions& dims, const Matrix& phi_x, const ColumnSet& columns);

/// Observer that propagates sensitivities alongside simulate().
class SensitivityRecorder : public SimulationObserver {
 public:
  explicit SensitivityRecorder(ColumnSet columns);

  void on_start(const HybridModel& model, double t0, const Vector& x0, const AlgebraicState& y0,
                const Linearization& lin) override;
  void on_step(const HybridModel& model, const StepRecord& step) override;
  void on_junction(const HybridModel& model, const EventSpec& event,
                   const JunctionRecord& junction, const Vector& x,
                   const Linearization& post) override;

  const SensitivityTrajectory& result() const { return result_; }
  SensitivityTrajectory take() { return std::move(result_); }

 private:
  SensitivityTrajectory result_;
};

struct SimulationWithSensitivity {
  Trajectory trajectory;
  SensitivityTrajectory sensitivity;
};

SimulationWithSensitivity simulate_with_sensitivities(
    const HybridModel& model, const Vector& x0, const EventSchedule& schedule,
    const IntegratorConfig& config, const ColumnSet& columns,
    const std::optional<AlgebraicState>& y_guess = std::nullopt);

/// Central-difference column of Phi sampled on the trajectory grid.
struct FdColumn {
  Index column = 0;
  Matrix dx;  ///< (n+l+p) x samples
  Matrix dy;  ///< m x samples
};

FdColumn fd_sensitivity(const HybridModel& model, const EventSchedule& schedule,
                        const IntegratorConfig& config, const Vector& x0, Index column, double h,
                        const std::optional<AlgebraicState>& y_guess = std::nullopt);

struct SensitivityCheck {
  Index column = 0;
  double max_rel_error = 0.0;
  double max_abs_fd = 0.0;
  std::size_t compared = 0;  ///< samples with |fd| above the threshold
};

struct FdComparisonOptions {
  double h = 1e-6;
  double t_begin = 0.0;
  double t_end = 1e300;
  double threshold = 1e-6;  ///< compare only where |fd| exceeds this
};

/// Propagated versus finite-difference sensitivities of the given state rows,
/// one entry per requested x0 column.
std::vector<SensitivityCheck> compare_with_fd(const HybridModel& model,
                                              const EventSchedule& schedule,
                                              const IntegratorConfig& config, const Vector& x0,
                                              const ColumnSet& columns,
                                              const std::vector<Index>& rows,
                                              const FdComparisonOptions& options,
                                              const std::optional<AlgebraicState>& y_guess = std::nullopt);

/// Named (state row, x0 column) pair for CSV export.
struct SensitivityChannel {
  std::string name;
  Index row = 0;
  Index column = 0;
};

void write_sensitivity_csv(const std::string& path, const SensitivityTrajectory& sens,
                           const std::vector<SensitivityChannel>& channels);

}  // namespace tsopt
