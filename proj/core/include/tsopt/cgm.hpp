#pragma once

/**
 * @file cgm.hpp
 * @brief Box-constrained nonlinear conjugate gradient with Armijo backtracking.
 *
 *   lambda_{k+1} = P(lambda_k + alpha_k d_k),  alpha_k = rho^m_k
 *   J(lambda_k) - J(P(lambda_k + rho^m d_k)) >= -sigma rho^m grad' d_k
 *   d_{k+1} = -g_{k+1} + beta_k d_k
 *
 * P clips to the box. Gradients are projected (components pushing out of an
 * active bound are zeroed) before use in the direction and stopping test.
 */

#include <string>
#include <vector>

#include "tsopt/objective.hpp"

namespace tsopt {

enum class BetaRule {
  cross,          ///< g1'(g1 - g0) / (g1' g0)
  polak_ribiere,  ///< g1'(g1 - g0) / (g0' g0)
};

BetaRule parse_beta_rule(const std::string& name);
const char* beta_rule_name(BetaRule rule);

struct CgmConfig {
  double rho = 0.5;
  double sigma = 1e-4;
  double epsilon = 1e-4;
  int max_iter = 100;
  int max_backtracks = 60;
  Vector lower;
  Vector upper;
  BetaRule beta_rule = BetaRule::cross;

  void validate(Index p) const;
};

Vector project_to_box(const Vector& lambda, const Vector& lower, const Vector& upper);
/// Gradient with components zeroed where an active bound blocks descent.
Vector projected_gradient(const Vector& grad, const Vector& lambda, const Vector& lower,
                          const Vector& upper);

struct ArmijoTrial {
  int m = 0;
  double alpha = 0.0;
  double value = 0.0;  ///< J at the projected trial point (NaN if evaluation failed)
  double decrease = 0.0;
  double required = 0.0;  ///< -sigma alpha grad'd
  bool accepted = false;
  bool evaluation_failed = false;
};

struct ArmijoResult {
  bool success = false;
  int m = -1;
  double alpha = 0.0;
  Vector lambda;
  double value = 0.0;
  bool clipped = false;  ///< projection changed the accepted trial point
  std::vector<ArmijoTrial> trials;
};

/// Requires grad'd < 0 (ConfigError otherwise).
ArmijoResult armijo_search(const Objective& objective, const Vector& lambda, double value,
                           const Vector& direction, const Vector& grad, const CgmConfig& config);

struct DirectionUpdate {
  Vector direction;
  double beta = 0.0;
  bool reset = false;
};

/// CG direction from the new and old gradients; falls back to steepest
/// descent when beta < 0, the denominator vanishes or descent fails.
DirectionUpdate cgm_direction(const Vector& grad_new, const Vector& grad_old, const Vector& d_old,
                              BetaRule rule = BetaRule::cross);

struct TuningIterate {
  int iter = 0;
  Vector lambda;
  double value = 0.0;
  Vector gradient;           ///< full gradient at lambda
  double grad_norm = 0.0;    ///< norm of the projected gradient
  Vector direction;          ///< d_k (empty for the last iterate)
  double slope = 0.0;        ///< grad' d_k
  double beta = 0.0;         ///< beta used to build d_k
  bool reset = false;        ///< d_k is steepest descent
  double alpha = 0.0;        ///< accepted step from this iterate (0 if none)
  int m = -1;
  std::vector<ArmijoTrial> trials;
};

enum class TuningStatus { converged, max_iter, line_search_failure };
const char* status_name(TuningStatus status);

struct TuningResult {
  Vector lambda_star;
  double value = 0.0;
  TuningStatus status = TuningStatus::max_iter;
  std::vector<TuningIterate> iterates;
  int evaluations = 0;
};

TuningResult tune(const Objective& objective, const Vector& lambda0, const CgmConfig& config);

/// Trace CSV: iter, J, grad_norm, alpha, beta, reset, lambda entries.
void write_tuning_trace(const std::string& path, const TuningResult& result,
                        const std::vector<std::string>& lambda_names);

}  // namespace tsopt
