#pragma once

/**
 * @file machines.hpp
 * @brief Power system stabilizer: speed input, washout, two lead-lag stages.
 *
 * Cascade realization:
 *
 *   u0 = K_s * omega
 *   xw' = (u0 - xw) / T_w            u1 = u0 - xw
 *   x1' = (u1 - x1) / T_2            y1 = (T_1/T_2) u1 + (1 - T_1/T_2) x1
 *   x2' = (y1 - x2) / T_4            V_s = (T_3/T_4) y1 + (1 - T_3/T_4) x2
 */

#include <Eigen/Core>

#include "tsopt/network.hpp"

namespace tsopt {

struct PssState {
  double xw = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

struct PssOutput {
  double dxw = 0.0;
  double dx1 = 0.0;
  double dx2 = 0.0;
  double vs = 0.0;
};

PssOutput pss_dynamics(const PssParams& params, double omega, const PssState& state);

/// Gradient layout for pss_partials.
enum PssInput : int { kPssOmega, kPssXw, kPssX1, kPssX2, kPssKs, kPssT1, kPssT2, kPssT3, kPssT4, kPssInputs };
using PssGradient = Eigen::Matrix<double, kPssInputs, 1>;

struct PssPartials {
  PssOutput value;
  PssGradient dxw;
  PssGradient dx1;
  PssGradient dx2;
  PssGradient vs;
};

PssPartials pss_partials(const PssParams& params, double omega, const PssState& state);

}  // namespace tsopt
