#pragma once

// Small closed-form models shared by the unit tests.

#include <cmath>

#include "tsopt/hybrid_model.hpp"
#include "tsopt/power_system.hpp"
#include "tsopt/simulator.hpp"

namespace tsopt::testing {

// x' = lambda x, algebraic y = x. State [x, lambda].
inline HybridModel scalar_growth_model() {
  HybridModel model(Dimensions{1, 0, 1, 1});
  model.set_differential(
      [](const Vector& x, const Vector&) { return Vector::Constant(1, x[1] * x[0]); },
      [](const Vector& x, const Vector&) {
        JacobianBlocks j{Matrix::Zero(1, 2), Matrix::Zero(1, 1)};
        j.dx(0, 0) = x[1];
        j.dx(0, 1) = x[0];
        return j;
      });
  model.add_mode(kBaseMode, AlgebraicMode{
                                [](const Vector& x, const Vector& y) { return Vector::Constant(1, y[0] - x[0]); },
                                [](const Vector&, const Vector&) {
                                  JacobianBlocks j{Matrix::Zero(1, 2), Matrix::Identity(1, 1)};
                                  j.dx(0, 0) = -1.0;
                                  return j;
                                }});
  return model;
}

// x' = y with y - a_i x = 0 in mode i (i = 0, 1). State [x, a_0, a_1].
inline HybridModel switched_linear_model() {
  HybridModel model(Dimensions{1, 0, 2, 1});
  model.set_differential([](const Vector&, const Vector& y) { return Vector::Constant(1, y[0]); },
                         [](const Vector&, const Vector&) {
                           return JacobianBlocks{Matrix::Zero(1, 3), Matrix::Identity(1, 1)};
                         });
  for (int mode : {0, 1}) {
    const Index a = 1 + mode;
    model.add_mode(mode, AlgebraicMode{
                             [a](const Vector& x, const Vector& y) { return Vector::Constant(1, y[0] - x[a] * x[0]); },
                             [a](const Vector& x, const Vector&) {
                               JacobianBlocks j{Matrix::Zero(1, 3), Matrix::Identity(1, 1)};
                               j.dx(0, 0) = -x[a];
                               j.dx(0, a) = -x[0];
                               return j;
                             }});
  }
  return model;
}

// x' = -x with a discrete tap z; reset 0 maps z -> z + 1. State [x, z].
inline HybridModel tap_model() {
  HybridModel model(Dimensions{1, 1, 0, 1});
  model.set_differential([](const Vector& x, const Vector&) { return Vector::Constant(1, -x[0]); },
                         [](const Vector&, const Vector&) {
                           JacobianBlocks j{Matrix::Zero(1, 2), Matrix::Zero(1, 1)};
                           j.dx(0, 0) = -1.0;
                           return j;
                         });
  model.add_mode(kBaseMode, AlgebraicMode{
                                [](const Vector& x, const Vector& y) { return Vector::Constant(1, y[0] - x[1] * x[0]); },
                                [](const Vector& x, const Vector&) {
                                  JacobianBlocks j{Matrix::Zero(1, 2), Matrix::Identity(1, 1)};
                                  j.dx(0, 0) = -x[1];
                                  j.dx(0, 1) = -x[0];
                                  return j;
                                }});
  model.add_reset(0, [](const Vector& x, const Vector&) { return Vector::Constant(1, x[1] + 1.0); });
  model.add_reset(1, [](const Vector& x, const Vector&) { return Vector::Constant(1, x[1]); });
  return model;
}

// Closed form for switched_linear_model with the junction at tj.
struct SwitchedLinearExact {
  double x0, a0, a1, tj;
  double x(double t) const {
    return t <= tj ? x0 * std::exp(a0 * t) : x0 * std::exp(a0 * tj + a1 * (t - tj));
  }
  double dx_dx0(double t) const { return x(t) / x0; }
  double dx_da0(double t) const { return std::min(t, tj) * x(t); }
  double dx_da1(double t) const { return t <= tj ? 0.0 : (t - tj) * x(t); }
};

inline NetworkCase wscc9() { return load_case_file(TSOPT_DATA_DIR "/wscc9.json"); }

inline PssMap reference_pss() {
  PssMap pss;
  pss[2] = PssParams::tied(7.5, 10.0, 0.174, 0.05);
  pss[3] = PssParams::tied(7.5, 10.0, 0.174, 0.05);
  return pss;
}

inline FaultScenario bus_fault(int bus, double t_off = 0.1) {
  FaultScenario f;
  f.bus = bus;
  f.t_on = 0.0;
  f.t_off = t_off;
  return f;
}

}  // namespace tsopt::testing
