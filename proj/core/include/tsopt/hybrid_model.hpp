#pragma once

/**
 * @file hybrid_model.hpp
 * @brief Parameter-dependent differential-algebraic-discrete (DAD) hybrid model.
 *
 * The model is
 *
 *   x' = f(x, y)                       (rows of z and lambda are identically zero)
 *   0  = g_mode(x, y)                  (active algebraic set, switched by events)
 *   z+ = h_j(x-, y-)                   (reset events)
 *
 * with the augmented state x = [x_c, z, lambda]. Parameters lambda ride along as
 * constant states so that sensitivities to x0 include parameter sensitivities.
 */

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tsopt/types.hpp"

namespace tsopt {

struct Dimensions {
  Index n = 0;  ///< continuous dynamic states x_c
  Index l = 0;  ///< discrete states z
  Index p = 0;  ///< parameters lambda
  Index m = 0;  ///< algebraic states y

  Index augmented() const { return n + l + p; }
  Index lambda_offset() const { return n + l; }
  bool operator==(const Dimensions&) const = default;
};

/// Augmented state x = [x_c, z, lambda] stored contiguously.
class AugmentedState {
 public:
  AugmentedState() = default;
  AugmentedState(const Dimensions& dims, Vector values);

  static AugmentedState from_parts(const Vector& xc, const Vector& z, const Vector& lambda);

  const Dimensions& dims() const { return dims_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  auto xc() const { return values_.head(dims_.n); }
  auto z() const { return values_.segment(dims_.n, dims_.l); }
  auto lambda() const { return values_.tail(dims_.p); }
  auto xc() { return values_.head(dims_.n); }
  auto z() { return values_.segment(dims_.n, dims_.l); }
  auto lambda() { return values_.tail(dims_.p); }

 private:
  Dimensions dims_;
  Vector values_;
};

/// Algebraic states y (bus voltages, injection currents, ...).
using AlgebraicState = Vector;

/// Partial derivatives of a vector function of (x, y): dx = d/dx, dy = d/dy.
struct JacobianBlocks {
  Matrix dx;
  Matrix dy;
};

// Differential right-hand side for x_c only (n rows). The model pads z/lambda rows.
using DifferentialFn = std::function<Vector(const Vector& x, const Vector& y)>;
// Jacobian of the n x_c rows: dx is n x (n+l+p), dy is n x m.
using DifferentialJacobianFn = std::function<JacobianBlocks(const Vector& x, const Vector& y)>;
using ResidualFn = std::function<Vector(const Vector& x, const Vector& y)>;
using ResidualJacobianFn = std::function<JacobianBlocks(const Vector& x, const Vector& y)>;
using ResetFn = std::function<Vector(const Vector& x, const Vector& y)>;
using HypersurfaceFn = std::function<double(double t, const Vector& x, const Vector& y)>;

struct AlgebraicMode {
  ResidualFn residual;
  ResidualJacobianFn jacobian;
};

enum class EventKind { switching, reset };

struct TimeTrigger {
  double t_j = 0.0;
};

struct StateTrigger {
  int hypersurface = 0;
};

struct EventSpec {
  EventKind kind = EventKind::switching;
  std::variant<TimeTrigger, StateTrigger> trigger;
  ModeId pre_mode = kBaseMode;
  ModeId post_mode = kBaseMode;
  std::optional<int> reset;  ///< reset map id for reset events
  std::string label;

  bool time_triggered() const { return std::holds_alternative<TimeTrigger>(trigger); }
  /// Junction time of a time-triggered event.
  double time() const;
};

EventSpec make_switching_event(double t_j, ModeId pre, ModeId post, std::string label = {});

/**
 * Callable bundle describing one hybrid system instance. Evaluators must be
 * pure: a HybridModel may be shared across threads once built.
 */
class HybridModel {
 public:
  explicit HybridModel(Dimensions dims);

  const Dimensions& dims() const { return dims_; }

  void set_differential(DifferentialFn f, DifferentialJacobianFn jacobian);
  void add_mode(ModeId id, AlgebraicMode mode);
  void add_reset(int id, ResetFn h);
  void add_hypersurface(int id, HypersurfaceFn trigger);

  bool has_mode(ModeId id) const { return modes_.contains(id); }
  bool has_reset(int id) const { return resets_.contains(id); }
  bool has_hypersurface(int id) const { return hypersurfaces_.contains(id); }
  std::vector<ModeId> modes() const;

  /// f(x, y) over all n+l+p rows; z and lambda rows are exactly zero.
  Vector eval_f(const Vector& x, const Vector& y) const;
  /// Residual of the algebraic set selected by mode.
  Vector eval_g(ModeId mode, const Vector& x, const Vector& y) const;
  /// Jacobian of f padded to (n+l+p) rows.
  JacobianBlocks jacobian_f(const Vector& x, const Vector& y) const;
  JacobianBlocks jacobian_g(ModeId mode, const Vector& x, const Vector& y) const;

  /// Trigger value. Time-triggered events use t_J - t (positive before the junction).
  double eval_trigger(const EventSpec& event, double t, const Vector& x, const Vector& y) const;
  /// New discrete state z+ = h_j(x-, y-).
  Vector apply_reset(int reset_id, const Vector& x, const Vector& y) const;

  // Naming tables used for CSV headers. Defaults are x0.., y0.. when unset.
  void set_state_names(std::vector<std::string> names);
  void set_algebraic_names(std::vector<std::string> names);
  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<std::string>& algebraic_names() const { return algebraic_names_; }

 private:
  void check_point(const Vector& x, const Vector& y) const;
  const AlgebraicMode& mode(ModeId id) const;

  Dimensions dims_;
  DifferentialFn f_;
  DifferentialJacobianFn f_jacobian_;
  std::map<ModeId, AlgebraicMode> modes_;
  std::map<int, ResetFn> resets_;
  std::map<int, HypersurfaceFn> hypersurfaces_;
  std::vector<std::string> state_names_;
  std::vector<std::string> algebraic_names_;
};

// Central finite-difference Jacobians, used as a test fallback for analytic ones.
JacobianBlocks fd_jacobian_f(const HybridModel& model, const Vector& x, const Vector& y,
                             double step = 1e-6);
JacobianBlocks fd_jacobian_g(const HybridModel& model, ModeId mode, const Vector& x,
                             const Vector& y, double step = 1e-6);

struct JacobianCheck {
  double f_error = 0.0;  ///< max entrywise |analytic - fd| / max(1, |fd|) over f blocks
  double g_error = 0.0;
  double max_error() const { return std::max(f_error, g_error); }
};

JacobianCheck check_jacobians(const HybridModel& model, ModeId mode, const Vector& x,
                              const Vector& y, double step = 1e-6);

}  // namespace tsopt
