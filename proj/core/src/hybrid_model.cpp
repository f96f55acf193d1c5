#include "tsopt/hybrid_model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "tsopt/errors.hpp"

namespace tsopt {

AugmentedState::AugmentedState(const Dimensions& dims, Vector values)
    : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.augmented()) {
    throw StructuralError("augmented state has " + std::to_string(values_.size()) +
                          " entries, expected " + std::to_string(dims_.augmented()));
  }
}

AugmentedState AugmentedState::from_parts(const Vector& xc, const Vector& z, const Vector& lambda) {
  Dimensions dims{xc.size(), z.size(), lambda.size(), 0};
  Vector values(dims.augmented());
  values << xc, z, lambda;
  return AugmentedState(dims, std::move(values));
}

double EventSpec::time() const {
  if (!time_triggered()) {
    throw StructuralError("event '" + label + "' is state-triggered and has no fixed time");
  }
  return std::get<TimeTrigger>(trigger).t_j;
}

EventSpec make_switching_event(double t_j, ModeId pre, ModeId post, std::string label) {
  EventSpec ev;
  ev.kind = EventKind::switching;
  ev.trigger = TimeTrigger{t_j};
  ev.pre_mode = pre;
  ev.post_mode = post;
  ev.label = std::move(label);
  return ev;
}

HybridModel::HybridModel(Dimensions dims) : dims_(dims) {
  if (dims.n < 0 || dims.l < 0 || dims.p < 0 || dims.m < 0) {
    throw StructuralError("negative model dimension");
  }
}

void HybridModel::set_differential(DifferentialFn f, DifferentialJacobianFn jacobian) {
  f_ = std::move(f);
  f_jacobian_ = std::move(jacobian);
}

void HybridModel::add_mode(ModeId id, AlgebraicMode mode) {
  if (!mode.residual || !mode.jacobian) {
    throw StructuralError("algebraic mode " + std::to_string(id) + " lacks an evaluator");
  }
  modes_[id] = std::move(mode);
}

void HybridModel::add_reset(int id, ResetFn h) { resets_[id] = std::move(h); }

void HybridModel::add_hypersurface(int id, HypersurfaceFn trigger) {
  hypersurfaces_[id] = std::move(trigger);
}

std::vector<ModeId> HybridModel::modes() const {
  std::vector<ModeId> ids;
  ids.reserve(modes_.size());
  for (const auto& [id, _] : modes_) ids.push_back(id);
  return ids;
}

void HybridModel::check_point(const Vector& x, const Vector& y) const {
  if (x.size() != dims_.augmented() || y.size() != dims_.m) {
    throw StructuralError("point dimension mismatch: x has " + std::to_string(x.size()) +
                          " (expected " + std::to_string(dims_.augmented()) + "), y has " +
                          std::to_string(y.size()) + " (expected " + std::to_string(dims_.m) +
                          ")");
  }
}

const AlgebraicMode& HybridModel::mode(ModeId id) const {
  auto it = modes_.find(id);
  if (it == modes_.end()) {
    throw StructuralError("unknown algebraic mode " + std::to_string(id));
  }
  return it->second;
}

Vector HybridModel::eval_f(const Vector& x, const Vector& y) const {
  check_point(x, y);
  if (!f_) throw StructuralError("differential equations not set");
  Vector out = Vector::Zero(dims_.augmented());
  Vector fc = f_(x, y);
  if (fc.size() != dims_.n) {
    throw StructuralError("differential evaluator returned " + std::to_string(fc.size()) +
                          " rows, expected " + std::to_string(dims_.n));
  }
  out.head(dims_.n) = fc;
  return out;
}

Vector HybridModel::eval_g(ModeId id, const Vector& x, const Vector& y) const {
  check_point(x, y);
  Vector r = mode(id).residual(x, y);
  if (r.size() != dims_.m) {
    throw StructuralError("mode " + std::to_string(id) + " returned " + std::to_string(r.size()) +
                          " residuals, expected " + std::to_string(dims_.m));
  }
  return r;
}

JacobianBlocks HybridModel::jacobian_f(const Vector& x, const Vector& y) const {
  check_point(x, y);
  if (!f_jacobian_) throw StructuralError("differential Jacobian not set");
  JacobianBlocks part = f_jacobian_(x, y);
  const Index nx = dims_.augmented();
  if (part.dx.rows() != dims_.n || part.dx.cols() != nx || part.dy.rows() != dims_.n ||
      part.dy.cols() != dims_.m) {
    throw StructuralError("differential Jacobian has wrong shape");
  }
  JacobianBlocks full{Matrix::Zero(nx, nx), Matrix::Zero(nx, dims_.m)};
  full.dx.topRows(dims_.n) = part.dx;
  full.dy.topRows(dims_.n) = part.dy;
  return full;
}

JacobianBlocks HybridModel::jacobian_g(ModeId id, const Vector& x, const Vector& y) const {
  check_point(x, y);
  JacobianBlocks jac = mode(id).jacobian(x, y);
  if (jac.dx.rows() != dims_.m || jac.dx.cols() != dims_.augmented() ||
      jac.dy.rows() != dims_.m || jac.dy.cols() != dims_.m) {
    throw StructuralError("algebraic Jacobian of mode " + std::to_string(id) +
                          " has wrong shape");
  }
  return jac;
}

double HybridModel::eval_trigger(const EventSpec& event, double t, const Vector& x,
                                 const Vector& y) const {
  if (const auto* tt = std::get_if<TimeTrigger>(&event.trigger)) {
    return tt->t_j - t;
  }
  const int id = std::get<StateTrigger>(event.trigger).hypersurface;
  auto it = hypersurfaces_.find(id);
  if (it == hypersurfaces_.end()) {
    throw StructuralError("unknown hypersurface " + std::to_string(id));
  }
  check_point(x, y);
  return it->second(t, x, y);
}

Vector HybridModel::apply_reset(int reset_id, const Vector& x, const Vector& y) const {
  auto it = resets_.find(reset_id);
  if (it == resets_.end()) {
    throw StructuralError("unknown reset map " + std::to_string(reset_id));
  }
  check_point(x, y);
  Vector z_plus = it->second(x, y);
  if (z_plus.size() != dims_.l) {
    throw StructuralError("reset map " + std::to_string(reset_id) + " returned wrong size");
  }
  return z_plus;
}

void HybridModel::set_state_names(std::vector<std::string> names) {
  if (static_cast<Index>(names.size()) != dims_.augmented()) {
    throw StructuralError("state naming table has wrong length");
  }
  state_names_ = std::move(names);
}

void HybridModel::set_algebraic_names(std::vector<std::string> names) {
  if (static_cast<Index>(names.size()) != dims_.m) {
    throw StructuralError("algebraic naming table has wrong length");
  }
  algebraic_names_ = std::move(names);
}

namespace {

template <typename Fn>
JacobianBlocks central_difference(Fn&& fn, const Vector& x, const Vector& y, Index rows,
                                  double step) {
  JacobianBlocks jac{Matrix(rows, x.size()), Matrix(rows, y.size())};
  Vector xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    Vector up = fn(xp, y);
    xp[j] = x[j] - h;
    Vector dn = fn(xp, y);
    xp[j] = x[j];
    jac.dx.col(j) = (up - dn) / (2.0 * h);
  }
  Vector yp = y;
  for (Index j = 0; j < y.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(y[j]));
    yp[j] = y[j] + h;
    Vector up = fn(x, yp);
    yp[j] = y[j] - h;
    Vector dn = fn(x, yp);
    yp[j] = y[j];
    jac.dy.col(j) = (up - dn) / (2.0 * h);
  }
  return jac;
}

double relative_gap(const Matrix& analytic, const Matrix& fd) {
  double worst = 0.0;
  for (Index i = 0; i < fd.rows(); ++i) {
    for (Index j = 0; j < fd.cols(); ++j) {
      const double denom = std::max(1.0, std::abs(fd(i, j)));
      worst = std::max(worst, std::abs(analytic(i, j) - fd(i, j)) / denom);
    }
  }
  return worst;
}

}  // namespace

JacobianBlocks fd_jacobian_f(const HybridModel& model, const Vector& x, const Vector& y,
                             double step) {
  return central_difference([&](const Vector& a, const Vector& b) { return model.eval_f(a, b); },
                            x, y, model.dims().augmented(), step);
}

JacobianBlocks fd_jacobian_g(const HybridModel& model, ModeId mode, const Vector& x,
                             const Vector& y, double step) {
  return central_difference(
      [&](const Vector& a, const Vector& b) { return model.eval_g(mode, a, b); }, x, y,
      model.dims().m, step);
}

JacobianCheck check_jacobians(const HybridModel& model, ModeId mode, const Vector& x,
                              const Vector& y, double step) {
  const JacobianBlocks fa = model.jacobian_f(x, y);
  const JacobianBlocks ff = fd_jacobian_f(model, x, y, step);
  const JacobianBlocks ga = model.jacobian_g(mode, x, y);
  const JacobianBlocks gf = fd_jacobian_g(model, mode, x, y, step);
  JacobianCheck out;
  out.f_error = std::max(relative_gap(fa.dx, ff.dx), relative_gap(fa.dy, ff.dy));
  out.g_error = std::max(relative_gap(ga.dx, gf.dx), relative_gap(ga.dy, gf.dy));
  return out;
}

}  // namespace tsopt
