#include "tsopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "tsopt/csv.hpp"
#include "tsopt/errors.hpp"

namespace tsopt {

namespace {

Matrix selected_identity(Index rows, const ColumnSet& columns) {
  Matrix out = Matrix::Zero(rows, static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] < 0 || columns[j] >= rows) throw StructuralError("sensitivity column out of range");
    out(columns[j], static_cast<Index>(j)) = 1.0;
  }
  return out;
}

Matrix algebraic_response(const Linearization& lin, const Matrix& phi_x) {
  if (lin.g.dy.rows() == 0) return Matrix(0, phi_x.cols());
  Factorization lu(lin.g.dy);
  if (lu.singular()) throw SensitivityError("singular algebraic Jacobian in sensitivity solve");
  return -lu.solve(lin.g.dx * phi_x);
}

}  // namespace

std::optional<Index> SensitivityTrajectory::position(Index column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) return std::nullopt;
  return static_cast<Index>(it - columns.begin());
}

ColumnSet all_columns(const Dimensions& dims) {
  ColumnSet cols(static_cast<std::size_t>(dims.augmented()));
  for (Index i = 0; i < dims.augmented(); ++i) cols[static_cast<std::size_t>(i)] = i;
  return cols;
}

ColumnSet lambda_columns(const Dimensions& dims) {
  ColumnSet cols;
  for (Index i = dims.lambda_offset(); i < dims.augmented(); ++i) cols.push_back(i);
  return cols;
}

SensitivityPair init_sensitivities(const HybridModel& model, ModeId mode, const Vector& x0,
                                   const AlgebraicState& y0, const ColumnSet& columns) {
  const Linearization lin = linearize(model, mode, x0, y0);
  SensitivityPair pair;
  pair.phi_x = selected_identity(model.dims().augmented(), columns);
  pair.phi_y = algebraic_response(lin, pair.phi_x);
  return pair;
}

SensitivityPair propagate_step(const HybridModel& model, const StepRecord& step,
                               const SensitivityPair& pair) {
  const Dimensions& d = model.dims();
  const Index n = d.n;
  const Index m = d.m;
  const Index rest = d.l + d.p;
  const Index c = pair.phi_x.cols();
  const double half = 0.5 * step.dt;

  // z and lambda rows are constant over a smooth interval.
  const Matrix phi_rest = pair.phi_x.bottomRows(rest);

  Matrix rhs(n + m, c);
  rhs.topRows(n) = pair.phi_x.topRows(n) +
                   half * (step.start.f.dx.topRows(n) * pair.phi_x +
                           step.start.f.dy.topRows(n) * pair.phi_y) +
                   half * step.end.f.dx.topRightCorner(n, rest) * phi_rest;
  rhs.bottomRows(m) = -step.end.g.dx.rightCols(rest) * phi_rest;

  if (step.lu.singular()) {
    throw SensitivityError("singular Newton matrix at t=" + std::to_string(step.t1));
  }
  const Matrix sol = step.lu.solve(rhs);

  SensitivityPair next;
  next.phi_x.resize(d.augmented(), c);
  next.phi_x.topRows(n) = sol.topRows(n);
  next.phi_x.bottomRows(rest) = phi_rest;
  next.phi_y = sol.bottomRows(m);
  return next;
}

Matrix jump_x(const Matrix& phi_x_minus, const Vector& f_minus, const Vector& f_plus,
              const RowVector& grad_tj) {
  if (f_minus.size() != phi_x_minus.rows() || f_plus.size() != phi_x_minus.rows() ||
      grad_tj.size() != phi_x_minus.cols()) {
    throw StructuralError("jump_x dimension mismatch");
  }
  return phi_x_minus - (f_plus - f_minus) * grad_tj;
}

Matrix jump_y(const Linearization& post, const Matrix& phi_x_plus) {
  return algebraic_response(post, phi_x_plus);
}

Matrix jump_y(const HybridModel& model, ModeId post_mode, const Vector& x,
              const AlgebraicState& y_plus, const Matrix& phi_x_plus) {
  return jump_y(linearize(model, post_mode, x, y_plus), phi_x_plus);
}

ParamJumpBlocks param_jump_blocks(const Dimensions& dims, const JunctionRecord& junction,
                                  const RowVector& grad_tj, const ColumnSet& columns) {
  if (grad_tj.size() != static_cast<Index>(columns.size())) {
    throw StructuralError("junction-time gradient has wrong length");
  }
  ParamJumpBlocks blocks;
  blocks.f_star = (junction.f_minus - junction.f_plus).head(dims.n);
  blocks.jump_term = Matrix::Zero(dims.augmented(), grad_tj.size());
  blocks.jump_term.topRows(dims.n) = blocks.f_star * grad_tj;

  std::vector<Index> lambda_pos;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= dims.lambda_offset()) lambda_pos.push_back(static_cast<Index>(j));
  }
  blocks.lambda_columns.resize(dims.n, static_cast<Index>(lambda_pos.size()));
  for (std::size_t k = 0; k < lambda_pos.size(); ++k) {
    blocks.lambda_columns.col(static_cast<Index>(k)) =
        blocks.jump_term.col(lambda_pos[k]).head(dims.n);
  }
  blocks.identity = (blocks.jump_term.array() == 0.0).all();
  return blocks;
}

SensitivityPair apply_param_jump(const Dimensions& dims, const ParamJumpBlocks& blocks,
                                 const SensitivityPair& minus, const Linearization& post,
                                 const ColumnSet& columns) {
  SensitivityPair plus;
  plus.phi_x = minus.phi_x + blocks.jump_term;
  if (!parameter_rows_intact(dims, plus.phi_x, columns)) {
    throw SensitivityError("z/lambda sensitivity rows left the identity pattern at a junction");
  }
  plus.phi_y = jump_y(post, plus.phi_x);
  return plus;
}

bool parameter_rows_intact(const Dimensions& dims, const Matrix& phi_x, const ColumnSet& columns) {
  const Index rest = dims.l + dims.p;
  const Matrix expected = selected_identity(dims.augmented(), columns).bottomRows(rest);
  return (phi_x.bottomRows(rest).array() == expected.array()).all();
}

SensitivityRecorder::SensitivityRecorder(ColumnSet columns) {
  result_.columns = std::move(columns);
}

void SensitivityRecorder::on_start(const HybridModel& model, double t0, const Vector& x0,
                                   const AlgebraicState& y0, const Linearization& lin) {
  result_.times.clear();
  result_.pairs.clear();
  result_.jumps.clear();
  SensitivityPair pair;
  pair.phi_x = selected_identity(model.dims().augmented(), result_.columns);
  pair.phi_y = algebraic_response(lin, pair.phi_x);
  (void)x0;
  (void)y0;
  result_.times.push_back(t0);
  result_.pairs.push_back(std::move(pair));
}

void SensitivityRecorder::on_step(const HybridModel& model, const StepRecord& step) {
  SensitivityPair next = propagate_step(model, step, result_.pairs.back());
  result_.times.push_back(step.t1);
  result_.pairs.push_back(std::move(next));
}

void SensitivityRecorder::on_junction(const HybridModel& model, const EventSpec& event,
                                      const JunctionRecord& junction, const Vector& x,
                                      const Linearization& post) {
  (void)x;
  if (junction.reset || event.kind == EventKind::reset) {
    throw SensitivityError("sensitivity propagation through reset events is not supported");
  }
  if (!event.time_triggered()) {
    throw SensitivityError("junction-time sensitivity of state-triggered events is not supported");
  }
  const Dimensions& d = model.dims();
  const SensitivityPair& minus = result_.pairs.back();
  // fixed-time event: dt_J/dx0 = 0
  const RowVector grad_tj = RowVector::Zero(static_cast<Index>(result_.columns.size()));
  SensitivityPair plus;
  plus.phi_x = jump_x(minus.phi_x, junction.f_minus, junction.f_plus, grad_tj);
  if (!parameter_rows_intact(d, plus.phi_x, result_.columns)) {
    throw SensitivityError("z/lambda sensitivity rows left the identity pattern at a junction");
  }
  plus.phi_y = jump_y(post, plus.phi_x);
  result_.jumps.push_back(JumpRecord{junction.sample, minus, plus});
  result_.times.push_back(junction.t_j);
  result_.pairs.push_back(std::move(plus));
}

SimulationWithSensitivity simulate_with_sensitivities(const HybridModel& model, const Vector& x0,
                                                      const EventSchedule& schedule,
                                                      const IntegratorConfig& config,
                                                      const ColumnSet& columns,
                                                      const std::optional<AlgebraicState>& y_guess) {
  SensitivityRecorder recorder(columns);
  SimulationWithSensitivity out;
  out.trajectory = simulate(model, x0, schedule, config, y_guess, &recorder);
  out.sensitivity = recorder.take();
  return out;
}

FdColumn fd_sensitivity(const HybridModel& model, const EventSchedule& schedule,
                        const IntegratorConfig& config, const Vector& x0, Index column, double h,
                        const std::optional<AlgebraicState>& y_guess) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (column < 0 || column >= x0.size()) throw StructuralError("FD column out of range");
  Vector xp = x0;
  Vector xm = x0;
  xp[column] += h;
  xm[column] -= h;
  const Trajectory up = simulate(model, xp, schedule, config, y_guess);
  const Trajectory dn = simulate(model, xm, schedule, config, y_guess);
  if (up.size() != dn.size()) throw SensitivityError("perturbed trajectories differ in length");

  const Index samples = static_cast<Index>(up.size());
  FdColumn out;
  out.column = column;
  out.dx.resize(x0.size(), samples);
  out.dy.resize(model.dims().m, samples);
  for (Index k = 0; k < samples; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    out.dx.col(k) = (up.states[ks] - dn.states[ks]) / (2.0 * h);
    out.dy.col(k) = (up.algebraics[ks] - dn.algebraics[ks]) / (2.0 * h);
  }
  return out;
}

std::vector<SensitivityCheck> compare_with_fd(const HybridModel& model,
                                              const EventSchedule& schedule,
                                              const IntegratorConfig& config, const Vector& x0,
                                              const ColumnSet& columns,
                                              const std::vector<Index>& rows,
                                              const FdComparisonOptions& options,
                                              const std::optional<AlgebraicState>& y_guess) {
  const SimulationWithSensitivity run =
      simulate_with_sensitivities(model, x0, schedule, config, columns, y_guess);
  const SensitivityTrajectory& sens = run.sensitivity;

  std::vector<SensitivityCheck> checks;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const FdColumn fd = fd_sensitivity(model, schedule, config, x0, columns[j], options.h, y_guess);
    if (fd.dx.cols() != static_cast<Index>(sens.size())) {
      throw SensitivityError("FD and propagated sensitivities are sampled differently");
    }
    SensitivityCheck check;
    check.column = columns[j];
    for (std::size_t k = 0; k < sens.size(); ++k) {
      const double t = sens.times[k];
      if (t < options.t_begin || t > options.t_end) continue;
      for (Index row : rows) {
        const double ref = fd.dx(row, static_cast<Index>(k));
        const double got = sens.pairs[k].phi_x(row, static_cast<Index>(j));
        check.max_abs_fd = std::max(check.max_abs_fd, std::abs(ref));
        if (std::abs(ref) <= options.threshold) continue;
        check.max_rel_error = std::max(check.max_rel_error, std::abs(got - ref) / std::abs(ref));
        ++check.compared;
      }
    }
    checks.push_back(check);
  }
  return checks;
}

void write_sensitivity_csv(const std::string& path, const SensitivityTrajectory& sens,
                           const std::vector<SensitivityChannel>& channels) {
  std::vector<std::string> header{"t"};
  std::vector<Index> positions;
  for (const auto& ch : channels) {
    auto pos = sens.position(ch.column);
    if (!pos) throw StructuralError("sensitivity column for '" + ch.name + "' was not propagated");
    positions.push_back(*pos);
    header.push_back(ch.name);
  }
  CsvWriter csv(path, "tsopt-sensitivity", 1, header);
  for (std::size_t k = 0; k < sens.size(); ++k) {
    csv.cell(sens.times[k]);
    for (std::size_t c = 0; c < channels.size(); ++c) {
      csv.cell(sens.pairs[k].phi_x(channels[c].row, positions[c]));
    }
    csv.end_row();
  }
}

}  // namespace tsopt
