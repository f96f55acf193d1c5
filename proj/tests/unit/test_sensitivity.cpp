#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_models.hpp"
#include "tsopt/errors.hpp"
#include "tsopt/sensitivity.hpp"

using namespace tsopt;
using namespace tsopt::testing;

namespace {

HybridModel linear_constraint_model(double slope) {
  HybridModel model(Dimensions{1, 0, 0, 1});
  model.set_differential([](const Vector& x, const Vector&) { return Vector::Constant(1, -x[0]); },
                         [](const Vector&, const Vector&) {
                           return JacobianBlocks{Matrix::Constant(1, 1, -1.0), Matrix::Zero(1, 1)};
                         });
  model.add_mode(kBaseMode, AlgebraicMode{
                                [slope](const Vector& x, const Vector& y) { return Vector::Constant(1, y[0] - slope * x[0]); },
                                [slope](const Vector&, const Vector&) {
                                  return JacobianBlocks{Matrix::Constant(1, 1, -slope), Matrix::Identity(1, 1)};
                                }});
  return model;
}

EventSchedule switched_schedule(double tj) {
  EventSchedule s;
  s.events.push_back(make_switching_event(tj, 0, 1, "switch"));
  return s;
}

}  // namespace

TEST_SUITE("traj_sens") {
  TEST_CASE("initial sensitivities") {
    HybridModel model = linear_constraint_model(2.0);
    const SensitivityPair p = init_sensitivities(model, kBaseMode, Vector{{3.0}}, Vector{{6.0}}, all_columns(model.dims()));
    CHECK(p.phi_x == Matrix::Identity(1, 1));
    CHECK(p.phi_y(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("9-bus initial sensitivities satisfy the linearized constraint") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    const ColumnSet cols = all_columns(ps.layout.dims);
    const SensitivityPair p = init_sensitivities(ps.model, kBaseMode, ps.op.x0.values(), ps.op.y0, cols);
    CHECK(p.phi_x == Matrix::Identity(ps.layout.dims.augmented(), ps.layout.dims.augmented()));
    const Linearization lin = linearize(ps.model, kBaseMode, ps.op.x0.values(), ps.op.y0);
    CHECK((lin.g.dx * p.phi_x + lin.g.dy * p.phi_y).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("column selection") {
    const Dimensions d{3, 1, 2, 4};
    CHECK(all_columns(d) == ColumnSet{0, 1, 2, 3, 4, 5});
    CHECK(lambda_columns(d) == ColumnSet{4, 5});
  }

  TEST_CASE("sensitivity to a growth rate matches t x(t)") {
    HybridModel model = scalar_growth_model();
    IntegratorConfig config;
    config.dt = 1e-3;
    config.tf = 1.0;
    const double lambda = -0.7;
    const SimulationWithSensitivity run =
        simulate_with_sensitivities(model, Vector{{1.0, lambda}}, EventSchedule{}, config, lambda_columns(model.dims()), Vector{{1.0}});
    double worst = 0.0;
    for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
      const double t = run.trajectory.times[k];
      worst = std::max(worst, std::abs(run.sensitivity.pairs[k].phi_x(0, 0) - t * std::exp(lambda * t)));
    }
    CHECK(worst <= 1e-5);

    const FdColumn fd = fd_sensitivity(model, EventSchedule{}, config, Vector{{1.0, lambda}}, 1, 1e-6, Vector{{1.0}});
    double fd_worst = 0.0;
    for (Index k = 0; k < fd.dx.cols(); ++k) {
      const double t = run.trajectory.times[static_cast<std::size_t>(k)];
      fd_worst = std::max(fd_worst, std::abs(fd.dx(0, k) - t * std::exp(lambda * t)));
    }
    CHECK(fd_worst <= 1e-5);
  }

  TEST_CASE("fd_sensitivity rejects a zero perturbation") {
    HybridModel model = scalar_growth_model();
    CHECK_THROWS_AS(fd_sensitivity(model, EventSchedule{}, IntegratorConfig{}, Vector{{1.0, -1.0}}, 1, 0.0, Vector{{1.0}}),
                    ConfigError);
  }

  TEST_CASE("jump_x") {
    const Matrix phi = (Matrix(2, 2) << 1.0, 2.0, 3.0, 4.0).finished();
    const Vector fm{{1.0, -1.0}};
    const Vector fp{{0.5, 2.0}};
    CHECK(jump_x(phi, fm, fp, RowVector::Zero(2)) == phi);
    CHECK(jump_x(phi, fm, fm, RowVector{{0.3, -0.2}}) == phi);
    const RowVector grad{{0.3, -0.2}};
    const Matrix delta = jump_x(phi, fm, fp, grad) - phi;
    CHECK((delta + (fp - fm) * grad).norm() <= 1e-15);
    Eigen::JacobiSVD<Matrix> svd(delta);
    CHECK(svd.singularValues()[1] <= 1e-15);
  }

  TEST_CASE("jump_y solves the post-event constraint") {
    HybridModel model = linear_constraint_model(3.0);
    const Matrix py = jump_y(model, kBaseMode, Vector{{1.0}}, Vector{{3.0}}, Matrix::Identity(1, 1));
    CHECK(py(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  }

  TEST_CASE("identity event keeps Phi_y") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), std::nullopt, reference_pss());
    const ColumnSet cols = lambda_columns(ps.layout.dims);
    const SensitivityPair p = init_sensitivities(ps.model, kBaseMode, ps.op.x0.values(), ps.op.y0, cols);
    const Matrix py = jump_y(ps.model, kBaseMode, ps.op.x0.values(), ps.op.y0, p.phi_x);
    CHECK((py - p.phi_y).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("9-bus fault-on jump satisfies the faulted linearization") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    IntegratorConfig config;
    config.tf = 0.2;
    const SimulationWithSensitivity run = simulate_with_sensitivities(
        ps.model, ps.op.x0.values(), ps.schedule, config, lambda_columns(ps.layout.dims), ps.op.y0);
    REQUIRE(run.sensitivity.jumps.size() == 2);
    const JumpRecord& j = run.sensitivity.jumps[0];
    const JunctionRecord& junction = run.trajectory.junctions[0];
    const Vector& x = run.trajectory.states[junction.sample];
    const Linearization post = linearize(ps.model, kFaultedMode, x, junction.y_plus);
    CHECK((post.g.dx * j.plus.phi_x + post.g.dy * j.plus.phi_y).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(j.plus.phi_x == j.minus.phi_x);
  }

  TEST_CASE("parameter jump blocks") {
    const Dimensions d{2, 1, 2, 1};
    JunctionRecord junction;
    junction.f_minus = Vector{{1.0, 2.0, 0.0, 0.0, 0.0}};
    junction.f_plus = Vector{{0.5, -1.0, 0.0, 0.0, 0.0}};
    const ColumnSet cols = all_columns(d);

    const ParamJumpBlocks zero = param_jump_blocks(d, junction, RowVector::Zero(5), cols);
    CHECK(zero.identity);
    CHECK(zero.jump_term.isZero(0.0));
    CHECK(zero.f_star.isApprox(Vector{{0.5, 3.0}}));

    JunctionRecord flat = junction;
    flat.f_plus = flat.f_minus;
    CHECK(param_jump_blocks(d, flat, RowVector{{0.1, 0.2, 0.3, 0.4, 0.5}}, cols).identity);

    const RowVector grad{{0.1, 0.2, 0.3, 0.4, 0.5}};
    const ParamJumpBlocks b = param_jump_blocks(d, junction, grad, cols);
    CHECK_FALSE(b.identity);
    CHECK(b.jump_term.bottomRows(3).isZero(0.0));
    CHECK((b.jump_term.topRows(2) - b.f_star * grad).norm() <= 1e-15);
    CHECK(b.lambda_columns == b.jump_term.block(0, 3, 2, 2));
  }

  TEST_CASE("zero-gradient block update equals the jump_x / jump_y composition") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    const Dimensions& d = ps.layout.dims;
    const ColumnSet cols = all_columns(d);
    const Vector x = ps.op.x0.values();
    const SensitivityPair minus = init_sensitivities(ps.model, kBaseMode, x, ps.op.y0, cols);
    const JunctionRecord j = switch_mode(ps.model, ps.schedule.events[0], x, ps.op.y0, 0.0, IntegratorConfig{});
    const Linearization post = linearize(ps.model, kFaultedMode, x, j.y_plus);
    const ParamJumpBlocks blocks = param_jump_blocks(d, j, RowVector::Zero(d.augmented()), cols);
    const SensitivityPair plus = apply_param_jump(d, blocks, minus, post, cols);
    const Matrix px = jump_x(minus.phi_x, j.f_minus, j.f_plus, RowVector::Zero(d.augmented()));
    CHECK(plus.phi_x == px);
    CHECK(plus.phi_y == jump_y(post, px));
    CHECK(parameter_rows_intact(d, plus.phi_x, cols));
  }

  TEST_CASE("apply_param_jump refuses a disturbed parameter block") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    const Dimensions& d = ps.layout.dims;
    const ColumnSet cols = lambda_columns(d);
    const Vector x = ps.op.x0.values();
    SensitivityPair minus = init_sensitivities(ps.model, kBaseMode, x, ps.op.y0, cols);
    minus.phi_x(d.lambda_offset(), 0) = 2.0;
    const JunctionRecord j = switch_mode(ps.model, ps.schedule.events[0], x, ps.op.y0, 0.0, IntegratorConfig{});
    const Linearization post = linearize(ps.model, kFaultedMode, x, j.y_plus);
    const ParamJumpBlocks blocks = param_jump_blocks(d, j, RowVector::Zero(static_cast<Index>(cols.size())), cols);
    CHECK_THROWS_AS(apply_param_jump(d, blocks, minus, post, cols), SensitivityError);
  }

  TEST_CASE("switched linear system matches the closed form across the junction") {
    HybridModel model = switched_linear_model();
    const SwitchedLinearExact exact{1.0, -1.0, -2.0, 0.5};
    IntegratorConfig config;
    config.dt = 1e-3;
    config.tf = 1.0;
    config.newton_tol = 1e-12;
    const SimulationWithSensitivity run = simulate_with_sensitivities(
        model, Vector{{exact.x0, exact.a0, exact.a1}}, switched_schedule(exact.tj), config,
        all_columns(model.dims()), Vector{{0.0}});
    const SensitivityPair& last = run.sensitivity.pairs.back();
    CHECK(run.trajectory.times.back() == doctest::Approx(1.0));
    CHECK(std::abs(run.trajectory.states.back()[0] - exact.x(1.0)) <= 1e-6);
    CHECK(std::abs(last.phi_x(0, 0) - exact.dx_dx0(1.0)) <= 1e-6);
    CHECK(std::abs(last.phi_x(0, 1) - exact.dx_da0(1.0)) <= 1e-6);
    CHECK(std::abs(last.phi_x(0, 2) - exact.dx_da1(1.0)) <= 1e-6);
    CHECK(parameter_rows_intact(model.dims(), last.phi_x, run.sensitivity.columns));
  }

  TEST_CASE("9-bus propagated sensitivities keep the constraint and parameter rows") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    IntegratorConfig config;
    config.tf = 2.0;
    const SimulationWithSensitivity run = simulate_with_sensitivities(
        ps.model, ps.op.x0.values(), ps.schedule, config, lambda_columns(ps.layout.dims), ps.op.y0);
    REQUIRE(run.sensitivity.times == run.trajectory.times);
    double worst = 0.0;
    bool intact = true;
    for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
      const Linearization lin =
          linearize(ps.model, run.trajectory.modes[k], run.trajectory.states[k], run.trajectory.algebraics[k]);
      const SensitivityPair& p = run.sensitivity.pairs[k];
      worst = std::max(worst, (lin.g.dx * p.phi_x + lin.g.dy * p.phi_y).cwiseAbs().maxCoeff());
      intact = intact && parameter_rows_intact(ps.layout.dims, p.phi_x, run.sensitivity.columns);
    }
    CHECK(worst <= 1e-6);
    CHECK(intact);
  }

  TEST_CASE("9-bus dω/dKs of G2 agrees with finite differences") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    FdComparisonOptions options;
    options.t_begin = 0.2;
    options.t_end = 10.0;
    const Index ks = *ps.layout.machine(2).ks;
    const std::vector<SensitivityCheck> checks = compare_with_fd(
        ps.model, ps.schedule, IntegratorConfig{}, ps.op.x0.values(), {ks}, {ps.layout.machine(2).omega}, options, ps.op.y0);
    REQUIRE(checks.size() == 1);
    CHECK(checks[0].compared > 100);
    CHECK(checks[0].max_rel_error <= 1e-3);
  }

  TEST_CASE("reset events are rejected by the sensitivity recorder") {
    HybridModel model = tap_model();
    EventSchedule schedule;
    EventSpec ev;
    ev.kind = EventKind::reset;
    ev.trigger = TimeTrigger{0.5};
    ev.reset = 0;
    schedule.events.push_back(ev);
    IntegratorConfig config;
    config.dt = 0.1;
    config.tf = 1.0;
    CHECK_THROWS_AS(simulate_with_sensitivities(model, Vector{{1.0, 3.0}}, schedule, config,
                                                all_columns(model.dims()), Vector{{3.0}}),
                    SensitivityError);
  }

  TEST_CASE("sensitivity CSV export") {
    HybridModel model = scalar_growth_model();
    IntegratorConfig config;
    config.tf = 0.1;
    const SimulationWithSensitivity run =
        simulate_with_sensitivities(model, Vector{{1.0, -1.0}}, EventSchedule{}, config, lambda_columns(model.dims()), Vector{{1.0}});
    const auto path = std::filesystem::temp_directory_path() / "tsopt_sens.csv";
    write_sensitivity_csv(path.string(), run.sensitivity, {{"dx/dlambda", 0, 1}});
    std::ifstream in(path);
    std::string schema, header;
    std::getline(in, schema);
    std::getline(in, header);
    CHECK(schema == "# tsopt-sensitivity v1");
    CHECK(header == "t,dx/dlambda");
    CHECK_THROWS_AS(write_sensitivity_csv(path.string(), run.sensitivity, {{"bad", 0, 0}}), StructuralError);
  }
}
