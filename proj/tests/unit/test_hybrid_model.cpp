#include <doctest.h>

#include <random>

#include "test_models.hpp"
#include "tsopt/errors.hpp"

using namespace tsopt;
using namespace tsopt::testing;

TEST_SUITE("hybrid_dad") {
  TEST_CASE("eval_f pads z and lambda rows with exact zeros") {
    HybridModel model = tap_model();
    const Vector f = model.eval_f(Vector{{0.7, 3.0}}, Vector{{2.1}});
    REQUIRE(f.size() == 2);
    CHECK(f[0] == doctest::Approx(-0.7));
    CHECK(f[1] == 0.0);

    HybridModel growth = scalar_growth_model();
    const Vector g = growth.eval_f(Vector{{2.0, 0.5}}, Vector{{2.0}});
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);
  }

  TEST_CASE("augmented state segments") {
    const AugmentedState s = AugmentedState::from_parts(Vector{{1.0, 2.0}}, Vector{{3.0}}, Vector{{4.0, 5.0}});
    CHECK(s.dims().n == 2);
    CHECK(s.dims().l == 1);
    CHECK(s.dims().p == 2);
    CHECK(s.dims().augmented() == 5);
    CHECK(s.z()[0] == 3.0);
    CHECK(s.lambda()[1] == 5.0);
    CHECK_THROWS_AS(AugmentedState(Dimensions{2, 1, 2, 0}, Vector::Zero(4)), StructuralError);
  }

  TEST_CASE("dimension mismatch is a structural error") {
    HybridModel model = scalar_growth_model();
    CHECK_THROWS_AS(model.eval_f(Vector{{1.0}}, Vector{{1.0}}), StructuralError);
    CHECK_THROWS_AS(model.eval_f(Vector{{1.0, 2.0}}, Vector::Zero(2)), StructuralError);
    CHECK_THROWS_AS(model.eval_g(kBaseMode, Vector{{1.0, 2.0, 3.0}}, Vector{{1.0}}), StructuralError);
  }

  TEST_CASE("eval_g selects the mode and rejects unknown ones") {
    HybridModel model = switched_linear_model();
    const Vector x{{2.0, -1.0, -3.0}};
    CHECK(model.eval_g(0, x, Vector{{1.0}})[0] == doctest::Approx(3.0));
    CHECK(model.eval_g(1, x, Vector{{1.0}})[0] == doctest::Approx(7.0));
    CHECK_THROWS_AS(model.eval_g(5, x, Vector{{1.0}}), StructuralError);
  }

  TEST_CASE("a mode returning the wrong residual length is rejected") {
    HybridModel model(Dimensions{1, 0, 0, 2});
    model.set_differential([](const Vector&, const Vector&) { return Vector::Zero(1); },
                           [](const Vector&, const Vector&) {
                             return JacobianBlocks{Matrix::Zero(1, 1), Matrix::Zero(1, 2)};
                           });
    model.add_mode(kBaseMode, AlgebraicMode{[](const Vector&, const Vector&) { return Vector::Zero(1); },
                                            [](const Vector&, const Vector&) {
                                              return JacobianBlocks{Matrix::Zero(2, 1), Matrix::Identity(2, 2)};
                                            }});
    CHECK_THROWS_AS(model.eval_g(kBaseMode, Vector::Zero(1), Vector::Zero(2)), StructuralError);
  }

  TEST_CASE("time-triggered values are t_J - t") {
    HybridModel model = scalar_growth_model();
    const EventSpec ev = make_switching_event(0.1, 0, 0);
    const Vector x{{1.0, 1.0}};
    const Vector y{{1.0}};
    CHECK(model.eval_trigger(ev, 0.05, x, y) == doctest::Approx(0.05));
    CHECK(model.eval_trigger(ev, 0.1, x, y) == 0.0);
    CHECK(model.eval_trigger(ev, 0.2, x, y) == doctest::Approx(-0.1));
  }

  TEST_CASE("state-triggered events evaluate their hypersurface") {
    HybridModel model = scalar_growth_model();
    model.add_hypersurface(7, [](double, const Vector& x, const Vector&) { return x[0] - 0.5; });
    EventSpec ev;
    ev.trigger = StateTrigger{7};
    CHECK(model.eval_trigger(ev, 0.0, Vector{{0.75, 1.0}}, Vector{{0.75}}) == doctest::Approx(0.25));
    ev.trigger = StateTrigger{8};
    CHECK_THROWS_AS(model.eval_trigger(ev, 0.0, Vector{{0.75, 1.0}}, Vector{{0.75}}), StructuralError);
  }

  TEST_CASE("reset maps") {
    HybridModel model = tap_model();
    const Vector x{{0.4, 3.0}};
    const Vector y{{1.2}};
    CHECK(model.apply_reset(0, x, y)[0] == 4.0);
    CHECK(model.apply_reset(1, x, y)[0] == 3.0);
    CHECK_THROWS_AS(model.apply_reset(9, x, y), StructuralError);
  }

  TEST_CASE("a reset event leaves x_c continuous and steps z") {
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
    const Trajectory traj = simulate(model, Vector{{1.0, 3.0}}, schedule, config, Vector{{3.0}});
    REQUIRE(traj.junctions.size() == 1);
    const std::size_t k = traj.junctions[0].sample;
    CHECK(traj.times[k] == traj.times[k + 1]);
    CHECK(traj.states[k][0] == traj.states[k + 1][0]);
    CHECK(traj.states[k][1] == 3.0);
    CHECK(traj.states[k + 1][1] == 4.0);
    CHECK(traj.algebraics[k + 1][0] == doctest::Approx(4.0 * traj.states[k][0]).epsilon(1e-12));
  }

  TEST_CASE("analytic Jacobians agree with central differences") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    HybridModel model = switched_linear_model();
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x{{u(rng), u(rng), u(rng)}};
      const Vector y{{u(rng)}};
      for (ModeId mode : {0, 1}) CHECK(check_jacobians(model, mode, x, y).max_error() <= 1e-5);
    }
  }

  TEST_CASE("9-bus Jacobians agree with central differences away from equilibrium") {
    PowerSystemModel ps = build_hybrid_model(wscc9(), bus_fault(9), reference_pss());
    std::mt19937 rng(7);
    std::normal_distribution<double> n(0.0, 0.05);
    for (int trial = 0; trial < 5; ++trial) {
      Vector x = ps.op.x0.values();
      for (Index i = 0; i < ps.layout.dims.n; ++i) x[i] += n(rng);
      Vector y = ps.op.y0;
      for (Index i = 0; i < y.size(); ++i) y[i] += n(rng);
      for (ModeId mode : ps.model.modes()) {
        const JacobianCheck c = check_jacobians(ps.model, mode, x, y);
        CHECK(c.f_error <= 1e-5);
        CHECK(c.g_error <= 1e-5);
      }
    }
  }

  TEST_CASE("missing evaluators are rejected") {
    HybridModel model(Dimensions{1, 0, 0, 1});
    CHECK_THROWS_AS(model.add_mode(kBaseMode, AlgebraicMode{}), StructuralError);
  }
}
