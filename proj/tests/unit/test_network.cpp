#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_models.hpp"
#include "tsopt/errors.hpp"
#include "tsopt/network.hpp"

using namespace tsopt;
using namespace tsopt::testing;

namespace {

NetworkCase two_bus() {
  NetworkCase net;
  net.name = "two-bus";
  net.buses = {Bus{1, BusType::slack, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}, Bus{2, BusType::pq, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}};
  net.branches = {Branch{1, 2, 0.0, 0.1, 0.0}};
  net.generators = {GeneratorParams{1, 1, 5.0, 0.0, 1.0, 0.2, 0.9, 5.0, std::nullopt}};
  return net;
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace

TEST_SUITE("psys_models") {
  TEST_CASE("two-bus admittance matrix") {
    const ComplexMatrix y = build_ybus(two_bus());
    CHECK(std::abs(y(0, 0) - Complex(0.0, -10.0)) <= 1e-12);
    CHECK(std::abs(y(1, 1) - Complex(0.0, -10.0)) <= 1e-12);
    CHECK(std::abs(y(0, 1) - Complex(0.0, 10.0)) <= 1e-12);
    CHECK(std::abs(y(1, 0) - Complex(0.0, 10.0)) <= 1e-12);
  }

  TEST_CASE("9-bus admittance matrix is symmetric and its row sums are the shunts") {
    const NetworkCase net = wscc9();
    const ComplexMatrix y = build_ybus(net);
    CHECK((y - y.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    ComplexVector shunt = ComplexVector::Zero(9);
    for (const Branch& br : net.branches) {
      shunt[net.bus_index(br.from)] += Complex(0.0, br.b / 2.0);
      shunt[net.bus_index(br.to)] += Complex(0.0, br.b / 2.0);
    }
    CHECK((y.rowwise().sum() - shunt).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("a fault shunt changes one diagonal entry") {
    const NetworkCase net = wscc9();
    const ComplexMatrix y = build_ybus(net);
    ComplexMatrix yf = y;
    add_shunt(yf, net.bus_index(7), Complex(1e4, 0.0));
    const ComplexMatrix diff = yf - y;
    CHECK(std::abs(diff(net.bus_index(7), net.bus_index(7)) - Complex(1e4, 0.0)) <= 1e-9);
    CHECK((diff.array() != Complex(0.0, 0.0)).count() == 1);
  }

  TEST_CASE("zero-impedance branches are rejected") {
    NetworkCase net = two_bus();
    net.branches[0].x = 0.0;
    CHECK_THROWS_AS(build_ybus(net), ConfigError);
  }

  TEST_CASE("an unloaded system stays flat") {
    NetworkCase net = two_bus();
    const PowerFlowResult pf = solve_power_flow(net);
    CHECK(pf.vm.isApprox(Vector::Ones(2)));
    CHECK(pf.va.cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("9-bus power flow matches the published solution") {
    const NetworkCase net = wscc9();
    const PowerFlowResult pf = solve_power_flow(net);
    CHECK(pf.iterations <= 10);
    CHECK(pf.mismatch <= 1e-8);
    CHECK(pf.vm[net.bus_index(1)] == doctest::Approx(1.04).epsilon(1e-12));
    CHECK(pf.vm[net.bus_index(2)] == doctest::Approx(1.025).epsilon(1e-12));
    CHECK(std::abs(deg(pf.va[net.bus_index(2)]) - 9.28) <= 0.01);
    CHECK(std::abs(deg(pf.va[net.bus_index(3)]) - 4.66) <= 0.01);
    const std::pair<int, double> vm[] = {{4, 1.026}, {5, 0.996}, {6, 1.013}, {7, 1.026}, {8, 1.016}, {9, 1.032}};
    for (const auto& [bus, v] : vm) CHECK(std::abs(pf.vm[net.bus_index(bus)] - v) <= 1e-3);
    CHECK(std::abs(pf.p_inj[net.bus_index(1)] - 0.716) <= 1e-3);
    CHECK(std::abs(pf.q_inj[net.bus_index(1)] - 0.270) <= 1e-3);
  }

  TEST_CASE("independent mismatch of the 9-bus solution") {
    const NetworkCase net = wscc9();
    const PowerFlowResult pf = solve_power_flow(net);
    const ComplexVector v = pf.voltages();
    const ComplexVector s = v.cwiseProduct(build_ybus(net).conjugate() * v.conjugate());
    double worst = 0.0;
    for (Index i = 0; i < 9; ++i) {
      const Bus& b = net.buses[static_cast<std::size_t>(i)];
      worst = std::max(worst, std::abs(s[i] - Complex(pf.p_inj[i], pf.q_inj[i])));
      if (b.type == BusType::pq) worst = std::max(worst, std::abs(s[i] + Complex(b.p_load, b.q_load)));
      if (b.type == BusType::pv) worst = std::max(worst, std::abs(s[i].real() - (b.p_gen - b.p_load)));
    }
    CHECK(worst <= 1e-8);
    CHECK(power_mismatch(net, v).segment(3, 6).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("an infeasible load does not converge") {
    NetworkCase net = wscc9();
    for (Bus& b : net.buses) {
      b.p_load *= 100.0;
      b.q_load *= 100.0;
    }
    CHECK_THROWS_AS(solve_power_flow(net), PowerFlowError);
  }

  TEST_CASE("case parsing and validation") {
    CHECK_THROWS_AS(parse_case("{"), ConfigError);
    CHECK_THROWS_AS(parse_case(R"({"schema_version": 2, "buses": [], "branches": [], "generators": []})"), ConfigError);
    CHECK_THROWS_AS(parse_case(R"({"buses": [], "branches": [], "generators": []})"), ConfigError);
    CHECK_THROWS_AS(load_case_file("/nonexistent/case.json"), IoError);

    NetworkCase net = wscc9();
    net.buses[1].type = BusType::slack;
    CHECK_THROWS_AS(net.validate(), ConfigError);

    net = wscc9();
    net.branches.erase(net.branches.begin());
    CHECK_THROWS_AS(net.validate(), ConfigError);

    net = wscc9();
    net.generators[1].xd_prime = 2.0;
    CHECK_THROWS_AS(net.validate(), ConfigError);

    net = wscc9();
    net.generators[2].bus = 5;
    CHECK_THROWS_AS(net.validate(), ConfigError);

    CHECK_THROWS_AS(net.bus_index(42), ConfigError);
    CHECK_THROWS_AS(net.generator(42), ConfigError);
  }
}
