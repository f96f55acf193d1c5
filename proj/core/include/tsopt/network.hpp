#pragma once

/**
 * @file network.hpp
 * @brief Network case data, nodal admittance matrix and Newton-Raphson power flow.
 *
 * All quantities are per unit on the case MVA base; angles in radians.
 */

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "tsopt/types.hpp"

namespace tsopt {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

enum class BusType { slack, pv, pq };

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double p_load = 0.0;
  double q_load = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;
  double v_set = 1.0;  ///< voltage magnitude setpoint (slack/PV)
  double p_gen = 0.0;  ///< scheduled generation (PV)
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  ///< total line charging susceptance
};

struct ExciterParams {
  double ka = 0.0;
  double ta = 0.0;
  double v_ref = 0.0;  ///< set at initialization

  void validate() const;
};

struct PssParams {
  double ks = 0.0;
  double tw = 10.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double t4 = 0.0;

  void validate() const;
  /// Lead-lag pairs tied the way the tuner parameterizes them (T3 = T1, T4 = T2).
  static PssParams tied(double ks, double tw, double t1, double t2) {
    return PssParams{ks, tw, t1, t2, t1, t2};
  }
};

/// One-axis (flux-decay) synchronous machine.
struct GeneratorParams {
  int id = 0;
  int bus = 0;
  double h = 0.0;  ///< inertia constant, s
  double d = 0.0;  ///< damping, pu
  double xd = 0.0;
  double xd_prime = 0.0;
  double xq = 0.0;
  double tdo_prime = 0.0;
  std::optional<ExciterParams> exciter;  ///< fast exciter; constant field voltage when empty

  void validate() const;
};

struct NetworkCase {
  std::string name;
  int schema_version = 1;
  double base_mva = 100.0;
  double frequency_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<GeneratorParams> generators;

  /// Position of a bus id in `buses`; throws for unknown ids.
  Index bus_index(int id) const;
  const GeneratorParams& generator(int id) const;
  Index generator_index(int id) const;
  /// Checks ids, one slack bus, connectivity and machine data.
  void validate() const;
};

NetworkCase parse_case(const std::string& json_text);
NetworkCase load_case_file(const std::string& path);

struct PowerFlowResult {
  Vector vm;     ///< bus voltage magnitudes
  Vector va;     ///< bus voltage angles, slack = 0
  Vector p_inj;  ///< net bus injections P (generation - load)
  Vector q_inj;
  int iterations = 0;
  double mismatch = 0.0;  ///< max-norm of the final power mismatch

  ComplexVector voltages() const;
};

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 50;
};

/// Branch series/charging admittances and fixed bus shunts.
ComplexMatrix build_ybus(const NetworkCase& net);
/// Same, plus loads converted to constant admittances at the power-flow voltages.
ComplexMatrix build_ybus(const NetworkCase& net, const PowerFlowResult& flow);
void add_shunt(ComplexMatrix& ybus, Index bus, Complex admittance);

PowerFlowResult solve_power_flow(const NetworkCase& net, const PowerFlowOptions& options = {});

/// Complex power mismatch S_spec - V conj(Y V) for the given solution (independent check).
ComplexVector power_mismatch(const NetworkCase& net, const ComplexVector& v);

}  // namespace tsopt
