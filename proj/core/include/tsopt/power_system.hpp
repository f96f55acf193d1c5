#pragma once

/**
 * @file power_system.hpp
 * @brief Multi-machine hybrid model: flux-decay generators, fast exciters,
 * speed-input PSS, constant-impedance network with a bolted-fault shunt.
 *
 * Per machine the continuous states are delta (rad), omega (pu deviation),
 * E'_q, then E_fd when a fast exciter is present, then the three PSS states.
 * Parameters are (K_s, T_1, T_2) per PSS-equipped machine; the second
 * lead-lag is tied to the first (T_3 = T_1, T_4 = T_2).
 *
 * Algebraic states are (V_re, V_im) per bus followed by (I_d, I_q) per machine.
 * Mode 0 is the healthy network; mode 1 adds the fault shunt. The fault
 * self-clears, so the post-fault mode is mode 0 again.
 */

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsopt/hybrid_model.hpp"
#include "tsopt/network.hpp"
#include "tsopt/simulator.hpp"

namespace tsopt {

inline constexpr ModeId kFaultedMode = 1;

struct FaultScenario {
  int bus = 0;
  double t_on = 0.0;
  double t_off = 0.1;
  Complex admittance{1e4, 0.0};

  void validate() const;
};

/// Tunable parameters per PSS, in lambda order.
enum class PssParameter { ks, t1, t2 };
const char* parameter_name(PssParameter p);

struct MachineLayout {
  int generator_id = 0;
  Index bus = 0;  ///< position of the terminal bus
  Index delta = 0;
  Index omega = 0;
  Index eq = 0;
  std::optional<Index> efd;
  std::optional<Index> pss_w;
  std::optional<Index> pss_1;
  std::optional<Index> pss_2;
  std::optional<Index> ks;  ///< lambda entries (augmented-state indices)
  std::optional<Index> t1;
  std::optional<Index> t2;
  Index id = 0;  ///< algebraic indices of the machine currents
  Index iq = 0;

  bool has_pss() const { return ks.has_value(); }
};

struct StateLayout {
  Dimensions dims;
  Index bus_count = 0;
  std::vector<MachineLayout> machines;

  static Index vre(Index bus) { return 2 * bus; }
  static Index vim(Index bus) { return 2 * bus + 1; }
  const MachineLayout& machine(int generator_id) const;
  /// omega rows of all machines, in case order.
  std::vector<Index> speed_rows() const;
  std::vector<std::string> state_names() const;
  std::vector<std::string> algebraic_names(const NetworkCase& net) const;
  /// (generator id, parameter) for each lambda entry, in order.
  std::vector<std::pair<int, PssParameter>> lambda_entries() const;
};

/// Per-machine constants fixed by the initial operating point.
struct MachineSetpoint {
  double pm = 0.0;
  double efd = 0.0;  ///< initial (or constant) field voltage
  double vref = 0.0;
};

struct OperatingPoint {
  AugmentedState x0;
  AlgebraicState y0;
  std::vector<MachineSetpoint> setpoints;
};

/// PSS settings keyed by generator id.
using PssMap = std::map<int, PssParams>;

StateLayout make_layout(const NetworkCase& net, const PssMap& pss);

/// Back-solves rotor angles, E'_q, E_fd and V_ref from a converged power flow.
/// Speeds and PSS states start at zero. The algebraic guess comes from the flow.
OperatingPoint init_dynamic_states(const NetworkCase& net, const PowerFlowResult& flow,
                                   const StateLayout& layout, const PssMap& pss);

struct PowerSystemModel {
  NetworkCase net;
  PowerFlowResult flow;
  StateLayout layout;
  OperatingPoint op;
  PssMap pss;
  std::optional<FaultScenario> fault;
  HybridModel model;
  EventSchedule schedule;

  /// lambda entries of the initial state.
  Vector lambda0() const;
  /// Initial augmented state with lambda replaced.
  Vector x0_with(const Vector& lambda) const;
};

/**
 * Builds the hybrid model. Exciters come from the case (machines without one
 * keep a constant field voltage). PSS parameters must have T_3 = T_1 and
 * T_4 = T_2, and a PSS requires a fast exciter on the same machine.
 */
PowerSystemModel build_hybrid_model(const NetworkCase& net, const std::optional<FaultScenario>& fault,
                                    const PssMap& pss, const PowerFlowOptions& pf_options = {});

/// delta_k - delta_ref for each sample, e.g. delta_21 = delta_2 - delta_1.
std::vector<double> relative_angle(const Trajectory& traj, const StateLayout& layout, int generator,
                                   int reference);

}  // namespace tsopt
