#pragma once

// End-to-end studies: photon-counting factorial moments through the
// inhomogeneous hierarchy, tilted traces, and Heisenberg-picture observables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tnp/ensemble.hpp"
#include "tnp/exact.hpp"
#include "tnp/stepper.hpp"

namespace tnp {

struct PhotonCountingConfig {
  CountingParams params;
  std::vector<double> zeta_list{-0.02, 0.0, 0.02};
  int k_max = 4;
  double dt = 1e-2;
  double t_final = 3.0;
  std::int64_t n_trajectories = 10000;
  std::size_t n_batches = 50;
  std::size_t n_records = 10;          // recorded times after t = 0
  std::uint64_t seed = 1;
  CVector psi0;                         // empty: (|0> + |1>)/sqrt(2)
  double leakage_tol = 1e-6;            // allowed population of the top two Fock levels
  // At dt = 1e-2 excited Fock components jump with probability above the
  // generic 0.1 guideline, so this study allows up to 0.5 per step.
  double step_guard = 0.5;
  Method method = Method::mcwf;
  Execution exec = Execution::parallel;

  void validate() const;
  CVector initial_state() const;
  TimeGrid grid() const { return {0.0, t_final, dt}; }
  /// Grid indices of the recorded times (0 first).
  std::vector<std::size_t> record_steps() const;
};

struct MomentSeries {
  std::vector<double> times;
  std::vector<std::vector<Estimate>> estimate;  // [k][record], k = 0 .. k_max
  std::vector<std::vector<double>> exact;       // [k][record]
  std::vector<std::vector<std::size_t>> distinct;  // [k][record]
};

/// Throws CutoffLeakage when the exact state puts more than `tol` population
/// on the two highest retained Fock levels at any grid time.
void check_cutoff(const HierarchySolution& exact, double tol);

MomentSeries run_photon_counting(const PhotonCountingConfig& cfg);

struct TiltedRow {
  double t = 0.0;
  double zeta = 0.0;
  Estimate trace;       // estimate of tr rho_zeta
  double trace_exact = 0.0;
};

std::vector<TiltedRow> run_tilted_trace(const PhotonCountingConfig& cfg);

struct HeisenbergConfig {
  TimeScalar eps = TimeScalar::constant(20.0);
  TimeScalar gamma_minus = TimeScalar::constant(1.0);
  TimeScalar gamma_plus = TimeScalar::exponential(0.5, 1.0);
  std::vector<std::string> observable_names{"x", "z"};
  std::vector<CMatrix> observables;     // empty: sigma_x, sigma_z
  CVector psi_s;                        // empty: cos(pi/8)|0> + sin(pi/8)|1>
  /// Observable whose positive component provides the trace series; defaults
  /// to the last one. For sigma_z that component is |0><0|, whose trace is not conserved.
  std::optional<std::size_t> trace_observable;
  double dt = 1e-3;
  double t_final = 3.0;
  std::int64_t n_trajectories = 20000;  // per positive component
  std::size_t n_batches = 50;
  std::size_t n_records = 30;
  std::uint64_t seed = 1;
  Method method = Method::mcwf;
  Execution exec = Execution::parallel;

  void validate() const;
  std::vector<CMatrix> observable_list() const;
  CVector schrodinger_state() const;
  TimeGrid grid() const { return {0.0, t_final, dt}; }
  std::vector<std::size_t> record_steps() const;
};

struct HeisenbergSeries {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<Estimate>> estimate;  // [observable][record]: tr[X(t) rho_s]
  std::vector<std::vector<double>> exact;
  std::vector<Estimate> trace;                  // sum N_i / N of the traced positive component
  std::vector<double> trace_exact;
  std::vector<std::size_t> distinct;            // summed over all component ensembles
};

/// True when |eps(t)| >= 10 max(gamma_-(t), gamma_+(t)) on every grid point.
bool strongly_driven(const HeisenbergConfig& cfg);

HeisenbergSeries run_heisenberg(const HeisenbergConfig& cfg);

/// Evenly spaced recording indices 0, .., steps (n_records intervals, at least one step apart).
std::vector<std::size_t> evenly_spaced_steps(std::size_t steps, std::size_t n_records);

} // namespace tnp
