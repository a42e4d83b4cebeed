#pragma once

// Deterministic reference solvers: fixed-step RK4 for the master equation,
// the counting hierarchy, and dynamical maps.

#include <cstddef>
#include <vector>

#include "tnp/model.hpp"

namespace tnp {

enum class Execution { serial, parallel };

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-2;

  TimeGrid() = default;
  TimeGrid(double t0_, double t1_, double dt_);

  std::size_t steps() const;
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  void validate() const;
};

struct OperatorTrajectory {
  TimeGrid grid;
  std::vector<CMatrix> values;  // one per grid point, values[0] is the initial value
};

/// Classical RK4 on the full generator (source included). The state is
/// re-symmetrized after every step. Throws NonFiniteState.
OperatorTrajectory integrate(const TnpModel& model, const CMatrix& rho0, const TimeGrid& grid);

struct HierarchySolution {
  std::vector<OperatorTrajectory> tau;          // tau_0 .. tau_kmax
  std::vector<std::vector<double>> moments;     // moments[k][grid index] = tr tau_k
};

/// d tau_k/dt = L[tau_k] + k J[tau_{k-1}], tau_0(0) = rho0, tau_k(0) = 0, with
/// J[X] = gamma_c L_c X L_c^dagger for the counting channel of a trace-preserving
/// base model. The levels are advanced together as one linear system.
HierarchySolution solve_hierarchy(const TnpModel& base, std::size_t counting_channel,
                                  int k_max, const CMatrix& rho0, const TimeGrid& grid);

struct DynamicalMap {
  Eigen::Index dim = 0;
  CMatrix matrix;  // dim^2 x dim^2, acts on column-stacked operators
  double t = 0.0;

  CMatrix apply(const CMatrix& rho) const;
};

/// Lambda_t at every grid point from the homogeneous part of the generator
/// (any source term is ignored). Columns are integrated independently.
std::vector<DynamicalMap> propagate_map(const TnpModel& model, const TimeGrid& grid,
                                        Execution exec = Execution::parallel);

/// Lambda_{t,s} = Lambda_t Lambda_s^{-1}. Throws SingularMap when the
/// condition number of Lambda_s exceeds 1e10.
DynamicalMap intermediate_map(const std::vector<DynamicalMap>& maps, std::size_t s, std::size_t t);

/// Hilbert-Schmidt adjoint (conjugate transpose in the column-stacked basis).
DynamicalMap adjoint_map(const DynamicalMap& map);

} // namespace tnp
