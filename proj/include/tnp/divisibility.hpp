#pragma once

// Divisibility diagnostics for intermediate maps Lambda_{t+dt,t}:
// Choi spectra (complete positivity) and Bloch-ball images (positivity, qubit).

#include <Eigen/Dense>
#include <vector>

#include "tnp/exact.hpp"

namespace tnp {

/// sum_ij Lambda[|i><j|] (x) |i><j|, divided by d so a trace-preserving map has unit trace.
CMatrix choi_state(const DynamicalMap& map);

/// Ascending eigenvalues of the normalized Choi state.
Eigen::VectorXd choi_eigenvalues(const DynamicalMap& map);

/// An eigenvalue counts as negative below -1e-8 times the spectral range.
bool has_negative_eigenvalue(const Eigen::VectorXd& ascending);

struct BlochAffine {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
};

/// m_ab = tr[s_a Lambda[s_b]] / 2, c_a = tr[s_a Lambda[1]] / 2 for Pauli matrices s.
BlochAffine bloch_affine(const DynamicalMap& map);

/// max over the unit sphere of |m v + c|: Fibonacci sampling then projected gradient ascent.
double max_bloch_norm(const BlochAffine& ba);

struct DivisibilityPoint {
  double t_mid = 0.0;
  Eigen::VectorXd choi;          // ascending
  double max_bloch_norm = 0.0;   // NaN when d != 2
};

enum class Picture { as_given, adjoint };

/// Per grid interval diagnostics of Lambda_{t+dt,t}. With Picture::adjoint the
/// cumulative maps are replaced by their Hilbert-Schmidt adjoints first, which
/// turns a Heisenberg-picture propagator into the Schroedinger-picture one.
std::vector<DivisibilityPoint> divisibility_report(const TnpModel& model, const TimeGrid& grid,
                                                   Picture picture = Picture::as_given,
                                                   Execution exec = Execution::parallel);

/// Same, from precomputed cumulative maps.
std::vector<DivisibilityPoint> divisibility_report(const std::vector<DynamicalMap>& cumulative,
                                                   Execution exec = Execution::parallel);

} // namespace tnp
