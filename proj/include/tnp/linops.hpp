#pragma once

// Dense complex linear algebra for small Hilbert spaces (d up to ~64).

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace tnp {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kHermitianTol = 1e-10;

struct HermitianEigen {
  Eigen::VectorXd values;      // ascending
  std::vector<CVector> vectors; // orthonormal, phase fixed
};

/// Largest entry of |A - A^dagger|.
double hermiticity_defect(const CMatrix& a);
bool is_hermitian(const CMatrix& a, double tol = kHermitianTol);
void require_hermitian(const CMatrix& a, const char* what, double tol = kHermitianTol);

/// Rotates the first amplitude with modulus above `threshold` onto the positive
/// real axis. Vectors with no such amplitude are returned unchanged.
CVector fix_global_phase(const CVector& v, double threshold = 1e-6);

/// Full spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues ascend. Each eigenvector has its first significant amplitude
/// made real positive, and vectors inside a (numerically) degenerate
/// eigenspace are ordered lexicographically by their amplitudes so the output
/// does not depend on the thread or call order. Throws NonHermitianInput.
HermitianEigen hermitian_eig(const CMatrix& a);

struct HermitianSplit {
  CMatrix hermitian;      // (X + X^dagger) / 2
  CMatrix antihermitian;  // (X - X^dagger) / (2i), itself Hermitian
};

/// X = hermitian + i * antihermitian.
HermitianSplit split_hermitian(const CMatrix& x);

struct PositiveSplit {
  double mu_plus = 0.0;
  std::optional<CMatrix> rho_plus;
  double mu_minus = 0.0;
  std::optional<CMatrix> rho_minus;
};

/// A = mu_plus * rho_plus - mu_minus * rho_minus with unit-trace positive
/// rho_pm. Components with weight below 1e-12 are reported absent.
PositiveSplit split_positive(const CMatrix& a);

/// <psi|A|psi>. Throws DimensionMismatch.
cplx expectation(const CMatrix& a, const CVector& psi);

CMatrix dagger(const CMatrix& a);
CMatrix projector(const CVector& psi);
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Column-stacking vectorization: vec(A)[i + j*d] = A(i, j).
CVector vectorize(const CMatrix& a);
CMatrix unvectorize(const CVector& v, Eigen::Index dim);

CVector basis_state(Eigen::Index dim, Eigen::Index index);

bool all_finite(const CMatrix& a);

} // namespace tnp
