#include "tnp/linops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tnp/errors.hpp"

namespace tnp {

double hermiticity_defect(const CMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const CMatrix& a, double tol) {
  return hermiticity_defect(a) <= tol;
}

void require_hermitian(const CMatrix& a, const char* what, double tol) {
  const double defect = hermiticity_defect(a);
  if (!(defect <= tol)) {
    throw NonHermitianInput(std::string(what) + " has |A - A^dagger|_max = " +
                            std::to_string(defect));
  }
}

CVector fix_global_phase(const CVector& v, double threshold) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mod = std::abs(v[i]);
    if (mod > threshold) return v * (std::conj(v[i]) / mod);
  }
  return v;
}

namespace {

// Lexicographic "greater" on amplitudes with a small dead band.
bool lex_before(const CVector& a, const CVector& b) {
  constexpr double tol = 1e-9;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].real() - b[i].real()) > tol) return a[i].real() > b[i].real();
    if (std::abs(a[i].imag() - b[i].imag()) > tol) return a[i].imag() > b[i].imag();
  }
  return false;
}

} // namespace

HermitianEigen hermitian_eig(const CMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("hermitian_eig needs a square matrix");
  const double scale = std::max(1.0, a.size() ? a.cwiseAbs().maxCoeff() : 0.0);
  require_hermitian(a, "hermitian_eig input", kHermitianTol * scale);

  const CMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NonFiniteState("eigensolver did not converge");
  }

  const auto n = a.rows();
  HermitianEigen out;
  out.values = solver.eigenvalues();
  out.vectors.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    out.vectors.push_back(fix_global_phase(solver.eigenvectors().col(k)));
  }

  // Order vectors inside degenerate clusters.
  const double degen = 1e-12 * scale;
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index stop = start + 1;
    while (stop < n && out.values[stop] - out.values[stop - 1] <= degen) ++stop;
    if (stop - start > 1) {
      std::sort(out.vectors.begin() + start, out.vectors.begin() + stop, lex_before);
    }
    start = stop;
  }
  return out;
}

HermitianSplit split_hermitian(const CMatrix& x) {
  const CMatrix xd = x.adjoint();
  return {0.5 * (x + xd), (x - xd) / (2.0 * kI)};
}

PositiveSplit split_positive(const CMatrix& a) {
  const HermitianEigen eig = hermitian_eig(a);
  const auto n = a.rows();
  CMatrix plus = CMatrix::Zero(n, n);
  CMatrix minus = CMatrix::Zero(n, n);
  double mu_plus = 0.0;
  double mu_minus = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    const auto& v = eig.vectors[static_cast<std::size_t>(k)];
    if (lambda > 0) {
      plus += lambda * v * v.adjoint();
      mu_plus += lambda;
    } else if (lambda < 0) {
      minus += (-lambda) * v * v.adjoint();
      mu_minus -= lambda;
    }
  }
  constexpr double absent = 1e-12;
  PositiveSplit out;
  if (mu_plus >= absent) {
    out.mu_plus = mu_plus;
    out.rho_plus = plus / mu_plus;
  }
  if (mu_minus >= absent) {
    out.mu_minus = mu_minus;
    out.rho_minus = minus / mu_minus;
  }
  return out;
}

cplx expectation(const CMatrix& a, const CVector& psi) {
  if (a.rows() != psi.size() || a.cols() != psi.size()) {
    throw DimensionMismatch("expectation: operator is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", state has dimension " +
                            std::to_string(psi.size()));
  }
  return psi.dot(a * psi);
}

CMatrix dagger(const CMatrix& a) { return a.adjoint(); }

CMatrix projector(const CVector& psi) { return psi * psi.adjoint(); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CVector vectorize(const CMatrix& a) {
  return Eigen::Map<const CVector>(a.data(), a.size());
}

CMatrix unvectorize(const CVector& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw DimensionMismatch("unvectorize: length is not dim^2");
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

CVector basis_state(Eigen::Index dim, Eigen::Index index) {
  CVector v = CVector::Zero(dim);
  v[index] = 1.0;
  return v;
}

bool all_finite(const CMatrix& a) { return a.allFinite(); }

} // namespace tnp
