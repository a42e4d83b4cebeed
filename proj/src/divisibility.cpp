#include "tnp/divisibility.hpp"

#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

#include "tnp/errors.hpp"

namespace tnp {

CMatrix choi_state(const DynamicalMap& map) {
  const Eigen::Index d = map.dim;
  if (map.matrix.rows() != d * d || map.matrix.cols() != d * d) {
    throw DimensionMismatch("dynamical map is not d^2 x d^2");
  }
  CMatrix choi = CMatrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      CMatrix eij = CMatrix::Zero(d, d);
      eij(i, j) = 1.0;
      choi += kron(map.apply(eij), eij);
    }
  }
  return choi / static_cast<double>(d);
}

Eigen::VectorXd choi_eigenvalues(const DynamicalMap& map) {
  return hermitian_eig(choi_state(map)).values;
}

bool has_negative_eigenvalue(const Eigen::VectorXd& v) {
  if (v.size() == 0) return false;
  const double range = v.maxCoeff() - v.minCoeff();
  return v.minCoeff() < -1e-8 * range;
}

BlochAffine bloch_affine(const DynamicalMap& map) {
  if (map.dim != 2) throw DimensionMismatch("Bloch representation needs a qubit map");
  const PauliOps p = pauli_ops();
  const std::array<CMatrix, 3> s{p.sx, p.sy, p.sz};
  BlochAffine ba;
  const CMatrix image_id = map.apply(CMatrix::Identity(2, 2));
  for (int a = 0; a < 3; ++a) {
    ba.c[a] = 0.5 * (s[a] * image_id).trace().real();
    for (int b = 0; b < 3; ++b) {
      ba.m(a, b) = 0.5 * (s[a] * map.apply(s[b])).trace().real();
    }
  }
  return ba;
}

double max_bloch_norm(const BlochAffine& ba) {
  constexpr int kSamples = 4096;
  constexpr int kRefine = 20;
  auto value = [&](const Eigen::Vector3d& v) { return (ba.m * v + ba.c).norm(); };

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  Eigen::Vector3d best = Eigen::Vector3d::UnitZ();
  double best_val = -1.0;
  for (int i = 0; i < kSamples; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / kSamples;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    const Eigen::Vector3d v(r * std::cos(phi), r * std::sin(phi), z);
    const double f = value(v);
    if (f > best_val) {
      best_val = f;
      best = v;
    }
  }

  // Ascent on |m v + c|^2 / 2 restricted to the sphere; the step shrinks
  // whenever a move does not improve.
  double step = 0.5 / std::max(1.0, ba.m.norm() * ba.m.norm());
  for (int it = 0; it < kRefine; ++it) {
    const Eigen::Vector3d grad = ba.m.transpose() * (ba.m * best + ba.c);
    const Eigen::Vector3d tangent = grad - grad.dot(best) * best;
    if (tangent.norm() < 1e-15) break;
    const Eigen::Vector3d cand = (best + step * tangent).normalized();
    const double f = value(cand);
    if (f >= best_val) {
      best = cand;
      best_val = f;
    } else {
      step *= 0.5;
    }
  }
  return best_val;
}

std::vector<DivisibilityPoint> divisibility_report(const std::vector<DynamicalMap>& cumulative, Execution exec) {
  if (cumulative.size() < 2) return {};
  const std::size_t n = cumulative.size() - 1;
  std::vector<DivisibilityPoint> out(n);
  std::vector<std::exception_ptr> failures(n);
  auto work = [&](std::size_t k) {
    try {
      const DynamicalMap inter = intermediate_map(cumulative, k, k + 1);
      DivisibilityPoint& pt = out[k];
      pt.t_mid = 0.5 * (cumulative[k].t + cumulative[k + 1].t);
      pt.choi = choi_eigenvalues(inter);
      pt.max_bloch_norm =
          inter.dim == 2 ? max_bloch_norm(bloch_affine(inter)) : std::numeric_limits<double>::quiet_NaN();
    } catch (...) {
      failures[k] = std::current_exception();
    }
  };
  if (exec == Execution::serial) {
    for (std::size_t k = 0; k < n; ++k) work(k);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t k = 0; k < n; ++k) work(k);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

std::vector<DivisibilityPoint> divisibility_report(const TnpModel& model, const TimeGrid& grid, Picture picture,
                                                   Execution exec) {
  std::vector<DynamicalMap> maps = propagate_map(model, grid, exec);
  if (picture == Picture::adjoint) {
    for (auto& m : maps) m = adjoint_map(m);
  }
  return divisibility_report(maps, exec);
}

} // namespace tnp
