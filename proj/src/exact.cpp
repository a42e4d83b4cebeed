#include "tnp/exact.hpp"

#include <cmath>
#include <exception>
#include <string>

#include "tnp/errors.hpp"

namespace tnp {

TimeGrid::TimeGrid(double t0_, double t1_, double dt_) : t0(t0_), t1(t1_), dt(dt_) { validate(); }

std::size_t TimeGrid::steps() const {
  return static_cast<std::size_t>(std::llround((t1 - t0) / dt));
}

void TimeGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("time grid: dt must be positive");
  if (!(t1 >= t0)) throw InvalidParameter("time grid: t1 must not precede t0");
}

namespace {

void require_finite(const CMatrix& m, double t) {
  if (!m.allFinite()) throw NonFiniteState("non-finite state at t = " + std::to_string(t));
}

// Generators at t_k and t_k + dt/2 for k = 0 .. steps, shared by every RK4 run.
struct GeneratorTable {
  std::vector<GeneratorAt> at_step;
  std::vector<GeneratorAt> at_mid;

  GeneratorTable(const TnpModel& model, const TimeGrid& grid) {
    const std::size_t n = grid.steps();
    at_step.reserve(n + 1);
    at_mid.reserve(n);
    for (std::size_t k = 0; k <= n; ++k) {
      at_step.push_back(evaluate(model, grid.time(k)));
      if (k < n) at_mid.push_back(evaluate(model, grid.time(k) + 0.5 * grid.dt));
    }
  }
};

template <class Rhs>
CMatrix rk4_step(const CMatrix& y, double dt, const Rhs& rhs_begin, const Rhs& rhs_mid,
                 const Rhs& rhs_end) {
  const CMatrix k1 = rhs_begin(y);
  const CMatrix k2 = rhs_mid(y + 0.5 * dt * k1);
  const CMatrix k3 = rhs_mid(y + 0.5 * dt * k2);
  const CMatrix k4 = rhs_end(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

OperatorTrajectory integrate(const TnpModel& model, const CMatrix& rho0, const TimeGrid& grid) {
  grid.validate();
  if (rho0.rows() != model.dim || rho0.cols() != model.dim) {
    throw DimensionMismatch("integrate: initial operator does not match model dimension");
  }
  require_hermitian(rho0, "integrate initial operator", 1e-8);

  const GeneratorTable gens(model, grid);
  const std::size_t n = grid.steps();
  OperatorTrajectory out;
  out.grid = grid;
  out.values.reserve(n + 1);
  out.values.push_back(0.5 * (rho0 + rho0.adjoint()));
  for (std::size_t k = 0; k < n; ++k) {
    using Rhs = std::function<CMatrix(const CMatrix&)>;
    const Rhs begin = [&](const CMatrix& x) { return apply_generator(gens.at_step[k], x); };
    const Rhs mid = [&](const CMatrix& x) { return apply_generator(gens.at_mid[k], x); };
    const Rhs end = [&](const CMatrix& x) { return apply_generator(gens.at_step[k + 1], x); };
    CMatrix next = rk4_step(out.values.back(), grid.dt, begin, mid, end);
    next = 0.5 * (next + next.adjoint());
    require_finite(next, grid.time(k + 1));
    out.values.push_back(std::move(next));
  }
  return out;
}

HierarchySolution solve_hierarchy(const TnpModel& base, std::size_t counting_channel, int k_max,
                                  const CMatrix& rho0, const TimeGrid& grid) {
  grid.validate();
  if (k_max < 0) throw InvalidParameter("solve_hierarchy: k_max must be non-negative");
  if (counting_channel >= base.channels.size()) {
    throw InvalidParameter("solve_hierarchy: counting channel index out of range");
  }
  if (!base.gamma.is_lindblad() || base.source) {
    throw InvalidParameter("solve_hierarchy: base model must be trace preserving and source free");
  }
  if (rho0.rows() != base.dim || rho0.cols() != base.dim) {
    throw DimensionMismatch("solve_hierarchy: initial operator does not match model dimension");
  }

  const GeneratorTable gens(base, grid);
  const auto levels = static_cast<std::size_t>(k_max) + 1;
  const CMatrix& lc = base.channels[counting_channel].op;
  using Stack = std::vector<CMatrix>;

  auto rhs = [&](const GeneratorAt& gen, const Stack& y) {
    const double rate = gen.rates[counting_channel];
    Stack dy(levels);
    for (std::size_t k = 0; k < levels; ++k) {
      dy[k] = apply_generator(gen, y[k], false);
      if (k > 0) dy[k] += static_cast<double>(k) * rate * (lc * y[k - 1] * lc.adjoint());
    }
    return dy;
  };
  auto axpy = [&](const Stack& y, double a, const Stack& x) {
    Stack out(levels);
    for (std::size_t k = 0; k < levels; ++k) out[k] = y[k] + a * x[k];
    return out;
  };

  const std::size_t n = grid.steps();
  HierarchySolution sol;
  sol.tau.resize(levels);
  sol.moments.assign(levels, std::vector<double>{});
  Stack y(levels, CMatrix::Zero(base.dim, base.dim));
  y[0] = 0.5 * (rho0 + rho0.adjoint());

  auto record = [&](const Stack& state) {
    for (std::size_t k = 0; k < levels; ++k) {
      sol.tau[k].values.push_back(state[k]);
      sol.moments[k].push_back(state[k].trace().real());
    }
  };
  for (auto& tr : sol.tau) {
    tr.grid = grid;
    tr.values.reserve(n + 1);
  }
  record(y);

  const double dt = grid.dt;
  for (std::size_t step = 0; step < n; ++step) {
    const Stack k1 = rhs(gens.at_step[step], y);
    const Stack k2 = rhs(gens.at_mid[step], axpy(y, 0.5 * dt, k1));
    const Stack k3 = rhs(gens.at_mid[step], axpy(y, 0.5 * dt, k2));
    const Stack k4 = rhs(gens.at_step[step + 1], axpy(y, dt, k3));
    for (std::size_t k = 0; k < levels; ++k) {
      y[k] += (dt / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
      y[k] = 0.5 * (y[k] + y[k].adjoint());
      require_finite(y[k], grid.time(step + 1));
    }
    record(y);
  }
  return sol;
}

CMatrix DynamicalMap::apply(const CMatrix& rho) const {
  return unvectorize(matrix * vectorize(rho), dim);
}

std::vector<DynamicalMap> propagate_map(const TnpModel& model, const TimeGrid& grid,
                                        Execution exec) {
  grid.validate();
  const GeneratorTable gens(model, grid);
  const std::size_t n = grid.steps();
  const Eigen::Index d = model.dim;
  const Eigen::Index d2 = d * d;

  std::vector<DynamicalMap> maps(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    maps[k].dim = d;
    maps[k].t = grid.time(k);
    maps[k].matrix.resize(d2, d2);
  }

  auto run_column = [&](Eigen::Index col) {
    CMatrix y = CMatrix::Zero(d, d);
    y(col % d, col / d) = 1.0;
    maps[0].matrix.col(col) = vectorize(y);
    for (std::size_t k = 0; k < n; ++k) {
      const auto begin = [&](const CMatrix& x) { return apply_generator(gens.at_step[k], x, false); };
      const auto mid = [&](const CMatrix& x) { return apply_generator(gens.at_mid[k], x, false); };
      const auto end = [&](const CMatrix& x) { return apply_generator(gens.at_step[k + 1], x, false); };
      const CMatrix k1 = begin(y);
      const CMatrix k2 = mid(y + 0.5 * grid.dt * k1);
      const CMatrix k3 = mid(y + 0.5 * grid.dt * k2);
      const CMatrix k4 = end(y + grid.dt * k3);
      y += (grid.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!y.allFinite()) throw NonFiniteState("map column diverged at t = " + std::to_string(grid.time(k + 1)));
      maps[k + 1].matrix.col(col) = vectorize(y);
    }
  };

  if (exec == Execution::serial) {
    for (Eigen::Index col = 0; col < d2; ++col) run_column(col);
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (Eigen::Index col = 0; col < d2; ++col) {
      try {
        run_column(col);
      } catch (...) {
#pragma omp critical(tnp_map_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return maps;
}

DynamicalMap intermediate_map(const std::vector<DynamicalMap>& maps, std::size_t s, std::size_t t) {
  if (s >= maps.size() || t >= maps.size()) throw InvalidParameter("intermediate_map: index out of range");
  const DynamicalMap& ms = maps[s];
  const DynamicalMap& mt = maps[t];
  Eigen::PartialPivLU<CMatrix> lu(ms.matrix);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-10)) {
    throw SingularMap("Lambda_s at t = " + std::to_string(ms.t) +
                      " has condition estimate " + std::to_string(1.0 / rcond));
  }
  DynamicalMap out;
  out.dim = mt.dim;
  out.t = mt.t;
  out.matrix = mt.matrix * lu.inverse();
  return out;
}

DynamicalMap adjoint_map(const DynamicalMap& map) {
  DynamicalMap out = map;
  out.matrix = map.matrix.adjoint();
  return out;
}

} // namespace tnp
