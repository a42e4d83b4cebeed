#include "tnp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "tnp/errors.hpp"

namespace tnp {

std::vector<std::size_t> evenly_spaced_steps(std::size_t steps, std::size_t n_records) {
  std::vector<std::size_t> out{0};
  if (steps == 0) return out;
  n_records = std::max<std::size_t>(1, std::min(n_records, steps));
  for (std::size_t i = 1; i <= n_records; ++i) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(i) * steps / n_records));
    if (s != out.back()) out.push_back(s);
  }
  return out;
}

namespace {

std::vector<std::int64_t> even_batches(std::int64_t n, std::size_t n_batches) {
  std::vector<std::int64_t> ref(n_batches, n / static_cast<std::int64_t>(n_batches));
  for (std::int64_t r = 0; r < n % static_cast<std::int64_t>(n_batches); ++r) ++ref[static_cast<std::size_t>(r)];
  return ref;
}

std::vector<CMatrix> batch_averages(const Ensemble& e) {
  std::vector<CMatrix> sums = batch_state_sums(e);
  for (std::size_t b = 0; b < sums.size(); ++b) sums[b] /= static_cast<double>(e.batch_ref[b]);
  return sums;
}

std::vector<std::pair<double, CVector>> eigen_decomposition(const CMatrix& rho) {
  const HermitianEigen eig = hermitian_eig(rho);
  std::vector<std::pair<double, CVector>> out;
  for (Eigen::Index i = eig.values.size() - 1; i >= 0; --i) {
    if (eig.values[i] > 1e-12) out.emplace_back(eig.values[i], eig.vectors[static_cast<std::size_t>(i)]);
  }
  return out;
}

void check_common(double dt, double t_final, std::int64_t n, std::size_t n_batches, std::size_t n_records) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InvalidParameter("t_final must be positive");
  if (n <= 0) throw InvalidParameter("n_trajectories must be positive");
  if (n_batches == 0 || static_cast<std::int64_t>(n_batches) > n) {
    throw InvalidParameter("n_batches must be between 1 and n_trajectories");
  }
  if (n_records == 0) throw InvalidParameter("n_records must be positive");
}

} // namespace

// ---- photon counting --------------------------------------------------------

void PhotonCountingConfig::validate() const {
  check_common(dt, t_final, n_trajectories, n_batches, n_records);
  if (k_max < 0) throw InvalidParameter("k_max must be non-negative");
  if (params.n_max < 2) throw InvalidParameter("n_max must be at least 2");
  for (double z : zeta_list) {
    if (!(z > -1.0)) throw InvalidParameter("zeta must exceed -1");
  }
  if (psi0.size() != 0 && psi0.size() != params.n_max) throw DimensionMismatch("psi0 does not match n_max");
  if (!(leakage_tol > 0.0)) throw InvalidParameter("leakage_tol must be positive");
  if (!(step_guard > 0.0)) throw InvalidParameter("step_guard must be positive");
}

CVector PhotonCountingConfig::initial_state() const {
  if (psi0.size() != 0) return psi0.normalized();
  CVector psi = CVector::Zero(params.n_max);
  psi[0] = psi[1] = 1.0 / std::numbers::sqrt2;
  return psi;
}

std::vector<std::size_t> PhotonCountingConfig::record_steps() const {
  return evenly_spaced_steps(grid().steps(), n_records);
}

void check_cutoff(const HierarchySolution& exact, double tol) {
  if (exact.tau.empty()) return;
  for (std::size_t s = 0; s < exact.tau[0].values.size(); ++s) {
    const CMatrix& rho = exact.tau[0].values[s];
    const Eigen::Index top = rho.rows() - 1;
    const double weight = rho(top, top).real() + rho(top - 1, top - 1).real();
    if (weight > tol) {
      throw CutoffLeakage("population " + std::to_string(weight) + " in Fock levels " + std::to_string(top - 1) +
                          ".." + std::to_string(top) + " at t = " + std::to_string(exact.tau[0].grid.time(s)));
    }
  }
}

MomentSeries run_photon_counting(const PhotonCountingConfig& cfg) {
  cfg.validate();
  const TnpModel base = tilted_lindbladian(cfg.params, 0.0);
  const TimeGrid grid = cfg.grid();
  const std::size_t steps = grid.steps();
  const CVector psi0 = cfg.initial_state();
  const HierarchySolution exact = solve_hierarchy(base, kEmissionChannel, cfg.k_max, projector(psi0), grid);
  check_cutoff(exact, cfg.leakage_tol);

  const std::vector<std::size_t> recorded = cfg.record_steps();
  MomentSeries out;
  for (std::size_t s : recorded) out.times.push_back(grid.time(s));
  const auto orders = static_cast<std::size_t>(cfg.k_max) + 1;
  out.estimate.assign(orders, {});
  out.exact.assign(orders, {});
  out.distinct.assign(orders, {});
  for (std::size_t k = 0; k < orders; ++k) {
    for (std::size_t s : recorded) out.exact[k].push_back(exact.moments[k][s]);
  }

  const JumpChannel& counting = base.channels[kEmissionChannel];
  const CMatrix& lc = counting.op;
  const CMatrix lc_dag = lc.adjoint();
  auto emission = [&](const CMatrix& x, double t) -> CMatrix { return counting.rate(t) * lc * x * lc_dag; };

  RunOptions options;
  options.scheme.method = cfg.method;
  options.scheme.step_guard = cfg.step_guard;
  options.exec = cfg.exec;

  // previous[s][b]: batch average of the previous order at grid point s.
  std::vector<std::vector<CMatrix>> previous;
  for (std::size_t k = 0; k < orders; ++k) {
    const std::uint64_t stage_seed = mix64(cfg.seed + 0x1000 * (k + 1));
    Ensemble e;
    std::size_t current = 0;
    if (k == 0) {
      e = sample_initial({{1.0, psi0}}, cfg.n_trajectories, stage_seed, cfg.n_batches);
      options.batch_source = nullptr;
    } else {
      // Scale the reference count so that about n_trajectories realizations are
      // created over the run: the order-k trace grows to roughly the integrated source.
      double created = 0.0;
      for (std::size_t s = 0; s < steps; ++s) {
        CMatrix pooled = CMatrix::Zero(base.dim, base.dim);
        for (const auto& m : previous[s]) pooled += m;
        pooled /= static_cast<double>(previous[s].size());
        created += grid.dt * static_cast<double>(k) * emission(pooled, grid.time(s)).trace().real();
      }
      const auto n_ref = std::max<std::int64_t>(
          static_cast<std::int64_t>(cfg.n_batches),
          std::llround(static_cast<double>(cfg.n_trajectories) / std::max(1.0, created)));
      e = Ensemble::empty(base.dim, even_batches(n_ref, cfg.n_batches), stage_seed);
      options.batch_source = [&, k](double t, std::size_t b) -> CMatrix {
        return static_cast<double>(k) * emission(previous[current][b], t);
      };
    }
    e.time = grid.t0;

    std::vector<std::vector<CMatrix>> averages;
    if (k + 1 < orders) averages.reserve(steps + 1);
    std::size_t next_record = 0;
    for (std::size_t s = 0; s <= steps; ++s) {
      current = s;
      if (k + 1 < orders) averages.push_back(batch_averages(e));
      if (next_record < recorded.size() && recorded[next_record] == s) {
        out.estimate[k].push_back(trace_with_error(e, s));
        out.distinct[k].push_back(distinct_states(e));
        ++next_record;
      }
      if (s == steps) break;
      step_ensemble(base, e, grid.dt, options);
      e.time = grid.time(s + 1);
    }
    previous = std::move(averages);
  }
  return out;
}

std::vector<TiltedRow> run_tilted_trace(const PhotonCountingConfig& cfg) {
  cfg.validate();
  const TimeGrid grid = cfg.grid();
  const std::size_t steps = grid.steps();
  const CVector psi0 = cfg.initial_state();
  const std::vector<std::size_t> recorded = cfg.record_steps();

  RunOptions options;
  options.scheme.method = cfg.method;
  options.scheme.step_guard = cfg.step_guard;
  options.exec = cfg.exec;

  std::vector<TiltedRow> rows;
  for (std::size_t z = 0; z < cfg.zeta_list.size(); ++z) {
    const double zeta = cfg.zeta_list[z];
    const TnpModel model = tilted_lindbladian(cfg.params, zeta);
    const OperatorTrajectory reference = integrate(model, projector(psi0), grid);
    Ensemble e = sample_initial({{1.0, psi0}}, cfg.n_trajectories, mix64(cfg.seed + 0x2000 * (z + 1)),
                                cfg.n_batches);
    e.time = grid.t0;
    std::size_t next_record = 0;
    for (std::size_t s = 0; s <= steps; ++s) {
      if (next_record < recorded.size() && recorded[next_record] == s) {
        rows.push_back({grid.time(s), zeta, trace_with_error(e, s), reference.values[s].trace().real()});
        ++next_record;
      }
      if (s == steps) break;
      step_ensemble(model, e, grid.dt, options);
      e.time = grid.time(s + 1);
    }
  }
  return rows;
}

// ---- Heisenberg picture ---------------------------------------------------

void HeisenbergConfig::validate() const {
  check_common(dt, t_final, n_trajectories, n_batches, n_records);
  const auto obs = observable_list();
  if (observable_names.size() != obs.size()) {
    throw InvalidParameter("observable_names and observables differ in length");
  }
  for (const auto& x : obs) {
    if (x.rows() != 2 || x.cols() != 2) throw DimensionMismatch("Heisenberg observables must be 2x2");
    require_hermitian(x, "Heisenberg observable");
  }
  if (psi_s.size() != 0 && psi_s.size() != 2) throw DimensionMismatch("Schroedinger state must be a qubit");
  if (obs.empty()) throw InvalidParameter("no Heisenberg observables");
  if (trace_observable && *trace_observable >= obs.size()) throw InvalidParameter("trace_observable is out of range");
  if (!strongly_driven(*this)) {
    throw InvalidParameter("Heisenberg rates must satisfy |eps(t)| >= 10 max gamma_pm(t) on the grid");
  }
}

std::vector<CMatrix> HeisenbergConfig::observable_list() const {
  if (!observables.empty()) return observables;
  const PauliOps p = pauli_ops();
  return {p.sx, p.sz};
}

CVector HeisenbergConfig::schrodinger_state() const {
  if (psi_s.size() != 0) return psi_s.normalized();
  CVector psi(2);
  psi << std::cos(std::numbers::pi / 8), std::sin(std::numbers::pi / 8);
  return psi;
}

std::vector<std::size_t> HeisenbergConfig::record_steps() const {
  return evenly_spaced_steps(grid().steps(), n_records);
}

bool strongly_driven(const HeisenbergConfig& cfg) {
  const TimeGrid grid = cfg.grid();
  for (std::size_t s = 0; s <= grid.steps(); ++s) {
    const double t = grid.time(s);
    const double g = std::max(std::abs(cfg.gamma_minus(t)), std::abs(cfg.gamma_plus(t)));
    if (std::abs(cfg.eps(t)) < 10.0 * g) return false;
  }
  return true;
}

HeisenbergSeries run_heisenberg(const HeisenbergConfig& cfg) {
  cfg.validate();
  const TnpModel model = heisenberg_qubit(cfg.eps, cfg.gamma_minus, cfg.gamma_plus);
  const TimeGrid grid = cfg.grid();
  const std::size_t steps = grid.steps();
  const std::vector<std::size_t> recorded = cfg.record_steps();
  const CMatrix rho_s = projector(cfg.schrodinger_state());
  const std::vector<CMatrix> observables = cfg.observable_list();
  const std::size_t traced = cfg.trace_observable.value_or(observables.size() - 1);

  HeisenbergSeries out;
  out.names = cfg.observable_names;
  for (std::size_t s : recorded) out.times.push_back(grid.time(s));
  out.distinct.assign(recorded.size(), 0);

  RunOptions options;
  options.scheme.method = cfg.method;
  options.exec = cfg.exec;

  for (std::size_t o = 0; o < observables.size(); ++o) {
    const CMatrix& x0 = observables[o];
    const OperatorTrajectory reference = integrate(model, x0, grid);
    std::vector<double> exact;
    for (std::size_t s : recorded) exact.push_back((reference.values[s] * rho_s).trace().real());
    out.exact.push_back(std::move(exact));

    // Hermitian observable: X = mu_+ rho_+ - mu_- rho_-, each part unraveled on its own.
    const PositiveSplit parts = split_positive(split_hermitian(x0).hermitian);
    struct Component {
      double weight;
      CMatrix rho;
    };
    std::vector<Component> components;
    if (parts.rho_plus) components.push_back({parts.mu_plus, *parts.rho_plus});
    if (parts.rho_minus) components.push_back({-parts.mu_minus, *parts.rho_minus});

    std::vector<double> mean(recorded.size(), 0.0);
    std::vector<double> var(recorded.size(), 0.0);
    for (std::size_t c = 0; c < components.size(); ++c) {
      const Component& comp = components[c];
      const bool trace_source = o == traced && c == 0;
      if (trace_source) {
        const OperatorTrajectory tr = integrate(model, comp.rho, grid);
        for (std::size_t s : recorded) out.trace_exact.push_back(tr.values[s].trace().real());
      }
      Ensemble e = sample_initial(eigen_decomposition(comp.rho), cfg.n_trajectories,
                                  mix64(cfg.seed + 0x3000 * (o + 1) + c), cfg.n_batches);
      e.time = grid.t0;
      std::size_t r = 0;
      for (std::size_t s = 0; s <= steps; ++s) {
        if (r < recorded.size() && recorded[r] == s) {
          const Estimate est = observable_with_error(e, rho_s, s);
          mean[r] += comp.weight * est.mean;
          var[r] += comp.weight * comp.weight * est.se * est.se;
          out.distinct[r] += distinct_states(e);
          if (trace_source) out.trace.push_back(trace_with_error(e, s));
          ++r;
        }
        if (s == steps) break;
        step_ensemble(model, e, grid.dt, options);
        e.time = grid.time(s + 1);
      }
    }
    std::vector<Estimate> series;
    for (std::size_t r = 0; r < recorded.size(); ++r) series.push_back({mean[r], std::sqrt(var[r])});
    out.estimate.push_back(std::move(series));
  }
  return out;
}

} // namespace tnp
