#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tnp/errors.hpp"
#include "tnp/experiments.hpp"

using namespace tnp;

namespace {

PhotonCountingConfig small_counting() {
  PhotonCountingConfig cfg;
  cfg.k_max = 2;
  cfg.t_final = 1.0;
  cfg.n_trajectories = 4000;
  cfg.n_batches = 40;
  cfg.n_records = 4;
  cfg.seed = 3;
  return cfg;
}

HeisenbergConfig small_heisenberg() {
  HeisenbergConfig cfg;
  cfg.t_final = 0.5;
  cfg.n_trajectories = 4000;
  cfg.n_batches = 40;
  cfg.n_records = 5;
  cfg.seed = 5;
  return cfg;
}

} // namespace

TEST_CASE("evenly spaced recording steps") {
  CHECK(evenly_spaced_steps(300, 3) == std::vector<std::size_t>{0, 100, 200, 300});
  CHECK(evenly_spaced_steps(10, 4) == std::vector<std::size_t>{0, 3, 5, 8, 10});
  CHECK(evenly_spaced_steps(2, 10) == std::vector<std::size_t>{0, 1, 2});
  CHECK(evenly_spaced_steps(0, 5) == std::vector<std::size_t>{0});
}

TEST_CASE("photon counting configuration") {
  PhotonCountingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.initial_state().size() == cfg.params.n_max);
  CHECK(std::abs(cfg.initial_state()[1] - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(cfg.record_steps().front() == 0);
  CHECK(cfg.record_steps().back() == 300);

  auto bad = [](auto edit) {
    PhotonCountingConfig c;
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.k_max = -1; }).validate(), InvalidParameter);
  CHECK_THROWS_AS(bad([](auto& c) { c.dt = 0.0; }).validate(), InvalidParameter);
  CHECK_THROWS_AS(bad([](auto& c) { c.zeta_list = {-1.0}; }).validate(), InvalidParameter);
  CHECK_THROWS_AS(bad([](auto& c) { c.n_batches = 20000; }).validate(), InvalidParameter);
  CHECK_THROWS_AS(bad([](auto& c) { c.psi0 = CVector::Ones(3); }).validate(), DimensionMismatch);
}

TEST_CASE("cutoff leakage is detected") {
  PhotonCountingConfig cfg = small_counting();
  cfg.params.n_max = 6;
  CHECK_THROWS_AS(run_photon_counting(cfg), CutoffLeakage);

  CountingParams p;
  p.n_max = 20;
  const CMatrix rho0 = small_counting().initial_state() * small_counting().initial_state().adjoint();
  const HierarchySolution sol = solve_hierarchy(tilted_lindbladian(p, 0.0), kEmissionChannel, 0, rho0,
                                                TimeGrid(0.0, 3.0, 1e-2));
  CHECK_NOTHROW(check_cutoff(sol, 1e-6));
  CHECK_THROWS_AS(check_cutoff(sol, 1e-9), CutoffLeakage);
}

TEST_CASE("factorial moments through the source hierarchy") {
  const PhotonCountingConfig cfg = small_counting();
  const MomentSeries series = run_photon_counting(cfg);
  REQUIRE(series.times.size() == 5);
  REQUIRE(series.estimate.size() == 3);
  for (std::size_t r = 0; r < series.times.size(); ++r) {
    CHECK(series.estimate[0][r].mean == 1.0);
    CHECK(series.exact[0][r] == doctest::Approx(1.0).epsilon(1e-10));
  }
  for (std::size_t k = 1; k <= 2; ++k) {
    CHECK(series.estimate[k][0].mean == 0.0);
    CHECK(series.exact[k][0] == 0.0);
  }
  // First stage at t = 1 against the hierarchy.
  const Estimate mu1 = series.estimate[1].back();
  CHECK(std::abs(mu1.mean - series.exact[1].back()) <= 3.0 * mu1.se);
  CHECK(mu1.se > 0.0);
  // The base model preserves counts, so created realizations never vanish.
  for (std::size_t r = 1; r < series.times.size(); ++r) {
    CHECK(series.estimate[1][r].mean >= series.estimate[1][r - 1].mean);
  }
}

TEST_CASE("exact moments for pure emission") {
  // Counting channel only: mu_1 is the cumulative emission probability-weighted count.
  CountingParams p;
  p.nbar = 0.0;
  p.omega = 0.0;
  p.n_max = 6;
  CVector psi = CVector::Zero(6);
  psi[2] = 1.0;
  const HierarchySolution sol = solve_hierarchy(tilted_lindbladian(p, 0.0), kEmissionChannel, 2,
                                                psi * psi.adjoint(), TimeGrid(0.0, 4.0, 1e-3));
  for (std::size_t i = 0; i < sol.moments[1].size(); i += 100) {
    const double t = 1e-3 * static_cast<double>(i);
    // Two photons decaying independently: mu_1 = 2 (1 - e^{-t}), mu_2 = 2 (1 - e^{-t})^2.
    const double q = 1.0 - std::exp(-t);
    CHECK(sol.moments[1][i] == doctest::Approx(2.0 * q).epsilon(1e-9));
    CHECK(sol.moments[2][i] == doctest::Approx(2.0 * q * q).epsilon(1e-9));
    CHECK(std::abs(sol.tau[1].values[i].trace().imag()) < 1e-10);
    if (i > 0) CHECK(sol.moments[1][i] >= sol.moments[1][i - 100]);
  }
}

TEST_CASE("tilted traces") {
  PhotonCountingConfig cfg = small_counting();
  cfg.zeta_list = {-0.02, 0.0, 0.02};
  const std::vector<TiltedRow> rows = run_tilted_trace(cfg);
  REQUIRE(rows.size() == 3 * cfg.record_steps().size());
  for (const auto& row : rows) {
    if (row.zeta == 0.0) {
      CHECK(row.trace.mean == 1.0);
      CHECK(row.trace_exact == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(std::abs(row.trace.mean - row.trace_exact) <= 3.0 * row.trace.se + 1e-12);
      if (row.t > 0.0) CHECK((row.trace_exact - 1.0) * row.zeta > 0.0);
    }
  }
}

TEST_CASE("Heisenberg configuration") {
  HeisenbergConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(strongly_driven(cfg));
  CHECK(cfg.observable_list().size() == 2);
  CHECK(cfg.schrodinger_state()[0].real() == doctest::Approx(std::cos(M_PI / 8)));

  HeisenbergConfig weak = cfg;
  weak.eps = TimeScalar(5.0);
  CHECK_FALSE(strongly_driven(weak));
  CHECK_THROWS_AS(weak.validate(), InvalidParameter);

  HeisenbergConfig nonherm = cfg;
  nonherm.observables = {oracle::lowering()};
  nonherm.observable_names = {"minus"};
  CHECK_THROWS_AS(nonherm.validate(), NonHermitianInput);

  HeisenbergConfig index = cfg;
  index.trace_observable = 2;
  CHECK_THROWS_AS(index.validate(), InvalidParameter);
}

TEST_CASE("Heisenberg observables against the exact propagator") {
  const HeisenbergSeries s = run_heisenberg(small_heisenberg());
  REQUIRE(s.names == std::vector<std::string>{"x", "z"});
  REQUIRE(s.times.size() == 6);
  const double x0 = std::sin(M_PI / 4);
  CHECK(s.estimate[0][0].mean == doctest::Approx(x0).epsilon(1e-12));
  CHECK(s.exact[1][0] == doctest::Approx(std::cos(M_PI / 4)).epsilon(1e-12));
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t r = 1; r < s.times.size(); ++r) {
      CHECK(std::abs(s.estimate[o][r].mean - s.exact[o][r]) <= 3.0 * s.estimate[o][r].se);
    }
  }
  // The trace series is cumulative, so its points are strongly correlated and
  // a single excursion spans several records; allow 4 standard errors here.
  for (std::size_t r = 1; r < s.times.size(); ++r) {
    CHECK(std::abs(s.trace[r].mean - s.trace_exact[r]) <= 4.0 * s.trace[r].se + 1e-12);
  }
}

TEST_CASE("Heisenberg special cases") {
  SUBCASE("no dynamics keeps X constant") {
    HeisenbergConfig cfg = small_heisenberg();
    cfg.eps = TimeScalar(0.0);
    cfg.gamma_minus = TimeScalar(0.0);
    cfg.gamma_plus = TimeScalar(0.0);
    const HeisenbergSeries s = run_heisenberg(cfg);
    for (std::size_t o = 0; o < 2; ++o) {
      for (std::size_t r = 0; r < s.times.size(); ++r) {
        CHECK(s.estimate[o][r].mean == doctest::Approx(s.estimate[o][0].mean).epsilon(1e-12));
      }
    }
  }

  SUBCASE("unital generator preserves the identity") {
    HeisenbergConfig cfg = small_heisenberg();
    cfg.gamma_plus = TimeScalar(1.0);
    cfg.observables = {CMatrix::Identity(2, 2)};
    cfg.observable_names = {"id"};
    const HeisenbergSeries s = run_heisenberg(cfg);
    // Counts are conserved exactly; the averaged state still fluctuates.
    for (std::size_t r = 0; r < s.times.size(); ++r) {
      CHECK(s.trace[r].mean == 1.0);
      CHECK(std::abs(s.estimate[0][r].mean - 1.0) <= 3.0 * s.estimate[0][r].se + 1e-12);
    }
  }
}
