#pragma once

// Time-synchronous ensemble stepping.
//
// Within a step every trajectory advances independently against an immutable
// snapshot of per-state counts; spawned, removed and created realizations are
// applied afterwards in member order. Draws come from counter-based streams
// keyed by (seed, trajectory id, step), so results do not depend on the
// number of worker threads.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tnp/ensemble.hpp"
#include "tnp/exact.hpp"
#include "tnp/rng.hpp"
#include "tnp/unraveling.hpp"

namespace tnp {

struct SourceCreation {
  CVector state;
  std::int64_t copies = 0;
};

/// Spectral decomposition sum_i eta_i |xi_i><xi_i| of the source, then
/// copies_i ~ Poisson(eta_i n_ref dt). Eigenvalues in [-1e-6, 0) are clamped
/// to zero; anything lower throws NegativeSource.
std::vector<SourceCreation> source_creation_events(const CMatrix& source, double dt, std::int64_t n_ref,
                                                   StreamRng& rng);

struct RunOptions {
  SchemeSpec scheme;
  std::size_t record_every = 1;
  /// Merge equal states after each step. Defaults to on unless reverse jumps are enabled.
  std::optional<bool> merge;
  Execution exec = Execution::parallel;
  /// Per-batch source S_b(t). Falls back to model.source for every batch.
  std::function<CMatrix(double t, std::size_t batch)> batch_source;
  /// Called on every recorded ensemble (including the initial one).
  std::function<void(const Ensemble&)> observer;
};

struct RunRecord {
  double t = 0.0;
  CMatrix average;        // unnormalized average state
  Estimate trace;         // sum_i N_i / N with bootstrap error
  std::size_t distinct = 0;
  std::int64_t total = 0;
};

/// Advances the ensemble from ensemble.time by dt.
void step_ensemble(const TnpModel& model, Ensemble& ensemble, double dt, const RunOptions& options);

/// Steps over the grid, recording every `record_every` steps and at the end.
std::vector<RunRecord> run(const TnpModel& model, Ensemble& ensemble, const TimeGrid& grid,
                           const RunOptions& options);

} // namespace tnp
