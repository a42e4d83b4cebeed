#pragma once

// Multisets of pure-state realizations with a varying total count.
//
//   rho(t) = sum_i N_i(t) / N |psi_i(t)><psi_i(t)|
//
// Realizations are also tagged with a batch label at creation. Batches are
// independent replicas of the whole run and are the resampling unit for the
// bootstrap standard errors.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "tnp/linops.hpp"

namespace tnp {

struct Trajectory {
  std::uint64_t id = 0;
  CVector state;
  std::int64_t multiplicity = 1;  // N_i: number of identical realizations
  std::uint32_t batch = 0;
};

struct Ensemble {
  std::vector<Trajectory> members;
  std::int64_t n_ref = 0;              // N
  std::vector<std::int64_t> batch_ref; // reference count per batch, sums to n_ref
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t next_id = 0;
  std::uint64_t step_index = 0;
  Eigen::Index dimension = 0;

  std::size_t n_batches() const { return batch_ref.size(); }
  /// Empty ensemble with the given reference counts (used for inhomogeneous stages).
  static Ensemble empty(Eigen::Index dim, std::vector<std::int64_t> batch_ref, std::uint64_t seed);

  std::uint64_t fresh_id() { return next_id++; }
};

/// Quantized, phase-fixed amplitudes used to identify equal states.
struct CanonicalKey {
  std::vector<std::int64_t> q;
  bool operator==(const CanonicalKey&) const = default;
};

struct CanonicalKeyHash {
  std::size_t operator()(const CanonicalKey& k) const;
};

inline constexpr double kKeyQuantum = 1e-8;
CanonicalKey canonical_key(const CVector& psi);

/// sum_i N_i |psi_i><psi_i| / n_ref.
CMatrix average_state(const Ensemble& e);
/// sum_i N_i / n_ref.
double trace_estimate(const Ensemble& e);
std::int64_t total_count(const Ensemble& e);
std::size_t distinct_states(const Ensemble& e);

/// Merges members of the same batch whose canonical keys coincide.
Ensemble merge_duplicates(const Ensemble& e);

/// Largest-remainder allocation of n realizations over the listed pure states,
/// dealt round-robin into n_batches batches. Throws EmptyDecomposition.
Ensemble sample_initial(const std::vector<std::pair<double, CVector>>& decomposition, std::int64_t n,
                        std::uint64_t seed, std::size_t n_batches = 1);

/// Largest-remainder integer allocation (ties go to the lower index).
std::vector<std::int64_t> largest_remainder(const std::vector<double>& weights, std::int64_t n);

// ---- estimation ------------------------------------------------------------

/// Per-batch unnormalized sums sum_{i in b} N_i |psi_i><psi_i|.
std::vector<CMatrix> batch_state_sums(const Ensemble& e);
/// Per-batch total counts.
std::vector<double> batch_counts(const Ensemble& e);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Ratio estimator sum(numer) / sum(denom) with a bootstrap standard error
/// over batches (resampled with replacement).
Estimate bootstrap_ratio(const std::vector<double>& numer, const std::vector<double>& denom,
                         int resamples, std::uint64_t seed);

inline constexpr int kBootstrapResamples = 200;

/// Trace estimate with its bootstrap standard error.
Estimate trace_with_error(const Ensemble& e, std::uint64_t tag);
/// tr[A rho] estimate with its bootstrap standard error (real part).
Estimate observable_with_error(const Ensemble& e, const CMatrix& a, std::uint64_t tag);

// ---- checkpoints -----------------------------------------------------------

/// JSON lines: one header record then one record per trajectory.
void write_checkpoint(const Ensemble& e, std::ostream& out);
Ensemble read_checkpoint(std::istream& in);

} // namespace tnp
