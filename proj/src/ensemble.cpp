#include "tnp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "tnp/errors.hpp"
#include "tnp/rng.hpp"

namespace tnp {

Ensemble Ensemble::empty(Eigen::Index dim, std::vector<std::int64_t> batch_ref, std::uint64_t seed) {
  if (batch_ref.empty()) throw InvalidParameter("ensemble needs at least one batch");
  Ensemble e;
  e.dimension = dim;
  e.batch_ref = std::move(batch_ref);
  e.n_ref = std::accumulate(e.batch_ref.begin(), e.batch_ref.end(), std::int64_t{0});
  if (e.n_ref <= 0) throw InvalidParameter("ensemble reference count must be positive");
  e.seed = seed;
  return e;
}

std::size_t CanonicalKeyHash::operator()(const CanonicalKey& k) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t v : k.q) h = mix64(h ^ static_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

CanonicalKey canonical_key(const CVector& psi) {
  const CVector fixed = fix_global_phase(psi);
  CanonicalKey key;
  key.q.reserve(static_cast<std::size_t>(2 * fixed.size()));
  for (Eigen::Index i = 0; i < fixed.size(); ++i) {
    key.q.push_back(std::llround(fixed[i].real() / kKeyQuantum));
    key.q.push_back(std::llround(fixed[i].imag() / kKeyQuantum));
  }
  return key;
}

CMatrix average_state(const Ensemble& e) {
  CMatrix rho = CMatrix::Zero(e.dimension, e.dimension);
  for (const auto& m : e.members) {
    rho.noalias() += static_cast<double>(m.multiplicity) * (m.state * m.state.adjoint());
  }
  return rho / static_cast<double>(e.n_ref);
}

std::int64_t total_count(const Ensemble& e) {
  std::int64_t total = 0;
  for (const auto& m : e.members) total += m.multiplicity;
  return total;
}

double trace_estimate(const Ensemble& e) {
  return static_cast<double>(total_count(e)) / static_cast<double>(e.n_ref);
}

std::size_t distinct_states(const Ensemble& e) {
  std::unordered_map<CanonicalKey, int, CanonicalKeyHash> seen;
  for (const auto& m : e.members) seen.emplace(canonical_key(m.state), 0);
  return seen.size();
}

Ensemble merge_duplicates(const Ensemble& e) {
  Ensemble out = e;
  out.members.clear();
  std::vector<std::unordered_map<CanonicalKey, std::size_t, CanonicalKeyHash>> index(e.n_batches());
  for (const auto& m : e.members) {
    auto [it, inserted] = index[m.batch].emplace(canonical_key(m.state), out.members.size());
    if (inserted) {
      out.members.push_back(m);
    } else {
      out.members[it->second].multiplicity += m.multiplicity;
    }
  }
  return out;
}

std::vector<std::int64_t> largest_remainder(const std::vector<double>& weights, std::int64_t n) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(total > 0.0)) throw EmptyDecomposition("no positive weights to allocate");
  std::vector<std::int64_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0) throw InvalidParameter("allocation weights must be non-negative");
    const double quota = static_cast<double>(n) * weights[i] / total;
    counts[i] = static_cast<std::int64_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

Ensemble sample_initial(const std::vector<std::pair<double, CVector>>& decomposition, std::int64_t n,
                        std::uint64_t seed, std::size_t n_batches) {
  if (decomposition.empty()) throw EmptyDecomposition("initial state decomposition is empty");
  if (n <= 0) throw InvalidParameter("number of trajectories must be positive");
  if (n_batches == 0 || static_cast<std::int64_t>(n_batches) > n) {
    throw InvalidParameter("number of batches must be between 1 and the number of trajectories");
  }
  const Eigen::Index dim = decomposition.front().second.size();
  std::vector<double> weights;
  for (const auto& [w, psi] : decomposition) {
    if (psi.size() != dim) throw DimensionMismatch("initial states have different dimensions");
    weights.push_back(w);
  }
  const std::vector<std::int64_t> counts = largest_remainder(weights, n);

  std::vector<std::int64_t> batch_ref(n_batches, 0);
  for (std::int64_t r = 0; r < n; ++r) ++batch_ref[static_cast<std::size_t>(r) % n_batches];
  Ensemble e = Ensemble::empty(dim, batch_ref, seed);

  // Realization r (ordered by state) goes to batch r mod n_batches.
  std::int64_t offset = 0;
  for (std::size_t s = 0; s < decomposition.size(); ++s) {
    if (counts[s] == 0) continue;
    const double norm = decomposition[s].second.norm();
    if (!(norm > 0)) throw InvalidParameter("initial state with zero norm");
    const CVector psi = decomposition[s].second / norm;
    for (std::size_t b = 0; b < n_batches; ++b) {
      // number of r in [offset, offset + counts[s]) with r % n_batches == b
      const auto B = static_cast<std::int64_t>(n_batches);
      const auto bi = static_cast<std::int64_t>(b);
      auto below = [&](std::int64_t x) { return x <= bi ? 0 : (x - bi - 1) / B + 1; };
      const std::int64_t in_batch = below(offset + counts[s]) - below(offset);
      if (in_batch > 0) e.members.push_back({e.fresh_id(), psi, in_batch, static_cast<std::uint32_t>(b)});
    }
    offset += counts[s];
  }
  return e;
}

// ---- estimation ------------------------------------------------------------

std::vector<CMatrix> batch_state_sums(const Ensemble& e) {
  std::vector<CMatrix> sums(e.n_batches(), CMatrix::Zero(e.dimension, e.dimension));
  for (const auto& m : e.members) {
    sums[m.batch].noalias() += static_cast<double>(m.multiplicity) * (m.state * m.state.adjoint());
  }
  return sums;
}

std::vector<double> batch_counts(const Ensemble& e) {
  std::vector<double> counts(e.n_batches(), 0.0);
  for (const auto& m : e.members) counts[m.batch] += static_cast<double>(m.multiplicity);
  return counts;
}

Estimate bootstrap_ratio(const std::vector<double>& numer, const std::vector<double>& denom,
                         int resamples, std::uint64_t seed) {
  if (numer.size() != denom.size() || numer.empty()) {
    throw InvalidParameter("bootstrap_ratio: mismatched or empty inputs");
  }
  const std::size_t nb = numer.size();
  const double total_den = std::accumulate(denom.begin(), denom.end(), 0.0);
  Estimate est;
  est.mean = std::accumulate(numer.begin(), numer.end(), 0.0) / total_den;
  if (nb < 2 || resamples < 2) return est;

  StreamRng rng({static_cast<std::uint64_t>(StreamTag::bootstrap), seed});
  std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < resamples; ++r) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t b = pick(rng);
      num += numer[b];
      den += denom[b];
    }
    const double value = den > 0 ? num / den : 0.0;
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / resamples;
  est.se = std::sqrt(std::max(0.0, (sum_sq - resamples * mean * mean) / (resamples - 1)));
  return est;
}

Estimate trace_with_error(const Ensemble& e, std::uint64_t tag) {
  std::vector<double> denom(e.batch_ref.begin(), e.batch_ref.end());
  return bootstrap_ratio(batch_counts(e), denom, kBootstrapResamples, mix64(e.seed ^ tag));
}

Estimate observable_with_error(const Ensemble& e, const CMatrix& a, std::uint64_t tag) {
  const std::vector<CMatrix> sums = batch_state_sums(e);
  std::vector<double> numer;
  numer.reserve(sums.size());
  for (const auto& s : sums) numer.push_back((a * s).trace().real());
  std::vector<double> denom(e.batch_ref.begin(), e.batch_ref.end());
  return bootstrap_ratio(numer, denom, kBootstrapResamples, mix64(e.seed ^ tag));
}

// ---- checkpoints -----------------------------------------------------------

void write_checkpoint(const Ensemble& e, std::ostream& out) {
  nlohmann::json header = {{"kind", "ensemble"},   {"dim", e.dimension},
                           {"n_ref", e.n_ref},     {"batch_ref", e.batch_ref},
                           {"time", e.time},       {"seed", e.seed},
                           {"next_id", e.next_id}, {"step_index", e.step_index}};
  out << header.dump() << '\n';
  for (const auto& m : e.members) {
    nlohmann::json amps = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.state.size(); ++i) amps.push_back({m.state[i].real(), m.state[i].imag()});
    nlohmann::json rec = {{"kind", "trajectory"}, {"id", m.id},       {"multiplicity", m.multiplicity},
                          {"batch", m.batch},     {"amplitudes", amps}, {"time", e.time},
                          {"seed", e.seed}};
    out << rec.dump() << '\n';
  }
}

Ensemble read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("checkpoint is empty");
  const auto header = nlohmann::json::parse(line);
  if (header.value("kind", "") != "ensemble") throw ConfigError("checkpoint header record missing");
  Ensemble e = Ensemble::empty(header.at("dim").get<Eigen::Index>(),
                               header.at("batch_ref").get<std::vector<std::int64_t>>(),
                               header.at("seed").get<std::uint64_t>());
  e.time = header.at("time").get<double>();
  e.next_id = header.at("next_id").get<std::uint64_t>();
  e.step_index = header.at("step_index").get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Trajectory t;
    t.id = rec.at("id").get<std::uint64_t>();
    t.multiplicity = rec.at("multiplicity").get<std::int64_t>();
    t.batch = rec.at("batch").get<std::uint32_t>();
    const auto& amps = rec.at("amplitudes");
    t.state.resize(static_cast<Eigen::Index>(amps.size()));
    for (std::size_t i = 0; i < amps.size(); ++i) {
      t.state[static_cast<Eigen::Index>(i)] = cplx(amps[i].at(0).get<double>(), amps[i].at(1).get<double>());
    }
    if (t.state.size() != e.dimension) throw ConfigError("checkpoint trajectory has the wrong dimension");
    if (t.batch >= e.n_batches()) throw ConfigError("checkpoint trajectory batch out of range");
    e.members.push_back(std::move(t));
  }
  return e;
}

} // namespace tnp
