#include "tnp/stepper.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <string>
#include <unordered_map>

#include "tnp/errors.hpp"

namespace tnp {

std::vector<SourceCreation> source_creation_events(const CMatrix& source, double dt, std::int64_t n_ref,
                                                   StreamRng& rng) {
  std::vector<SourceCreation> out;
  if (source.size() == 0 || source.cwiseAbs().maxCoeff() == 0.0) return out;
  const HermitianEigen eig = hermitian_eig(source);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double eta = eig.values[i];
    if (eta < -1e-6) {
      throw NegativeSource("source eigenvalue " + std::to_string(eta) + " below -1e-6");
    }
    const double mean = std::max(0.0, eta) * static_cast<double>(n_ref) * dt;
    if (!(mean > 0.0)) continue;
    std::poisson_distribution<std::int64_t> poisson(mean);
    const std::int64_t copies = poisson(rng);
    if (copies > 0) out.push_back({eig.vectors[static_cast<std::size_t>(i)], copies});
  }
  return out;
}

namespace {

struct Piece {
  CVector state;
  std::int64_t count = 0;
  bool parent = false;
};

struct MemberStep {
  std::vector<Piece> pieces;
  std::exception_ptr failure;
};

// Reverse-jump bookkeeping for one step: counts per (batch, state) and the
// negative branches that point at each (batch, state).
class CountSnapshot {
public:
  CountSnapshot(const GeneratorAt& gen, const Ensemble& e, double dt, const SchemeSpec& scheme) {
    member_entry_.reserve(e.members.size());
    for (const auto& m : e.members) {
      CanonicalKey key = canonical_key(m.state);
      key.q.push_back(m.batch);
      auto [it, inserted] = index_.emplace(std::move(key), entries_.size());
      if (inserted) entries_.push_back({0, &m.state, m.batch, {}});
      entries_[it->second].count += m.multiplicity;
      member_entry_.push_back(it->second);
    }
    for (auto& entry : entries_) {
      const LocalStep ls = local_step(gen, *entry.representative, dt, scheme);
      entry.destination = ls.psi_det;
      for (const auto& branch : ls.branches) {
        if (branch.prob >= 0.0) continue;
        CanonicalKey key = canonical_key(branch.target);
        key.q.push_back(entry.batch);
        sources_[std::move(key)].push_back(
            {-branch.prob * static_cast<double>(entry.count), &entry.destination});
      }
    }
  }

  /// Reverse probabilities for member i: weight / N_target.
  void options_for(std::size_t member, std::vector<double>& probs,
                   std::vector<const CVector*>& destinations) const {
    probs.clear();
    destinations.clear();
    const Entry& self = entries_[member_entry_[member]];
    if (sources_.empty()) return;
    CanonicalKey key = canonical_key(*self.representative);
    key.q.push_back(self.batch);
    const auto it = sources_.find(key);
    if (it == sources_.end()) return;
    for (const auto& opt : it->second) {
      probs.push_back(opt.weight / static_cast<double>(self.count));
      destinations.push_back(opt.destination);
    }
  }

private:
  struct Entry {
    std::int64_t count;
    const CVector* representative;
    std::uint32_t batch;
    CVector destination;
  };
  std::vector<Entry> entries_;
  std::vector<std::size_t> member_entry_;
  std::unordered_map<CanonicalKey, std::size_t, CanonicalKeyHash> index_;
  std::unordered_map<CanonicalKey, std::vector<ReverseOption>, CanonicalKeyHash> sources_;
};

std::vector<std::int64_t> split_counts(const std::vector<OutcomeClass>& classes, std::int64_t m,
                                       StreamRng& rng) {
  std::vector<std::int64_t> counts(classes.size(), 0);
  if (m == 1) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      acc += classes[c].prob;
      if (u < acc || c + 1 == classes.size()) {
        counts[c] = 1;
        break;
      }
    }
    return counts;
  }
  // Multinomial through conditional binomials.
  std::int64_t remaining = m;
  double mass = 1.0;
  for (std::size_t c = 0; c + 1 < classes.size() && remaining > 0; ++c) {
    const double p = mass > 0.0 ? std::clamp(classes[c].prob / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> binom(remaining, p);
    counts[c] = p > 0.0 ? binom(rng) : 0;
    remaining -= counts[c];
    mass -= classes[c].prob;
  }
  counts.back() += remaining;
  return counts;
}

MemberStep step_member(const GeneratorAt& gen, const Trajectory& m, std::size_t index, double dt,
                       const Ensemble& e, const SchemeSpec& scheme, const CountSnapshot* snapshot) {
  MemberStep out;
  const LocalStep ls = local_step(gen, m.state, dt, scheme);
  check_probabilities(ls.probabilities(), scheme);

  std::vector<double> reverse_probs;
  std::vector<const CVector*> destinations;
  if (snapshot) snapshot->options_for(index, reverse_probs, destinations);

  const std::vector<OutcomeClass> classes = outcome_partition(ls, reverse_probs);
  StreamRng rng({static_cast<std::uint64_t>(StreamTag::trajectory), e.seed, m.id, e.step_index});
  const std::vector<std::int64_t> counts = split_counts(classes, m.multiplicity, rng);

  std::int64_t parent_units = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const std::int64_t n = counts[c];
    if (n == 0) continue;
    switch (classes[c].kind) {
      case OutcomeKind::deterministic:
        parent_units += n;
        break;
      case OutcomeKind::replicate:
        parent_units += n;
        out.pieces.push_back({ls.psi_det, n, false});
        break;
      case OutcomeKind::vanish:
        break;
      case OutcomeKind::jump:
        out.pieces.push_back({ls.branches[classes[c].index].target, n, false});
        break;
      case OutcomeKind::reverse_jump:
        out.pieces.push_back({*destinations[classes[c].index], n, false});
        break;
      case OutcomeKind::source_creation:
        break;
    }
  }
  if (parent_units > 0) out.pieces.insert(out.pieces.begin(), Piece{ls.psi_det, parent_units, true});
  return out;
}

} // namespace

void step_ensemble(const TnpModel& model, Ensemble& e, double dt, const RunOptions& options) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  if (e.dimension != model.dim) throw DimensionMismatch("ensemble and model dimensions differ");
  const double t = e.time;
  const GeneratorAt gen = evaluate(model, t);
  const SchemeSpec& scheme = options.scheme;

  std::optional<CountSnapshot> snapshot;
  if (scheme.reverse_jumps) snapshot.emplace(gen, e, dt, scheme);
  const CountSnapshot* snap = snapshot ? &*snapshot : nullptr;

  const std::size_t n = e.members.size();
  std::vector<MemberStep> results(n);
  auto work = [&](std::size_t i) {
    try {
      results[i] = step_member(gen, e.members[i], i, dt, e, scheme, snap);
    } catch (...) {
      results[i].failure = std::current_exception();
    }
  };
  if (options.exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t i = 0; i < n; ++i) work(i);
  }
  for (const auto& r : results) {
    if (r.failure) std::rethrow_exception(r.failure);
  }

  std::vector<Trajectory> next;
  next.reserve(n + n / 8 + 16);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& m = e.members[i];
    for (auto& piece : results[i].pieces) {
      const std::uint64_t id = piece.parent ? m.id : e.fresh_id();
      next.push_back({id, std::move(piece.state), piece.count, m.batch});
    }
  }

  const bool has_source = options.batch_source || model.source;
  if (has_source) {
    for (std::size_t b = 0; b < e.n_batches(); ++b) {
      const CMatrix s = options.batch_source ? options.batch_source(t, b) : *gen.source;
      StreamRng rng({static_cast<std::uint64_t>(StreamTag::source), e.seed, e.step_index, b});
      for (auto& created : source_creation_events(s, dt, e.batch_ref[b], rng)) {
        next.push_back({e.fresh_id(), std::move(created.state), created.copies, static_cast<std::uint32_t>(b)});
      }
    }
  }

  e.members = std::move(next);
  if (options.merge.value_or(!scheme.reverse_jumps)) e = merge_duplicates(e);
  e.time = t + dt;
  ++e.step_index;
}

std::vector<RunRecord> run(const TnpModel& model, Ensemble& e, const TimeGrid& grid, const RunOptions& options) {
  grid.validate();
  if (options.record_every == 0) throw InvalidParameter("record_every must be positive");
  const std::size_t steps = grid.steps();
  std::vector<RunRecord> records;
  auto record = [&](std::size_t k) {
    RunRecord r;
    r.t = e.time;
    r.average = average_state(e);
    r.trace = trace_with_error(e, k);
    r.distinct = distinct_states(e);
    r.total = total_count(e);
    records.push_back(std::move(r));
    if (options.observer) options.observer(e);
  };

  e.time = grid.t0;
  record(0);
  for (std::size_t k = 0; k < steps; ++k) {
    step_ensemble(model, e, grid.dt, options);
    e.time = grid.time(k + 1);
    if ((k + 1) % options.record_every == 0 || k + 1 == steps) record(k + 1);
  }
  return records;
}

} // namespace tnp
