#pragma once

// One time step of a single realization for trace-nonpreserving generators.
//
// Both unraveling schemes (jump operators or rate-operator eigenbranches)
// produce a list of forward jump branches plus the deterministic state. The
// trace change <Gamma_L - Gamma>_psi dt is absorbed by disappearance (p_d) or
// replication (p_c) of the realization, and negative branches are handled by
// reverse jumps of realizations sitting in the branch target.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tnp/model.hpp"

namespace tnp {

enum class Method { mcwf, ro };

/// C_psi gauge freedom of the rate-operator scheme.
struct RoStrategy {
  enum class Kind { zero, user };
  Kind kind = Kind::zero;
  std::function<CMatrix(const CVector& psi, double t)> transform;

  static RoStrategy zero() { return {}; }
  static RoStrategy user(std::function<CMatrix(const CVector&, double)> fn) {
    return {Kind::user, std::move(fn)};
  }
  CMatrix evaluate(const CVector& psi, double t) const;
};

struct SchemeSpec {
  Method method = Method::mcwf;
  RoStrategy strategy;
  bool reverse_jumps = false;
  /// StepTooLarge fires when sum |p_j| + p_d + p_c exceeds this.
  double step_guard = 0.1;
};

struct StepProbabilities {
  std::vector<double> p_jump;  // per channel (MCWF) or per kept eigenbranch (RO)
  double p_det = 0.0;          // 1 - sum p_jump - |<Gamma_L - Gamma>| dt
  double p_d = 0.0;
  double p_c = 0.0;
  double p_total = 0.0;        // p_T = 1 + dt <Gamma_L - Gamma> to first order
  double det_norm_sq = 0.0;    // ||(1 - i K dt) psi||^2, normalizes the drift
  double dt = 0.0;

  double sum() const;
  double jump_total() const;
};

struct Branch {
  double prob = 0.0;  // may be negative
  CVector target;     // normalized; empty when prob == 0
};

/// Everything one realization needs for a step, before any reverse jumps.
struct LocalStep {
  std::vector<Branch> branches;
  double delta = 0.0;  // <Gamma_L - Gamma>_psi
  double dt = 0.0;
  CVector psi_det;
  double det_norm_sq = 0.0;
  double gamma_expect = 0.0;  // <Gamma>_psi
  double c_expect = 0.0;      // Re <C_psi>, zero for MCWF

  StepProbabilities probabilities() const;
};

/// Builds the branches and drift for psi under a pre-evaluated generator.
/// Throws ZeroNorm when the drifted state collapses.
LocalStep local_step(const GeneratorAt& gen, const CVector& psi, double dt, const SchemeSpec& scheme);

/// Throws NegativeProbability (negative branch with reverse jumps off) and StepTooLarge.
void check_probabilities(const StepProbabilities& p, const SchemeSpec& scheme);

StepProbabilities step_probabilities(const TnpModel& model, const CVector& psi, double t, double dt,
                                     const SchemeSpec& scheme = {});
/// (1 - i K dt) psi / norm.
CVector deterministic_step(const TnpModel& model, const CVector& psi, double t, double dt);

// ---- rate operator ---------------------------------------------------------

struct RateOperator {
  CMatrix matrix;
  HermitianEigen eigen;
};

/// R_psi = sum_j gamma_j L_j|psi><psi|L_j^dagger + (C|psi><psi| + |psi><psi|C^dagger)/2.
RateOperator rate_operator(const GeneratorAt& gen, const CVector& psi, const RoStrategy& strategy);
RateOperator rate_operator(const TnpModel& model, const CVector& psi, double t, const RoStrategy& strategy);
StepProbabilities ro_step_probabilities(const TnpModel& model, const CVector& psi, double t, double dt,
                                        const RoStrategy& strategy, bool reverse_jumps = false);

// ---- reverse jumps ---------------------------------------------------------

/// A realization in the target of a negative branch of `source` may jump back to it.
struct ReverseOption {
  double weight = 0.0;  // |p_branch(source)| * N_source, before division by N_target
  const CVector* destination = nullptr;
};

/// |gamma_j| ||L_j psi'||^2 (N_psi' / N_psi) dt. Zero when gamma_j >= 0 or either count is zero.
double reverse_jump_probability(double gamma_j, const CVector& source_state, const CMatrix& op,
                                std::int64_t n_target, std::int64_t n_source, double dt);
/// |lambda_alpha(psi')| (N_psi' / N_psi) dt. Zero when lambda >= 0 or either count is zero.
double ro_reverse_jump_probability(double lambda, std::int64_t n_target, std::int64_t n_source, double dt);

// ---- outcomes --------------------------------------------------------------

enum class OutcomeKind { deterministic, jump, vanish, replicate, reverse_jump, source_creation };

struct OutcomeClass {
  OutcomeKind kind = OutcomeKind::deterministic;
  std::size_t index = 0;  // branch or reverse option
  double prob = 0.0;
};

/// Event partition used for drawing: [positive jumps | reverse jumps | p_d or p_c | deterministic].
/// Throws StepTooLarge if the deterministic remainder is negative.
std::vector<OutcomeClass> outcome_partition(const LocalStep& step, const std::vector<double>& reverse_probs);

struct StepOutcome {
  OutcomeKind kind = OutcomeKind::deterministic;
  std::size_t index = 0;
  std::vector<CVector> states;  // resulting realizations (empty for vanish, two for replicate)
};

/// States produced by one outcome class.
StepOutcome realize(const LocalStep& step, const OutcomeClass& oc,
                    const std::vector<const CVector*>& reverse_destinations);

/// Draws one outcome for a single realization from a uniform variate u in [0, 1).
StepOutcome advance_trajectory(const LocalStep& step, const std::vector<double>& reverse_probs,
                               const std::vector<const CVector*>& reverse_destinations, double u);

/// Exact one-step average sum_outcomes P(outcome) sum_states |phi><phi| (no sampling).
CMatrix one_step_expectation(const LocalStep& step, const std::vector<double>& reverse_probs = {},
                             const std::vector<const CVector*>& reverse_destinations = {});

} // namespace tnp
