#include "tnp/unraveling.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "tnp/errors.hpp"

namespace tnp {

CMatrix RoStrategy::evaluate(const CVector& psi, double t) const {
  if (kind == Kind::zero || !transform) return CMatrix::Zero(psi.size(), psi.size());
  CMatrix c = transform(psi, t);
  if (c.rows() != psi.size() || c.cols() != psi.size()) {
    throw DimensionMismatch("rate-operator transform returned a matrix of the wrong size");
  }
  if (!c.allFinite()) throw NonFiniteState("rate-operator transform returned non-finite entries");
  return c;
}

double StepProbabilities::jump_total() const {
  return std::accumulate(p_jump.begin(), p_jump.end(), 0.0);
}

double StepProbabilities::sum() const { return jump_total() + p_det + p_d + p_c; }

namespace {

constexpr double kPruneEigen = 1e-14;
constexpr double kZeroNormSq = 1e-28;

void drift(const CMatrix& k_eff, const CVector& psi, double dt, LocalStep& out) {
  CVector unnorm = psi - (kI * dt) * (k_eff * psi);
  out.det_norm_sq = unnorm.squaredNorm();
  if (!(out.det_norm_sq > kZeroNormSq)) {
    throw ZeroNorm("deterministic state norm fell below 1e-14");
  }
  out.psi_det = unnorm / std::sqrt(out.det_norm_sq);
}

} // namespace

LocalStep local_step(const GeneratorAt& gen, const CVector& psi, double dt, const SchemeSpec& scheme) {
  LocalStep out;
  out.dt = dt;
  out.delta = psi.dot(gen.delta * psi).real();
  out.gamma_expect = psi.dot(gen.gamma * psi).real();

  if (scheme.method == Method::mcwf) {
    out.branches.resize(gen.ops.size());
    for (std::size_t j = 0; j < gen.ops.size(); ++j) {
      CVector v = (*gen.ops[j]) * psi;
      const double n2 = v.squaredNorm();
      if (n2 > 0.0 && gen.rates[j] != 0.0) {
        out.branches[j].prob = gen.rates[j] * n2 * dt;
        out.branches[j].target = v / std::sqrt(n2);
      }
    }
    drift(gen.k_eff, psi, dt, out);
    return out;
  }

  const CMatrix c = scheme.strategy.evaluate(psi, gen.t);
  CMatrix r = CMatrix::Zero(psi.size(), psi.size());
  for (std::size_t j = 0; j < gen.ops.size(); ++j) {
    if (gen.rates[j] == 0.0) continue;
    const CVector v = (*gen.ops[j]) * psi;
    r.noalias() += gen.rates[j] * (v * v.adjoint());
  }
  if (scheme.strategy.kind == RoStrategy::Kind::user) {
    const CVector cpsi = c * psi;
    r += 0.5 * (cpsi * psi.adjoint() + psi * cpsi.adjoint());
    out.c_expect = psi.dot(cpsi).real();
  }
  r = 0.5 * (r + r.adjoint());
  const HermitianEigen eig = hermitian_eig(r);
  for (Eigen::Index a = 0; a < eig.values.size(); ++a) {
    const double lambda = eig.values[a];
    if (std::abs(lambda) < kPruneEigen) continue;
    out.branches.push_back({lambda * dt, eig.vectors[static_cast<std::size_t>(a)]});
  }
  drift(gen.k_eff - 0.5 * kI * c, psi, dt, out);
  return out;
}

StepProbabilities LocalStep::probabilities() const {
  StepProbabilities p;
  p.dt = dt;
  p.p_jump.reserve(branches.size());
  for (const auto& b : branches) p.p_jump.push_back(b.prob);
  const double jumps = p.jump_total();
  p.p_det = 1.0 - jumps - std::abs(delta) * dt;
  p.p_d = std::max(0.0, -delta * dt);
  p.p_c = std::max(0.0, delta * dt);
  p.p_total = jumps + (1.0 - dt * (gamma_expect + c_expect));
  p.det_norm_sq = det_norm_sq;
  return p;
}

void check_probabilities(const StepProbabilities& p, const SchemeSpec& scheme) {
  double magnitude = p.p_d + p.p_c;
  for (std::size_t j = 0; j < p.p_jump.size(); ++j) {
    const double pj = p.p_jump[j];
    magnitude += std::abs(pj);
    if (!scheme.reverse_jumps && pj < -1e-12 * p.dt) {
      throw NegativeProbability("branch " + std::to_string(j) + " has p = " + std::to_string(pj) +
                                " and reverse jumps are disabled");
    }
  }
  if (magnitude > scheme.step_guard) {
    throw StepTooLarge("sum |p_j| + p_d + p_c = " + std::to_string(magnitude) + " exceeds " +
                       std::to_string(scheme.step_guard) + "; reduce dt");
  }
}

StepProbabilities step_probabilities(const TnpModel& model, const CVector& psi, double t, double dt,
                                     const SchemeSpec& scheme) {
  if (!(dt > 0)) throw InvalidParameter("dt must be positive");
  if (psi.size() != model.dim) throw DimensionMismatch("state dimension does not match model");
  const LocalStep step = local_step(evaluate(model, t), psi, dt, scheme);
  StepProbabilities p = step.probabilities();
  check_probabilities(p, scheme);
  return p;
}

CVector deterministic_step(const TnpModel& model, const CVector& psi, double t, double dt) {
  if (psi.size() != model.dim) throw DimensionMismatch("state dimension does not match model");
  LocalStep out;
  drift(evaluate(model, t).k_eff, psi, dt, out);
  return out.psi_det;
}

// ---- rate operator ---------------------------------------------------------

RateOperator rate_operator(const GeneratorAt& gen, const CVector& psi, const RoStrategy& strategy) {
  CMatrix r = CMatrix::Zero(psi.size(), psi.size());
  for (std::size_t j = 0; j < gen.ops.size(); ++j) {
    const CVector v = (*gen.ops[j]) * psi;
    r.noalias() += gen.rates[j] * (v * v.adjoint());
  }
  const CVector cpsi = strategy.evaluate(psi, gen.t) * psi;
  r += 0.5 * (cpsi * psi.adjoint() + psi * cpsi.adjoint());
  r = 0.5 * (r + r.adjoint());
  RateOperator out;
  out.eigen = hermitian_eig(r);
  out.matrix = std::move(r);
  return out;
}

RateOperator rate_operator(const TnpModel& model, const CVector& psi, double t, const RoStrategy& strategy) {
  if (psi.size() != model.dim) throw DimensionMismatch("state dimension does not match model");
  return rate_operator(evaluate(model, t), psi, strategy);
}

StepProbabilities ro_step_probabilities(const TnpModel& model, const CVector& psi, double t, double dt,
                                        const RoStrategy& strategy, bool reverse_jumps) {
  SchemeSpec scheme;
  scheme.method = Method::ro;
  scheme.strategy = strategy;
  scheme.reverse_jumps = reverse_jumps;
  return step_probabilities(model, psi, t, dt, scheme);
}

// ---- reverse jumps ---------------------------------------------------------

double reverse_jump_probability(double gamma_j, const CVector& source_state, const CMatrix& op,
                                std::int64_t n_target, std::int64_t n_source, double dt) {
  if (gamma_j >= 0.0 || n_target <= 0 || n_source <= 0) return 0.0;
  const double norm_sq = (op * source_state).squaredNorm();
  return -gamma_j * norm_sq * static_cast<double>(n_source) / static_cast<double>(n_target) * dt;
}

double ro_reverse_jump_probability(double lambda, std::int64_t n_target, std::int64_t n_source, double dt) {
  if (lambda >= 0.0 || n_target <= 0 || n_source <= 0) return 0.0;
  return -lambda * static_cast<double>(n_source) / static_cast<double>(n_target) * dt;
}

// ---- outcomes --------------------------------------------------------------

std::vector<OutcomeClass> outcome_partition(const LocalStep& step, const std::vector<double>& reverse_probs) {
  std::vector<OutcomeClass> classes;
  classes.reserve(step.branches.size() + reverse_probs.size() + 2);
  double used = 0.0;
  for (std::size_t j = 0; j < step.branches.size(); ++j) {
    if (step.branches[j].prob > 0.0) {
      classes.push_back({OutcomeKind::jump, j, step.branches[j].prob});
      used += step.branches[j].prob;
    }
  }
  for (std::size_t r = 0; r < reverse_probs.size(); ++r) {
    if (reverse_probs[r] > 0.0) {
      classes.push_back({OutcomeKind::reverse_jump, r, reverse_probs[r]});
      used += reverse_probs[r];
    }
  }
  const double pd = std::max(0.0, -step.delta * step.dt);
  const double pc = std::max(0.0, step.delta * step.dt);
  if (pd > 0.0) classes.push_back({OutcomeKind::vanish, 0, pd});
  if (pc > 0.0) classes.push_back({OutcomeKind::replicate, 0, pc});
  used += pd + pc;
  const double det = 1.0 - used;
  if (det < -1e-12) {
    throw StepTooLarge("event probabilities add up to " + std::to_string(used) + " > 1; reduce dt");
  }
  classes.push_back({OutcomeKind::deterministic, 0, std::max(0.0, det)});
  return classes;
}

StepOutcome realize(const LocalStep& step, const OutcomeClass& oc,
                    const std::vector<const CVector*>& reverse_destinations) {
  StepOutcome out;
  out.kind = oc.kind;
  out.index = oc.index;
  switch (oc.kind) {
    case OutcomeKind::deterministic:
      out.states = {step.psi_det};
      break;
    case OutcomeKind::jump:
      out.states = {step.branches[oc.index].target};
      break;
    case OutcomeKind::vanish:
      break;
    case OutcomeKind::replicate:
      out.states = {step.psi_det, step.psi_det};
      break;
    case OutcomeKind::reverse_jump:
      out.states = {*reverse_destinations.at(oc.index)};
      break;
    case OutcomeKind::source_creation:
      break;
  }
  return out;
}

StepOutcome advance_trajectory(const LocalStep& step, const std::vector<double>& reverse_probs,
                               const std::vector<const CVector*>& reverse_destinations, double u) {
  const std::vector<OutcomeClass> classes = outcome_partition(step, reverse_probs);
  double acc = 0.0;
  for (const auto& oc : classes) {
    acc += oc.prob;
    if (u < acc) return realize(step, oc, reverse_destinations);
  }
  return realize(step, classes.back(), reverse_destinations);
}

CMatrix one_step_expectation(const LocalStep& step, const std::vector<double>& reverse_probs,
                             const std::vector<const CVector*>& reverse_destinations) {
  const auto d = step.psi_det.size();
  CMatrix out = CMatrix::Zero(d, d);
  for (const auto& oc : outcome_partition(step, reverse_probs)) {
    for (const auto& phi : realize(step, oc, reverse_destinations).states) {
      out.noalias() += oc.prob * (phi * phi.adjoint());
    }
  }
  return out;
}

} // namespace tnp
