#include "tnp/model.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "tnp/errors.hpp"

namespace tnp {

// ---- TimeScalar ------------------------------------------------------------

TimeScalar::TimeScalar(Form form) : form_(std::move(form)) {
  if (const auto* tab = std::get_if<Table>(&form_)) {
    if (tab->times.empty() || tab->times.size() != tab->values.size()) {
      throw InvalidParameter("table TimeScalar needs equally long, non-empty times/values");
    }
    for (std::size_t i = 1; i < tab->times.size(); ++i) {
      if (!(tab->times[i] > tab->times[i - 1])) {
        throw InvalidParameter("table TimeScalar times must be strictly increasing");
      }
    }
  }
  if (const auto* cb = std::get_if<Custom>(&form_); cb && !cb->fn) {
    throw InvalidParameter("custom TimeScalar without a function");
  }
}

TimeScalar TimeScalar::table(std::vector<double> times, std::vector<double> values) {
  return TimeScalar(Table{std::move(times), std::move(values)});
}

double TimeScalar::operator()(double t) const {
  struct Visitor {
    double t;
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Exponential& e) const { return e.scale * std::exp(-e.rate * t); }
    double operator()(const Sinusoid& s) const {
      return s.amplitude * std::sin(s.frequency * t + s.phase) + s.offset;
    }
    double operator()(const Table& tab) const {
      if (t <= tab.times.front()) return tab.values.front();
      if (t >= tab.times.back()) return tab.values.back();
      const auto hi = std::upper_bound(tab.times.begin(), tab.times.end(), t);
      const auto i = static_cast<std::size_t>(hi - tab.times.begin());
      const double w = (t - tab.times[i - 1]) / (tab.times[i] - tab.times[i - 1]);
      return (1.0 - w) * tab.values[i - 1] + w * tab.values[i];
    }
    double operator()(const Custom& c) const { return c.fn(t); }
  };
  return std::visit(Visitor{t}, form_);
}

CMatrix TimeOperator::at(double t, Eigen::Index dim) const {
  CMatrix out = CMatrix::Zero(dim, dim);
  for (const auto& term : terms) out += term.coeff(t) * term.op;
  if (callback) out += callback(t);
  return out;
}

// ---- model -----------------------------------------------------------------

namespace {

void check_shape(const CMatrix& m, Eigen::Index dim, const std::string& what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw DimensionMismatch(what + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", model dimension is " +
                            std::to_string(dim));
  }
}

} // namespace

void TnpModel::validate() const {
  if (dim <= 0) throw InvalidParameter("model dimension must be positive");
  for (const auto& term : hamiltonian.terms) check_shape(term.op, dim, "Hamiltonian term");
  for (const auto& term : gamma.extra.terms) check_shape(term.op, dim, "Gamma term");
  for (const auto& ch : channels) check_shape(ch.op, dim, "jump operator '" + ch.label + "'");
  const GeneratorAt gen = evaluate(*this, 0.0);
  (void)gen;
}

GeneratorAt evaluate(const TnpModel& model, double t) {
  const auto d = model.dim;
  GeneratorAt gen;
  gen.t = t;
  gen.hamiltonian = model.hamiltonian.at(t, d);
  check_shape(gen.hamiltonian, d, "H(t)");
  require_hermitian(gen.hamiltonian, "H(t)");

  gen.gamma_l = CMatrix::Zero(d, d);
  gen.rates.reserve(model.channels.size());
  gen.ops.reserve(model.channels.size());
  for (const auto& ch : model.channels) {
    const double rate = ch.rate(t);
    gen.rates.push_back(rate);
    gen.ops.push_back(&ch.op);
    gen.gamma_l.noalias() += rate * (ch.op.adjoint() * ch.op);
  }

  const CMatrix extra = model.gamma.extra.at(t, d);
  check_shape(extra, d, "Gamma(t)");
  require_hermitian(extra, "Gamma(t)");
  if (model.gamma.include_lindblad) {
    gen.gamma = gen.gamma_l + extra;
    gen.delta = -extra;
  } else {
    gen.gamma = extra;
    gen.delta = gen.gamma_l - extra;
  }
  gen.k_eff = gen.hamiltonian - 0.5 * kI * gen.gamma;

  if (model.source) {
    gen.source = model.source->value(t);
    check_shape(*gen.source, d, "source S(t)");
  }
  return gen;
}

CMatrix gamma_L(const TnpModel& model, double t) { return evaluate(model, t).gamma_l; }

CMatrix gamma_operator(const TnpModel& model, double t) { return evaluate(model, t).gamma; }

CMatrix effective_hamiltonian(const TnpModel& model, double t) {
  return evaluate(model, t).k_eff;
}

CMatrix apply_generator(const GeneratorAt& gen, const CMatrix& rho, bool with_source) {
  // -i[H, rho] - {Gamma, rho}/2 == -i (K rho - rho K^dagger)
  CMatrix out = -kI * (gen.k_eff * rho - rho * gen.k_eff.adjoint());
  for (std::size_t j = 0; j < gen.ops.size(); ++j) {
    if (gen.rates[j] == 0.0) continue;
    const CMatrix& op = *gen.ops[j];
    out.noalias() += gen.rates[j] * (op * rho * op.adjoint());
  }
  if (with_source && gen.source) out += *gen.source;
  return out;
}

CMatrix apply_liouvillian(const TnpModel& model, double t, const CMatrix& rho) {
  if (rho.rows() != model.dim || rho.cols() != model.dim) {
    throw DimensionMismatch("apply_liouvillian: operator dimension does not match model");
  }
  return apply_generator(evaluate(model, t), rho);
}

double trace_derivative(const TnpModel& model, double t, const CMatrix& rho) {
  if (rho.rows() != model.dim || rho.cols() != model.dim) {
    throw DimensionMismatch("trace_derivative: operator dimension does not match model");
  }
  return (evaluate(model, t).delta * rho).trace().real();
}

CMatrix liouvillian_matrix(const GeneratorAt& gen) {
  const auto d = gen.hamiltonian.rows();
  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix out = -kI * kron(id, gen.k_eff) + kI * kron(gen.k_eff.conjugate(), id);
  for (std::size_t j = 0; j < gen.ops.size(); ++j) {
    const CMatrix& op = *gen.ops[j];
    out += gen.rates[j] * kron(op.conjugate(), op);
  }
  return out;
}

// ---- builders --------------------------------------------------------------

PauliOps pauli_ops() {
  PauliOps p;
  p.id = CMatrix::Identity(2, 2);
  p.sx = CMatrix::Zero(2, 2);
  p.sx << 0, 1, 1, 0;
  p.sy = CMatrix::Zero(2, 2);
  p.sy << 0, -kI, kI, 0;
  p.sz = CMatrix::Zero(2, 2);
  p.sz << 1, 0, 0, -1;
  p.sigma_minus = CMatrix::Zero(2, 2);
  p.sigma_minus(0, 1) = 1.0;
  p.sigma_plus = p.sigma_minus.adjoint();
  return p;
}

BosonOps boson_ops(int n_max) {
  if (n_max < 2) throw InvalidParameter("boson_ops: n_max must be at least 2");
  BosonOps b;
  b.id = CMatrix::Identity(n_max, n_max);
  b.a = CMatrix::Zero(n_max, n_max);
  for (int n = 1; n < n_max; ++n) b.a(n - 1, n) = std::sqrt(static_cast<double>(n));
  b.adag = b.a.adjoint();
  b.number = b.adag * b.a;
  return b;
}

TnpModel tilted_lindbladian(const CountingParams& p, double zeta) {
  if (p.n_max < 2) throw InvalidParameter("tilted_lindbladian: n_max must be at least 2");
  if (p.nbar < 0) throw InvalidParameter("tilted_lindbladian: nbar must be non-negative");
  if (p.gamma < 0) throw InvalidParameter("tilted_lindbladian: gamma must be non-negative");
  if (!(zeta > -1.0)) throw InvalidParameter("tilted_lindbladian: zeta must exceed -1");

  const BosonOps b = boson_ops(p.n_max);
  const cplx phase = std::exp(2.0 * kI * p.phi);
  const double emission = p.gamma * (p.nbar + 1.0);

  TnpModel m;
  m.dim = p.n_max;
  m.hamiltonian.terms.push_back({1.0, 0.5 * p.omega * (b.a * phase + b.adag * std::conj(phase))});
  m.channels.push_back({emission * (1.0 + zeta), b.a, "emission"});
  m.channels.push_back({p.gamma * p.nbar, b.adag, "absorption"});
  // Gamma = Gamma_L(zeta) - zeta * emission * a^dagger a == untilted Gamma_L.
  m.gamma.include_lindblad = true;
  if (zeta != 0.0) m.gamma.extra.terms.push_back({-zeta * emission, b.number});
  return m;
}

TnpModel heisenberg_qubit(TimeScalar eps, TimeScalar gamma_minus, TimeScalar gamma_plus) {
  const PauliOps s = pauli_ops();
  TnpModel m;
  m.dim = 2;
  // -i[H, X] with H = -eps sigma_x reproduces +i eps [sigma_x, X].
  TimeScalar neg_eps = std::visit(
      [&](const auto& f) -> TimeScalar {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, TimeScalar::Constant>) {
          return TimeScalar::constant(-f.value);
        } else {
          return TimeScalar::custom([e = eps](double t) { return -e(t); });
        }
      },
      eps.form());
  m.hamiltonian.terms.push_back({neg_eps, s.sx});
  m.channels.push_back({gamma_minus, s.sigma_plus, "gamma_minus"});
  m.channels.push_back({gamma_plus, s.sigma_minus, "gamma_plus"});
  // Adjoint dissipators anticommute with L L^dagger, not L^dagger L.
  m.gamma.include_lindblad = false;
  m.gamma.extra.terms.push_back({gamma_minus, s.sigma_plus * s.sigma_minus});
  m.gamma.extra.terms.push_back({gamma_plus, s.sigma_minus * s.sigma_plus});
  return m;
}

CMatrix builtin_operator(const std::string& name) {
  const PauliOps s = pauli_ops();
  if (name == "sigma_minus") return s.sigma_minus;
  if (name == "sigma_plus") return s.sigma_plus;
  if (name == "sigma_x") return s.sx;
  if (name == "sigma_y") return s.sy;
  if (name == "sigma_z") return s.sz;
  if (name == "identity2") return s.id;
  static const std::regex ladder(R"(^(annihilation|creation|number|identity)\((\d+)\)$)");
  std::smatch match;
  if (std::regex_match(name, match, ladder)) {
    const int n = std::stoi(match[2].str());
    if (match[1] == "identity") {
      if (n < 1) throw InvalidParameter("identity(n) needs n >= 1");
      return CMatrix::Identity(n, n);
    }
    const BosonOps b = boson_ops(n);
    if (match[1] == "annihilation") return b.a;
    if (match[1] == "creation") return b.adag;
    return b.number;
  }
  throw InvalidParameter("unknown builtin operator '" + name + "'");
}

} // namespace tnp
