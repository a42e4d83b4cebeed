#pragma once

// Trace-nonpreserving generators
//
//   L[rho] = -i[H, rho] + sum_j gamma_j L_j rho L_j^dagger - {Gamma, rho}/2 + S(t)
//
// with time-dependent coefficients, and the quantities derived from them.

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tnp/linops.hpp"

namespace tnp {

/// Real function of time used for rates and operator coefficients.
class TimeScalar {
public:
  struct Constant { double value = 0.0; };
  /// scale * exp(-rate * t)
  struct Exponential { double scale = 0.0; double rate = 0.0; };
  /// amplitude * sin(frequency * t + phase) + offset
  struct Sinusoid { double amplitude = 0.0; double frequency = 0.0; double phase = 0.0; double offset = 0.0; };
  /// Piecewise linear through (times, values); held constant outside the table.
  struct Table { std::vector<double> times; std::vector<double> values; };
  /// Library-level escape hatch; not reachable from run configurations.
  struct Custom { std::function<double(double)> fn; };

  using Form = std::variant<Constant, Exponential, Sinusoid, Table, Custom>;

  TimeScalar() : form_(Constant{0.0}) {}
  TimeScalar(double c) : form_(Constant{c}) {}  // NOLINT: implicit on purpose
  explicit TimeScalar(Form form);

  static TimeScalar constant(double c) { return TimeScalar(Constant{c}); }
  static TimeScalar exponential(double scale, double rate) { return TimeScalar(Exponential{scale, rate}); }
  static TimeScalar sinusoid(double amplitude, double frequency, double phase, double offset) {
    return TimeScalar(Sinusoid{amplitude, frequency, phase, offset});
  }
  static TimeScalar table(std::vector<double> times, std::vector<double> values);
  static TimeScalar custom(std::function<double(double)> fn) { return TimeScalar(Custom{std::move(fn)}); }

  double operator()(double t) const;
  const Form& form() const { return form_; }
  bool is_constant() const { return std::holds_alternative<Constant>(form_); }

private:
  Form form_;
};

/// coeff(t) * op
struct OperatorTerm {
  TimeScalar coeff;
  CMatrix op;
};

/// Operator-valued function of time: sum of OperatorTerms plus an optional callback.
struct TimeOperator {
  std::vector<OperatorTerm> terms;
  std::function<CMatrix(double)> callback;

  bool empty() const { return terms.empty() && !callback; }
  CMatrix at(double t, Eigen::Index dim) const;
};

struct JumpChannel {
  TimeScalar rate;
  CMatrix op;
  std::string label;
};

/// Gamma = (include_lindblad ? Gamma_L : 0) + extra(t).
/// The default (include_lindblad, no extra) is the trace-preserving sentinel.
struct GammaSpec {
  bool include_lindblad = true;
  TimeOperator extra;

  static GammaSpec lindblad() { return {}; }
  static GammaSpec lindblad_plus(TimeOperator extra) { return {true, std::move(extra)}; }
  static GammaSpec explicit_operator(TimeOperator gamma) { return {false, std::move(gamma)}; }
  bool is_lindblad() const { return include_lindblad && extra.empty(); }
};

/// Inhomogeneous, positive semidefinite source added to the generator.
struct SourceTerm {
  std::function<CMatrix(double)> value;
};

struct TnpModel {
  Eigen::Index dim = 0;
  TimeOperator hamiltonian;
  std::vector<JumpChannel> channels;
  GammaSpec gamma;
  std::optional<SourceTerm> source;

  /// Checks operator shapes and Hermiticity at t = 0. Throws ValidationError subclasses.
  void validate() const;
};

/// All time-dependent pieces of a model evaluated once at time t.
struct GeneratorAt {
  double t = 0.0;
  CMatrix hamiltonian;
  CMatrix gamma_l;
  CMatrix gamma;
  CMatrix delta;          // Gamma_L - Gamma, exact zero for the Lindblad sentinel
  CMatrix k_eff;          // H - (i/2) Gamma
  std::vector<double> rates;
  std::vector<const CMatrix*> ops;  // owned by the model
  std::optional<CMatrix> source;
};

GeneratorAt evaluate(const TnpModel& model, double t);

/// Gamma_L = sum_j gamma_j L_j^dagger L_j.
CMatrix gamma_L(const TnpModel& model, double t);
CMatrix gamma_operator(const TnpModel& model, double t);
/// K = H - (i/2) Gamma.
CMatrix effective_hamiltonian(const TnpModel& model, double t);

/// Full generator including the source. Accepts non-Hermitian input as well
/// (needed when propagating basis matrices).
CMatrix apply_liouvillian(const TnpModel& model, double t, const CMatrix& rho);
CMatrix apply_generator(const GeneratorAt& gen, const CMatrix& rho, bool with_source = true);

/// tr[(Gamma_L - Gamma) rho], the source-free trace derivative.
double trace_derivative(const TnpModel& model, double t, const CMatrix& rho);

/// d^2 x d^2 matrix of the homogeneous generator on column-stacked operators.
CMatrix liouvillian_matrix(const GeneratorAt& gen);

// ---- builders ------------------------------------------------------------

struct PauliOps {
  CMatrix id, sx, sy, sz;
  CMatrix sigma_minus;  // |0><1|, so sigma_plus * sigma_minus = |1><1|
  CMatrix sigma_plus;   // |1><0|
};
PauliOps pauli_ops();

/// Truncated ladder operators on levels 0 .. n_max-1.
struct BosonOps {
  CMatrix id, a, adag, number;
};
BosonOps boson_ops(int n_max);

struct CountingParams {
  double gamma = 1.0;
  double nbar = 0.5;
  double omega = 1.0;
  double phi = 0.2;
  int n_max = 20;  // smallest cutoff passing the leakage check for the default drive
};

/// L + zeta J for a driven thermal oscillator with photon counting on the
/// emission channel (channel 0). Gamma stays at the untilted Gamma_L.
TnpModel tilted_lindbladian(const CountingParams& p, double zeta);

/// Channel index of J inside tilted_lindbladian models.
inline constexpr std::size_t kEmissionChannel = 0;

/// Heisenberg-picture qubit generator
///   dX/dt = i eps [sigma_x, X] + g_- (s+ X s- - {s+ s-, X}/2) + g_+ (s- X s+ - {s- s+, X}/2)
/// mapped onto a TnpModel acting on X.
TnpModel heisenberg_qubit(TimeScalar eps, TimeScalar gamma_minus, TimeScalar gamma_plus);

/// Resolves names like "sigma_minus" or "annihilation(15)".
CMatrix builtin_operator(const std::string& name);

} // namespace tnp
