#include "tnp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tnp/errors.hpp"
#include "tnp/rng.hpp"

namespace tnp {

using nlohmann::json;

namespace {

// Object view that remembers which keys were read and rejects the rest.
class Fields {
public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return read<T>(key);
  }

  template <class T>
  T read(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  const std::string& where() const { return where_; }

private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

cplx parse_scalar(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError("complex entries must be numbers or [re, im] pairs");
}

Method parse_method(const std::string& s) {
  if (s == "mcwf") return Method::mcwf;
  if (s == "ro") return Method::ro;
  throw ConfigError("method must be 'mcwf' or 'ro', got '" + s + "'");
}

std::vector<OperatorTerm> parse_terms(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of terms");
  std::vector<OperatorTerm> terms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Fields f(j[i], where + "[" + std::to_string(i) + "]");
    OperatorTerm term;
    term.coeff = f.has("coeff") ? parse_time_scalar(f.at("coeff")) : TimeScalar::constant(1.0);
    term.op = parse_matrix(f.at("op"));
    f.finish();
    terms.push_back(std::move(term));
  }
  return terms;
}

TnpModel parse_model(const json& j) {
  Fields f(j, "model");
  if (f.has("builtin")) {
    const std::string name = f.read<std::string>("builtin");
    if (name == "heisenberg_qubit") {
      TnpModel m = heisenberg_qubit(f.has("eps") ? parse_time_scalar(f.at("eps")) : TimeScalar(20.0),
                                    f.has("gamma_minus") ? parse_time_scalar(f.at("gamma_minus")) : TimeScalar(1.0),
                                    f.has("gamma_plus") ? parse_time_scalar(f.at("gamma_plus"))
                                                        : TimeScalar::exponential(0.5, 1.0));
      f.finish();
      return m;
    }
    if (name == "tilted_lindbladian") {
      CountingParams p;
      p.gamma = f.get("gamma", p.gamma);
      p.nbar = f.get("nbar", p.nbar);
      p.omega = f.get("omega", p.omega);
      p.phi = f.get("phi", p.phi);
      p.n_max = f.get("n_max", p.n_max);
      const double zeta = f.get("zeta", 0.0);
      f.finish();
      return tilted_lindbladian(p, zeta);
    }
    throw ConfigError("model.builtin: unknown model '" + name + "'");
  }

  TnpModel m;
  m.dim = f.read<Eigen::Index>("dim");
  if (m.dim <= 0) throw ConfigError("model.dim must be positive");
  if (f.has("hamiltonian")) m.hamiltonian.terms = parse_terms(f.at("hamiltonian"), "model.hamiltonian");
  if (f.has("channels")) {
    const json& ch = f.at("channels");
    if (!ch.is_array()) throw ConfigError("model.channels: expected a list");
    for (std::size_t i = 0; i < ch.size(); ++i) {
      Fields c(ch[i], "model.channels[" + std::to_string(i) + "]");
      JumpChannel channel;
      channel.rate = parse_time_scalar(c.at("rate"));
      channel.op = parse_matrix(c.at("op"));
      channel.label = c.get<std::string>("label", "L" + std::to_string(i));
      c.finish();
      m.channels.push_back(std::move(channel));
    }
  }
  if (f.has("gamma")) {
    Fields g(f.at("gamma"), "model.gamma");
    m.gamma.include_lindblad = g.get("include_lindblad", true);
    if (g.has("extra")) m.gamma.extra.terms = parse_terms(g.at("extra"), "model.gamma.extra");
    g.finish();
  }
  if (f.has("source")) {
    auto terms = parse_terms(f.at("source"), "model.source");
    const Eigen::Index dim = m.dim;
    m.source = SourceTerm{[terms, dim](double t) {
      CMatrix s = CMatrix::Zero(dim, dim);
      for (const auto& term : terms) s += term.coeff(t) * term.op;
      return s;
    }};
  }
  f.finish();
  m.validate();
  return m;
}

std::vector<NamedObservable> parse_observables(const json& j) {
  if (!j.is_array()) throw ConfigError("observables: expected a list");
  std::vector<NamedObservable> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Fields f(j[i], "observables[" + std::to_string(i) + "]");
    NamedObservable o{f.read<std::string>("name"), parse_matrix(f.at("op"))};
    f.finish();
    out.push_back(std::move(o));
  }
  return out;
}

void parse_photon(const json& j, PhotonCountingConfig& p) {
  Fields f(j, "photon_counting");
  p.params.gamma = f.get("gamma", p.params.gamma);
  p.params.nbar = f.get("nbar", p.params.nbar);
  p.params.omega = f.get("omega", p.params.omega);
  p.params.phi = f.get("phi", p.params.phi);
  p.params.n_max = f.get("n_max", p.params.n_max);
  p.zeta_list = f.get("zeta_list", p.zeta_list);
  p.k_max = f.get("k_max", p.k_max);
  p.n_records = f.get("n_records", p.n_records);
  p.leakage_tol = f.get("leakage_tol", p.leakage_tol);
  if (f.has("psi0")) p.psi0 = parse_vector(f.at("psi0"));
  f.finish();
}

void parse_heisenberg(const json& j, HeisenbergConfig& h) {
  Fields f(j, "heisenberg");
  if (f.has("eps")) h.eps = parse_time_scalar(f.at("eps"));
  if (f.has("gamma_minus")) h.gamma_minus = parse_time_scalar(f.at("gamma_minus"));
  if (f.has("gamma_plus")) h.gamma_plus = parse_time_scalar(f.at("gamma_plus"));
  if (f.has("observables")) {
    h.observable_names.clear();
    h.observables.clear();
    for (auto& o : parse_observables(f.at("observables"))) {
      h.observable_names.push_back(o.name);
      h.observables.push_back(std::move(o.op));
    }
  }
  if (f.has("psi_s")) h.psi_s = parse_vector(f.at("psi_s"));
  h.n_records = f.get("n_records", h.n_records);
  if (f.has("trace_observable")) h.trace_observable = f.read<std::size_t>("trace_observable");
  f.finish();
}

} // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::exact: return "exact";
    case Command::moments: return "moments";
    case Command::heisenberg: return "heisenberg";
    case Command::divisibility: return "divisibility";
  }
  return "?";
}

CMatrix parse_matrix(const json& j) {
  if (j.is_string()) {
    try {
      return builtin_operator(j.get<std::string>());
    } catch (const InvalidParameter& e) {
      throw ConfigError(e.what());
    }
  }
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a builtin name or a non-empty nested list");
  const auto rows = static_cast<Eigen::Index>(j.size());
  CMatrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows) {
      throw ConfigError("matrix must be square");
    }
    for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = parse_scalar(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

CVector parse_vector(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("vector must be a non-empty list");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_scalar(j[i]);
  return v;
}

TimeScalar parse_time_scalar(const json& j) {
  if (j.is_number()) return TimeScalar::constant(j.get<double>());
  Fields f(j, "time scalar");
  const std::string type = f.read<std::string>("type");
  TimeScalar out;
  if (type == "constant") {
    out = TimeScalar::constant(f.read<double>("value"));
  } else if (type == "exponential") {
    out = TimeScalar::exponential(f.read<double>("scale"), f.read<double>("rate"));
  } else if (type == "sinusoid") {
    out = TimeScalar::sinusoid(f.read<double>("amplitude"), f.read<double>("frequency"), f.get("phase", 0.0),
                               f.get("offset", 0.0));
  } else if (type == "table") {
    try {
      out = TimeScalar::table(f.read<std::vector<double>>("times"), f.read<std::vector<double>>("values"));
    } catch (const InvalidParameter& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("time scalar: unknown type '" + type + "'");
  }
  f.finish();
  return out;
}

CMatrix RunConfig::initial_density() const {
  if (initial.empty()) throw ConfigError("no initial state given");
  const Eigen::Index d = initial.front().second.size();
  CMatrix rho = CMatrix::Zero(d, d);
  double total = 0.0;
  for (const auto& [w, psi] : initial) {
    rho += w * projector(psi.normalized());
    total += w;
  }
  return rho / total;
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  cfg.source = doc;
  Fields f(doc, "config");
  const std::string command = f.read<std::string>("command");
  if (command == "simulate") cfg.command = Command::simulate;
  else if (command == "exact") cfg.command = Command::exact;
  else if (command == "moments") cfg.command = Command::moments;
  else if (command == "heisenberg") cfg.command = Command::heisenberg;
  else if (command == "divisibility") cfg.command = Command::divisibility;
  else throw ConfigError("unknown command '" + command + "'");

  // Experiment defaults, overridable below.
  if (cfg.command == Command::moments) {
    cfg.dt = cfg.photon.dt;
    cfg.t_final = cfg.photon.t_final;
    cfg.n_trajectories = cfg.photon.n_trajectories;
  } else if (cfg.command == Command::heisenberg) {
    cfg.dt = cfg.heisenberg.dt;
    cfg.t_final = cfg.heisenberg.t_final;
    cfg.n_trajectories = cfg.heisenberg.n_trajectories;
  }

  cfg.seed = f.get("seed", cfg.seed);
  cfg.t0 = f.get("t0", cfg.t0);
  cfg.dt = f.get("dt", cfg.dt);
  cfg.t_final = f.get("t_final", cfg.t_final);
  cfg.n_trajectories = f.get("n_trajectories", cfg.n_trajectories);
  cfg.n_batches = f.get("n_batches", cfg.n_batches);
  cfg.record_every = f.get("record_every", cfg.record_every);
  cfg.method = parse_method(f.get<std::string>("method", "mcwf"));
  cfg.reverse_jumps = f.get("reverse_jumps", cfg.reverse_jumps);
  if (f.has("merge")) cfg.merge = f.read<bool>("merge");
  cfg.step_guard = f.get("step_guard", cfg.step_guard);
  if (f.has("strategy") && f.read<std::string>("strategy") != "zero") {
    throw ConfigError("strategy: only 'zero' is available from a config file");
  }

  if (f.has("model")) cfg.model = parse_model(f.at("model"));
  const bool has_state = f.has("initial_state");
  const bool has_density = f.has("initial_density");
  if (has_state && has_density) throw ConfigError("give either initial_state or initial_density, not both");
  if (has_state) cfg.initial = {{1.0, parse_vector(f.at("initial_state"))}};
  if (has_density) {
    const CMatrix rho = parse_matrix(f.at("initial_density"));
    require_hermitian(rho, "initial_density");
    const HermitianEigen eig = hermitian_eig(rho);
    if (eig.values.minCoeff() < -1e-10) throw InvalidParameter("initial_density is not positive semidefinite");
    for (Eigen::Index i = eig.values.size() - 1; i >= 0; --i) {
      if (eig.values[i] > 1e-12) cfg.initial.emplace_back(eig.values[i], eig.vectors[static_cast<std::size_t>(i)]);
    }
  }
  if (f.has("observables")) cfg.observables = parse_observables(f.at("observables"));
  if (f.has("picture")) {
    const std::string p = f.read<std::string>("picture");
    if (p == "as_given") cfg.picture = Picture::as_given;
    else if (p == "adjoint") cfg.picture = Picture::adjoint;
    else throw ConfigError("picture must be 'as_given' or 'adjoint'");
  }
  if (f.has("photon_counting")) parse_photon(f.at("photon_counting"), cfg.photon);
  if (f.has("heisenberg")) parse_heisenberg(f.at("heisenberg"), cfg.heisenberg);
  f.finish();

  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(cfg.t_final > cfg.t0)) throw ConfigError("t_final must exceed t0");
  if (cfg.n_trajectories <= 0) throw ConfigError("n_trajectories must be positive");
  if (cfg.n_batches == 0 || static_cast<std::int64_t>(cfg.n_batches) > cfg.n_trajectories) {
    throw ConfigError("n_batches must be between 1 and n_trajectories");
  }
  if (cfg.record_every == 0) throw ConfigError("record_every must be positive");

  const bool needs_model = cfg.command == Command::simulate || cfg.command == Command::exact ||
                           cfg.command == Command::divisibility;
  if (needs_model && !cfg.model) throw ConfigError(std::string(command_name(cfg.command)) + " needs a model");
  if (cfg.command == Command::simulate || cfg.command == Command::exact) {
    if (cfg.initial.empty()) throw ConfigError("initial_state or initial_density is required");
    for (const auto& [w, psi] : cfg.initial) {
      if (psi.size() != cfg.model->dim) throw DimensionMismatch("initial state does not match model.dim");
    }
    for (const auto& o : cfg.observables) {
      if (o.op.rows() != cfg.model->dim) throw DimensionMismatch("observable '" + o.name + "' has the wrong size");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  h = mix64(h);
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

} // namespace tnp
