#pragma once

// JSON run configuration. Matrices are nested arrays of [re, im] pairs (plain
// numbers are read as real) or builtin names such as "sigma_minus" or
// "annihilation(15)". Time-dependent scalars are numbers or tagged objects,
// e.g. {"type": "exponential", "scale": 0.5, "rate": 1}. Unknown keys are
// rejected everywhere.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tnp/divisibility.hpp"
#include "tnp/experiments.hpp"

namespace tnp {

enum class Command { simulate, exact, moments, heisenberg, divisibility };

struct NamedObservable {
  std::string name;
  CMatrix op;
};

struct RunConfig {
  Command command = Command::simulate;
  std::uint64_t seed = 1;
  double t0 = 0.0;
  double dt = 1e-3;
  double t_final = 1.0;
  std::int64_t n_trajectories = 10000;
  std::size_t n_batches = 50;
  std::size_t record_every = 1;
  Method method = Method::mcwf;
  bool reverse_jumps = false;
  std::optional<bool> merge;
  double step_guard = 0.1;

  // simulate / exact / divisibility
  std::optional<TnpModel> model;
  std::vector<std::pair<double, CVector>> initial;  // weights and states
  std::vector<NamedObservable> observables;
  Picture picture = Picture::as_given;

  PhotonCountingConfig photon;
  HeisenbergConfig heisenberg;

  nlohmann::json source;  // the document as read, for hashing and provenance

  TimeGrid grid() const { return {t0, t_final, dt}; }
  CMatrix initial_density() const;
};

const char* command_name(Command c);

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

CMatrix parse_matrix(const nlohmann::json& j);
CVector parse_vector(const nlohmann::json& j);
TimeScalar parse_time_scalar(const nlohmann::json& j);

/// 16 hex digits of a 64-bit hash over the canonical (sorted-key) dump.
std::string config_hash(const nlohmann::json& doc);

} // namespace tnp
