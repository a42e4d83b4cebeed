#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tnp/cli.hpp"
#include "tnp/config.hpp"
#include "tnp/errors.hpp"

using namespace tnp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json decay_config() {
  return json::parse(R"({
    "command": "simulate",
    "seed": 7,
    "dt": 0.01,
    "t_final": 0.5,
    "n_trajectories": 2000,
    "n_batches": 20,
    "record_every": 10,
    "model": {
      "dim": 2,
      "hamiltonian": [{"coeff": 0.5, "op": "sigma_x"}],
      "channels": [{"rate": 1.0, "op": "sigma_minus", "label": "decay"}]
    },
    "initial_state": [[0, 0], [1, 0]],
    "observables": [{"name": "z", "op": "sigma_z"}]
  })");
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tnp_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tnpsim");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Data rows of a results.csv (header comment and column line skipped).
std::vector<std::vector<double>> csv_rows(const fs::path& p, std::vector<std::string>* columns = nullptr) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  if (columns) {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) columns->push_back(c);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

} // namespace

TEST_CASE("matrix, vector and scalar parsing") {
  CHECK((parse_matrix(json::parse(R"([[[0,0],[1,0]],[[0,0],[0,0]]])")) - oracle::lowering()).norm() == 0.0);
  CHECK((parse_matrix(json::parse(R"([[1, 2], [3, 4]])")) - (CMatrix(2, 2) << 1, 2, 3, 4).finished()).norm() == 0.0);
  CHECK((parse_matrix("sigma_y") - oracle::sigma_y()).norm() == 0.0);
  CHECK_THROWS_AS(parse_matrix(json::parse(R"([[1, 2], [3]])")), ConfigError);
  CHECK_THROWS_AS(parse_matrix(json::parse(R"([[[1, 2, 3]]])")), ConfigError);
  CHECK_THROWS_AS(parse_matrix("bogus"), ValidationError);

  const CVector v = parse_vector(json::parse(R"([[0.6, 0], [0, 0.8]])"));
  CHECK(v[1] == cplx(0, 0.8));

  CHECK(parse_time_scalar(2.5)(9.0) == 2.5);
  CHECK(parse_time_scalar(json::parse(R"({"type":"exponential","scale":0.5,"rate":1})"))(1.0) ==
        doctest::Approx(0.5 * std::exp(-1.0)));
  CHECK(parse_time_scalar(json::parse(R"({"type":"sinusoid","amplitude":1,"frequency":2,"phase":1.5707963267948966})"))(0.0) ==
        doctest::Approx(1.0));
  CHECK(parse_time_scalar(json::parse(R"({"type":"table","times":[0,1],"values":[0,2]})"))(0.25) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(parse_time_scalar(json::parse(R"({"type":"exponential","scale":1})")), ConfigError);
  CHECK_THROWS_AS(parse_time_scalar(json::parse(R"({"type":"cubic"})")), ConfigError);
  CHECK_THROWS_AS(parse_time_scalar(json::parse(R"({"type":"constant","value":1,"typo":2})")), ConfigError);
}

TEST_CASE("run configuration") {
  const RunConfig cfg = parse_config(decay_config());
  CHECK(cfg.command == Command::simulate);
  CHECK(cfg.seed == 7);
  CHECK(cfg.grid().steps() == 50);
  REQUIRE(cfg.model);
  CHECK(cfg.model->channels[0].label == "decay");
  CHECK(cfg.model->gamma.is_lindblad());
  CHECK((cfg.initial_density() - oracle::ket_proj(1)).norm() < 1e-15);
  CHECK(cfg.observables.at(0).name == "z");

  SUBCASE("mixed initial density is decomposed") {
    json doc = decay_config();
    doc.erase("initial_state");
    doc["initial_density"] = json::parse(R"([[0.75, 0], [0, 0.25]])");
    const RunConfig mixed = parse_config(doc);
    CHECK((mixed.initial_density() - CMatrix(Eigen::Vector2cd(0.75, 0.25).asDiagonal())).norm() < 1e-14);
    doc["initial_state"] = json::parse(R"([1, 0])");
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
  }

  SUBCASE("experiment defaults") {
    const RunConfig m = parse_config(json::parse(R"({"command": "moments"})"));
    CHECK(m.dt == 1e-2);
    CHECK(m.t_final == 3.0);
    CHECK(m.n_trajectories == 10000);
    const RunConfig h = parse_config(json::parse(R"({"command": "heisenberg", "heisenberg": {"trace_observable": 0}})"));
    CHECK(h.dt == 1e-3);
    CHECK(h.n_trajectories == 20000);
    CHECK(h.heisenberg.trace_observable == std::optional<std::size_t>(0));
  }

  SUBCASE("builtin models") {
    json doc = decay_config();
    doc["model"] = json::parse(R"({"builtin": "tilted_lindbladian", "n_max": 5, "zeta": 0.1})");
    doc["initial_state"] = json::parse(R"([1, 0, 0, 0, 0])");
    doc.erase("observables");
    const RunConfig tilted = parse_config(doc);
    CHECK(tilted.model->dim == 5);
    CHECK_FALSE(tilted.model->gamma.is_lindblad());
    doc["model"] = json::parse(R"({"builtin": "heisenberg_qubit", "eps": 3})");
    CHECK_THROWS_AS(parse_config(doc), DimensionMismatch);
  }

  SUBCASE("rejections") {
    auto rejects = [](json doc) { CHECK_THROWS_AS(parse_config(doc), ValidationError); };
    json doc = decay_config();
    doc["unexpected"] = 1;
    rejects(doc);
    doc = decay_config();
    doc["model"]["channels"][0]["sign"] = -1;
    rejects(doc);
    doc = decay_config();
    doc["model"]["gamma"] = json::parse(R"({"include_lindblad": true, "extras": []})");
    rejects(doc);
    doc = decay_config();
    doc["command"] = "plot";
    rejects(doc);
    doc = decay_config();
    doc["method"] = "qsd";
    rejects(doc);
    doc = decay_config();
    doc["strategy"] = "three_state";
    rejects(doc);
    doc = decay_config();
    doc["n_batches"] = 5000;
    rejects(doc);
    doc = decay_config();
    doc["dt"] = -1;
    rejects(doc);
    doc = decay_config();
    doc.erase("model");
    rejects(doc);
    doc = decay_config();
    doc["model"]["hamiltonian"][0]["op"] = "sigma_minus";
    rejects(doc);
    doc = decay_config();
    doc["initial_state"] = json::parse("[1, 0, 0]");
    rejects(doc);
    doc = decay_config();
    doc["photon_counting"] = json::parse(R"({"n_max": 10, "cutoff": 3})");
    rejects(doc);
    doc = decay_config();
    doc["seed"] = "seven";
    rejects(doc);
  }
}

TEST_CASE("config hash") {
  const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const json b = json::parse(R"({"a": [1, 2], "b": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json::parse(R"({"a": [1, 2], "b": 2})")));
}

TEST_CASE("command line: simulate") {
  const fs::path dir = scratch_dir("simulate");
  const fs::path config = write_json(dir, decay_config());
  REQUIRE(run_cli({"--config", config.string(), "--out", (dir / "a").string(), "--threads", "1"}) == 0);
  REQUIRE(run_cli({"--config", config.string(), "--out", (dir / "b").string(), "--threads", "4"}) == 0);
  for (const char* f : {"results.csv", "results.json", "meta.json"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }

  const std::string csv = slurp(dir / "a" / "results.csv");
  CHECK(csv.rfind("# config_hash=", 0) == 0);
  CHECK(csv.find("seed=7") != std::string::npos);
  std::vector<std::string> columns;
  const auto rows = csv_rows(dir / "a" / "results.csv", &columns);
  CHECK(columns == std::vector<std::string>{"t", "trace_est", "trace_se", "distinct_states", "total_count", "z_est",
                                            "z_se"});
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) CHECK(r[1] == 1.0);  // trace preserving
  CHECK(rows.front()[5] == -1.0);

  const json meta = json::parse(slurp(dir / "a" / "meta.json"));
  CHECK(meta["command"] == "simulate");
  CHECK(meta["seed"] == 7);
  CHECK(meta["version"] == kVersion);
  CHECK(meta["config"] == decay_config());

  // A command-line seed changes the run and its identity.
  REQUIRE(run_cli({"--config", config.string(), "--out", (dir / "c").string(), "--seed", "8"}) == 0);
  CHECK(slurp(dir / "c" / "results.csv") != slurp(dir / "a" / "results.csv"));
  CHECK(json::parse(slurp(dir / "c" / "meta.json"))["config_hash"] != meta["config_hash"]);
  fs::remove_all(dir);
}

TEST_CASE("command line: exact and divisibility") {
  const fs::path dir = scratch_dir("exact");
  json doc = decay_config();
  doc["command"] = "exact";
  doc["model"]["gamma"] = json::parse(R"({"extra": [{"coeff": 0.5, "op": "identity2"}]})");
  REQUIRE(run_cli({"--config", write_json(dir, doc).string(), "--out", (dir / "exact").string()}) == 0);
  const auto rows = csv_rows(dir / "exact" / "results.csv");
  CHECK(rows.back()[1] == doctest::Approx(std::exp(-0.25)).epsilon(1e-10));

  const json div = json::parse(R"({
    "command": "divisibility", "dt": 0.001, "t_final": 0.2, "picture": "adjoint",
    "model": {"builtin": "heisenberg_qubit"}
  })");
  REQUIRE(run_cli({"--config", write_json(dir, div).string(), "--out", (dir / "div").string()}) == 0);
  std::vector<std::string> columns;
  const auto d = csv_rows(dir / "div" / "results.csv", &columns);
  CHECK(columns == std::vector<std::string>{"t", "min_choi_eig", "second_min", "third_min", "max_bloch_norm"});
  REQUIRE(d.size() == 200);
  bool negative = false;
  for (std::size_t i = 0; i < 50; ++i) negative = negative || d[i][1] < 0.0;
  CHECK(negative);
  CHECK(json::parse(slurp(dir / "div" / "meta.json")).contains("choi_normalization"));
  fs::remove_all(dir);
}

TEST_CASE("command line: exit codes") {
  const fs::path dir = scratch_dir("codes");
  CHECK(run_cli({"--config", (dir / "missing.json").string(), "--out", dir.string()}) == 2);
  CHECK(run_cli({"--out", dir.string()}) == 2);
  CHECK(run_cli({"--config", "x", "--threads", "-3"}) == 2);

  json unknown = decay_config();
  unknown["bogus"] = true;
  CHECK(run_cli({"--config", write_json(dir, unknown).string(), "--out", dir.string()}) == 2);

  {
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  CHECK(run_cli({"--config", (dir / "broken.json").string(), "--out", dir.string()}) == 2);

  json large = decay_config();
  large["dt"] = 0.2;
  CHECK(run_cli({"--config", write_json(dir, large).string(), "--out", dir.string()}) == 3);

  json negative = decay_config();
  negative["model"]["channels"][0]["rate"] = -1.0;
  CHECK(run_cli({"--config", write_json(dir, negative).string(), "--out", dir.string()}) == 3);

  json leak = json::parse(R"({"command": "moments", "n_trajectories": 100, "n_batches": 2,
                              "photon_counting": {"n_max": 5, "k_max": 1}})");
  CHECK(run_cli({"--config", write_json(dir, leak).string(), "--out", dir.string()}) == 3);
  fs::remove_all(dir);
}
