#include "tnp/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "tnp/errors.hpp"

namespace tnp {

using nlohmann::json;

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Table simulate_table(const RunConfig& cfg) {
  const TnpModel& model = *cfg.model;
  Ensemble e = sample_initial(cfg.initial, cfg.n_trajectories, cfg.seed, cfg.n_batches);
  RunOptions options;
  options.scheme.method = cfg.method;
  options.scheme.reverse_jumps = cfg.reverse_jumps;
  options.scheme.step_guard = cfg.step_guard;
  options.record_every = cfg.record_every;
  options.merge = cfg.merge;

  std::vector<std::vector<Estimate>> observed;
  options.observer = [&](const Ensemble& ens) {
    std::vector<Estimate> row;
    for (const auto& o : cfg.observables) row.push_back(observable_with_error(ens, o.op, ens.step_index));
    observed.push_back(std::move(row));
  };
  const std::vector<RunRecord> records = run(model, e, cfg.grid(), options);

  Table t;
  t.columns = {"t", "trace_est", "trace_se", "distinct_states", "total_count"};
  for (const auto& o : cfg.observables) {
    t.columns.push_back(o.name + "_est");
    t.columns.push_back(o.name + "_se");
  }
  for (std::size_t r = 0; r < records.size(); ++r) {
    const RunRecord& rec = records[r];
    std::vector<double> row{rec.t, rec.trace.mean, rec.trace.se, static_cast<double>(rec.distinct),
                            static_cast<double>(rec.total)};
    for (const auto& est : observed[r]) {
      row.push_back(est.mean);
      row.push_back(est.se);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table exact_table(const RunConfig& cfg) {
  const TimeGrid grid = cfg.grid();
  const OperatorTrajectory sol = integrate(*cfg.model, cfg.initial_density(), grid);
  Table t;
  t.columns = {"t", "trace"};
  for (const auto& o : cfg.observables) t.columns.push_back(o.name);
  const std::size_t steps = grid.steps();
  for (std::size_t s = 0; s <= steps; ++s) {
    if (s % cfg.record_every != 0 && s != steps) continue;
    std::vector<double> row{grid.time(s), sol.values[s].trace().real()};
    for (const auto& o : cfg.observables) row.push_back((o.op * sol.values[s]).trace().real());
    t.rows.push_back(std::move(row));
  }
  return t;
}

PhotonCountingConfig photon_config(const RunConfig& cfg) {
  PhotonCountingConfig p = cfg.photon;
  p.dt = cfg.dt;
  p.t_final = cfg.t_final;
  p.n_trajectories = cfg.n_trajectories;
  p.n_batches = cfg.n_batches;
  p.seed = cfg.seed;
  p.method = cfg.method;
  return p;
}

HeisenbergConfig heisenberg_config(const RunConfig& cfg) {
  HeisenbergConfig h = cfg.heisenberg;
  h.dt = cfg.dt;
  h.t_final = cfg.t_final;
  h.n_trajectories = cfg.n_trajectories;
  h.n_batches = cfg.n_batches;
  h.seed = cfg.seed;
  h.method = cfg.method;
  return h;
}

Table moments_table(const MomentSeries& m) {
  Table t;
  const std::size_t orders = m.estimate.size();
  t.columns = {"t"};
  for (std::size_t k = 1; k < orders; ++k) t.columns.push_back("mu_" + std::to_string(k));
  for (std::size_t k = 1; k < orders; ++k) t.columns.push_back("se_" + std::to_string(k));
  for (std::size_t k = 1; k < orders; ++k) t.columns.push_back("exact_" + std::to_string(k));
  for (std::size_t r = 0; r < m.times.size(); ++r) {
    std::vector<double> row{m.times[r]};
    for (std::size_t k = 1; k < orders; ++k) row.push_back(m.estimate[k][r].mean);
    for (std::size_t k = 1; k < orders; ++k) row.push_back(m.estimate[k][r].se);
    for (std::size_t k = 1; k < orders; ++k) row.push_back(m.exact[k][r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table tilted_table(const std::vector<TiltedRow>& rows) {
  Table t;
  t.columns = {"t", "zeta", "trace_est", "trace_se", "trace_exact"};
  for (const auto& r : rows) t.rows.push_back({r.t, r.zeta, r.trace.mean, r.trace.se, r.trace_exact});
  return t;
}

Table heisenberg_table(const HeisenbergSeries& h) {
  Table t;
  t.columns = {"t"};
  for (const auto& n : h.names) t.columns.push_back(n + "_est");
  for (const auto& n : h.names) t.columns.push_back(n + "_exact");
  t.columns.insert(t.columns.end(), {"trace_est", "trace_exact", "distinct_states"});
  for (const auto& n : h.names) t.columns.push_back(n + "_se");
  t.columns.push_back("trace_se");
  for (std::size_t r = 0; r < h.times.size(); ++r) {
    std::vector<double> row{h.times[r]};
    for (const auto& series : h.estimate) row.push_back(series[r].mean);
    for (const auto& series : h.exact) row.push_back(series[r]);
    row.push_back(h.trace[r].mean);
    row.push_back(h.trace_exact[r]);
    row.push_back(static_cast<double>(h.distinct[r]));
    for (const auto& series : h.estimate) row.push_back(series[r].se);
    row.push_back(h.trace[r].se);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table divisibility_table(const std::vector<DivisibilityPoint>& pts) {
  Table t;
  t.columns = {"t", "min_choi_eig", "second_min", "third_min", "max_bloch_norm"};
  for (const auto& p : pts) {
    std::vector<double> row{p.t_mid};
    for (Eigen::Index i = 0; i < 3; ++i) row.push_back(i < p.choi.size() ? p.choi[i] : std::nan(""));
    row.push_back(p.max_bloch_norm);
    t.rows.push_back(std::move(row));
  }
  return t;
}

json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row = json::array();
    for (double v : r) row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    rows.push_back(std::move(row));
  }
  return {{"columns", table.columns}, {"rows", std::move(rows)}};
}

} // namespace

void write_table(const std::filesystem::path& csv, const std::filesystem::path& json_path, const Table& table,
                 const std::string& hash, std::uint64_t seed) {
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + csv.string() + "'");
  out << "# config_hash=" << hash << " seed=" << seed << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
    out << '\n';
  }

  json doc = table_json(table);
  doc["config_hash"] = hash;
  doc["seed"] = seed;
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw ConfigError("cannot write '" + json_path.string() + "'");
  js << doc.dump(2) << '\n';
}

void execute(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  json hashed = cfg.source;
  hashed["seed"] = cfg.seed;  // a seed given on the command line is part of the run identity
  const std::string hash = config_hash(hashed);

  json meta = {{"tool", "tnpsim"},
               {"version", kVersion},
               {"command", command_name(cfg.command)},
               {"config_hash", hash},
               {"seed", cfg.seed},
               {"config", cfg.source},
               {"artifacts", {"results.csv", "results.json"}}};

  switch (cfg.command) {
    case Command::simulate:
      write_table(out / "results.csv", out / "results.json", simulate_table(cfg), hash, cfg.seed);
      break;
    case Command::exact:
      write_table(out / "results.csv", out / "results.json", exact_table(cfg), hash, cfg.seed);
      break;
    case Command::moments: {
      const PhotonCountingConfig p = photon_config(cfg);
      write_table(out / "results.csv", out / "results.json", moments_table(run_photon_counting(p)), hash, cfg.seed);
      write_table(out / "tilted.csv", out / "tilted.json", tilted_table(run_tilted_trace(p)), hash, cfg.seed);
      meta["artifacts"] = {"results.csv", "results.json", "tilted.csv", "tilted.json"};
      break;
    }
    case Command::heisenberg:
      write_table(out / "results.csv", out / "results.json", heisenberg_table(run_heisenberg(heisenberg_config(cfg))),
                  hash, cfg.seed);
      break;
    case Command::divisibility:
      write_table(out / "results.csv", out / "results.json",
                  divisibility_table(divisibility_report(*cfg.model, cfg.grid(), cfg.picture)), hash, cfg.seed);
      meta["choi_normalization"] = "sum_ij Lambda[|i><j|] (x) |i><j| divided by d";
      break;
  }

  std::ofstream m(out / "meta.json", std::ios::binary);
  if (!m) throw ConfigError("cannot write meta.json");
  m << meta.dump(2) << '\n';
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Trajectory simulator for trace-nonpreserving master equations"};
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed, overrides the config");
  app.add_option("--threads", threads, "worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) omp_set_num_threads(threads);
  std::string stage = "reading config";
  try {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    stage = std::string("running ") + command_name(cfg.command);
    execute(cfg, out_dir);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "tnpsim: validation error while " << stage << " (" << config_path << "): " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "tnpsim: numerical failure while " << stage << " (" << config_path << "): " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "tnpsim: error while " << stage << ": " << e.what() << '\n';
    return 1;
  }
}

} // namespace tnp
