// Command line front end: solves, simulates and exports plot-ready tables
// for fleet configurations given as JSON files.
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
// 4 budget exceeded, 1 anything else. Failures emit one JSON object on
// stderr (and error.json in the output directory when it exists).

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoisched/decomp.hpp"
#include "aoisched/errors.hpp"
#include "aoisched/exact_solver.hpp"
#include "aoisched/io.hpp"
#include "aoisched/model.hpp"
#include "aoisched/oracle.hpp"
#include "aoisched/simulate.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace aoisched;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  double tol = 1e-9;
  double damping = 0.5;
  std::uint64_t max_iters = 1'000'000;
  std::uint64_t max_states = 8'000'000;
  std::uint64_t horizon = 10'000;
  std::uint64_t burn_in = 1'000;
  std::uint32_t reps = 1;
  std::uint32_t threads = 1;
};

void add_common_flags(CLI::App& cmd, CommonOpts& o, bool with_sim) {
  cmd.add_option("--config", o.config_path, "Fleet configuration JSON file")->required();
  cmd.add_option("--out", o.out_dir, "Output directory (created if missing)");
  cmd.add_option("--seed", o.seed, "Random seed for simulation streams");
  cmd.add_option("--tol", o.tol, "Solver span tolerance");
  cmd.add_option("--damping", o.damping, "Solver damping factor in (0, 1]");
  cmd.add_option("--max-iters", o.max_iters, "Solver iteration cap");
  cmd.add_option("--max-states", o.max_states, "Joint state budget for exact work");
  cmd.add_option("--threads", o.threads, "Worker threads (0 = auto)");
  if (with_sim) {
    cmd.add_option("--horizon", o.horizon, "Measured slots per replication");
    cmd.add_option("--burn-in", o.burn_in, "Discarded slots before measurement");
    cmd.add_option("--reps", o.reps, "Number of replications");
  }
}

SolverOptions solver_options(const CommonOpts& o) {
  SolverOptions s;
  s.tol = o.tol;
  s.damping = o.damping;
  s.max_iters = o.max_iters;
  s.max_states = o.max_states;
  s.threads = static_cast<int>(o.threads);
  return s;
}

SimOptions sim_options(const CommonOpts& o) {
  SimOptions s;
  s.horizon = o.horizon;
  s.burn_in = o.burn_in;
  s.replications = static_cast<int>(o.reps);
  s.seed = o.seed;
  s.threads = static_cast<int>(o.threads);
  return s;
}

std::ofstream open_output(const CommonOpts& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  const fs::path p = fs::path(o.out_dir) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + p.string());
  return out;
}

void write_summary(const CommonOpts& o, json summary) {
  json root;
  root["config"] = json::parse(config_to_json(load_config(o.config_path)));
  root["seed"] = o.seed;
  root.update(summary);
  auto out = open_output(o, "summary.json");
  out << root.dump(2) << '\n';
}

/// Every CSV carries the seed alongside the config comment the writers emit.
template <typename Fn>
void write_csv(const CommonOpts& o, const std::string& name, Fn&& fill) {
  auto out = open_output(o, name);
  out << "# seed: " << o.seed << '\n';
  fill(out);
}

bool exact_in_budget(const SystemModel& model, std::uint64_t max_states) {
  return model.state_count_exact() && model.state_count() <= max_states;
}

// ---------------------------------------------------------------------------
// solve-optimal

int run_solve_optimal(const CommonOpts& o) {
  const SystemConfig cfg = load_config(o.config_path);
  const SystemModel model(cfg);
  const SolverOptions sopts = solver_options(o);

  const ValueTable vt = rvia_solve(model, sopts);
  const StructuredExtractResult ext = structure_aware_extract(model, vt.values);
  EvalOptions eopts;
  eopts.max_states = o.max_states;
  const EvalResult ev = exact_policy_evaluation(model, ext.policy, eopts);

  write_csv(o, "policy.csv",
            [&](std::ostream& os) { write_policy_csv(os, model, ext.policy, &vt.values); });

  json s;
  s["theta"] = ev.theta;
  s["theta_rvia"] = vt.theta;
  s["iterations"] = vt.iterations;
  s["final_span"] = vt.final_span;
  s["states"] = model.state_count();
  s["reachable_states"] = ev.reachable;
  s["recurrent_states"] = ev.recurrent;
  s["extract_evaluated"] = ext.evaluated;
  s["extract_propagated"] = ext.propagated;
  write_summary(o, std::move(s));
  std::cout << "theta " << format_double(ev.theta) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// solve-suboptimal

int run_solve_suboptimal(const CommonOpts& o) {
  const SystemConfig cfg = load_config(o.config_path);
  const SystemModel model(cfg);
  const SolverOptions sopts = solver_options(o);

  const std::vector<double> prob = default_base_scheduling(cfg);
  const DecompositionTables tables = solve_decomposition(model, prob, sopts);

  write_csv(o, "per_device.csv",
            [&](std::ostream& os) { write_per_device_csv(os, model, tables); });

  json s;
  s["schedule_prob"] = prob;
  json thetas = json::array();
  double theta_sum = 0.0;
  for (const auto& d : tables.per_device) {
    thetas.push_back(d.theta);
    theta_sum += d.theta;
  }
  s["theta_per_device"] = std::move(thetas);
  s["theta_sum"] = theta_sum;

  // The improved policy is materialized and evaluated exactly only when the
  // joint space fits the budget; at fleet scale the tables alone are the
  // output and the simulator applies the policy on the fly.
  if (exact_in_budget(model, o.max_states)) {
    const StructuredExtractResult mat = materialize_suboptimal_policy(model, tables, o.max_states);
    EvalOptions eopts;
    eopts.max_states = o.max_states;
    const EvalResult sub = exact_policy_evaluation(model, mat.policy, eopts);
    const EvalResult base = exact_policy_evaluation(model, base_policy_evaluator(model, tables), eopts);
    write_csv(o, "suboptimal_policy.csv",
              [&](std::ostream& os) { write_policy_csv(os, model, mat.policy); });
    s["theta_suboptimal"] = sub.theta;
    s["theta_base"] = base.theta;
    s["extract_evaluated"] = mat.evaluated;
    s["extract_propagated"] = mat.propagated;
    std::cout << "theta_suboptimal " << format_double(sub.theta) << '\n';
  } else {
    s["exact_evaluation"] = "skipped: joint space over budget";
    std::cout << "theta_sum " << format_double(theta_sum) << '\n';
  }
  write_summary(o, std::move(s));
  return 0;
}

// ---------------------------------------------------------------------------
// simulate / compare

std::unique_ptr<PolicySource> build_policy(const std::string& name, const SystemModel& model,
                                           const CommonOpts& o) {
  if (name == "all_idle") return make_all_idle_policy(model);
  if (name == "optimal") {
    const ValueTable vt = rvia_solve(model, solver_options(o));
    return make_table_policy(model, structure_aware_extract(model, vt.values).policy, "optimal");
  }
  const DecompositionTables tables =
      solve_decomposition(model, default_base_scheduling(model.config()), solver_options(o));
  if (name == "suboptimal") return make_suboptimal_policy(model, tables);
  if (name == "greedy") return make_greedy_policy(model, tables);
  if (name == "base") return make_base_policy(model, tables);
  throw ConfigError("unknown policy \"" + name +
                    "\" (expected optimal, suboptimal, greedy, base or all_idle)");
}

int run_simulate(const CommonOpts& o, const std::string& policy_name, bool trajectory) {
  const SystemConfig cfg = load_config(o.config_path);
  const SystemModel model(cfg);
  const std::unique_ptr<PolicySource> policy = build_policy(policy_name, model, o);

  SimOptions sim = sim_options(o);
  sim.record_trajectory = trajectory;
  const SimResult res = simulate(model, *policy, sim);

  write_csv(o, "sim.csv", [&](std::ostream& os) {
    write_sim_csv(os, model, {policy->name()}, {res}, o.seed);
  });
  if (trajectory) {
    write_csv(o, "trajectory.csv", [&](std::ostream& os) {
      os << "# config: " << config_to_json(cfg) << '\n';
      os << "slot,device,a_r\n";
      for (std::size_t t = 0; t < res.trajectory.size(); ++t)
        for (std::size_t k = 0; k < res.trajectory[t].size(); ++k)
          os << t << ',' << k << ',' << res.trajectory[t][k] << '\n';
    });
  }
  auto out = open_output(o, "summary.json");
  out << sim_summary_json(cfg, o.seed, {policy->name()}, {res}) << '\n';
  std::cout << policy->name() << " mean_aoi " << format_double(res.overall_mean) << '\n';
  return 0;
}

int run_compare(const CommonOpts& o, const std::vector<std::string>& names) {
  const SystemConfig cfg = load_config(o.config_path);
  const SystemModel model(cfg);

  std::vector<std::unique_ptr<PolicySource>> owned;
  std::vector<const PolicySource*> ptrs;
  for (const std::string& name : names) {
    owned.push_back(build_policy(name, model, o));
    ptrs.push_back(owned.back().get());
  }
  const Comparison cmp = compare_policies(model, ptrs, sim_options(o));

  write_csv(o, "sim.csv",
            [&](std::ostream& os) { write_sim_csv(os, model, cmp.names, cmp.results, o.seed); });

  json s = json::parse(sim_summary_json(cfg, o.seed, cmp.names, cmp.results));
  s["mean_diff"] = cmp.mean_diff;
  s["diff_std_error"] = cmp.diff_std_error;
  auto out = open_output(o, "summary.json");
  out << s.dump(2) << '\n';
  for (std::size_t i = 0; i < cmp.names.size(); ++i)
    std::cout << cmp.names[i] << " mean_aoi " << format_double(cmp.results[i].overall_mean)
              << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// structure-map

int run_structure_map(const CommonOpts& o, int row_device, int col_device, int fix_receiver,
                      int fix_remaining, int fix_buffer) {
  const SystemConfig cfg = load_config(o.config_path);
  const SystemModel model(cfg);
  const ValueTable vt = rvia_solve(model, solver_options(o));
  const Policy policy = structure_aware_extract(model, vt.values).policy;
  const int devices = model.device_count();

  if (devices == 1) {
    // Full per-state map: the sampling action over the (a_d, a_r) plane for
    // every remaining-packet count (and buffer age where present).
    write_csv(o, "structure_map.csv", [&](std::ostream& os) {
      os << "# config: " << config_to_json(cfg) << '\n';
      const bool buffered = model.space(0).has_buffer();
      os << (buffered ? "a_b,a_d,a_r,d,action\n" : "a_d,a_r,d,action\n");
      for (std::uint64_t s = 0; s < model.state_count(); ++s) {
        const DeviceState x = model.space(0).state_at(static_cast<std::uint32_t>(s));
        const DeviceAction a = model.actions()[policy.action_id[s]][0];
        if (buffered) os << x.buffer_age << ',';
        os << x.device_age << ',' << x.receiver_age << ',' << x.remaining << ','
           << action_char(a) << '\n';
      }
    });
  } else {
    if (row_device < 0 || row_device >= devices || col_device < 0 || col_device >= devices ||
        row_device == col_device)
      throw ConfigError("row/col devices must be distinct and in range");
    // Switch map: actions over the two devices' age plane, every other
    // coordinate pinned to the requested values.
    std::vector<DeviceState> fixed(static_cast<std::size_t>(devices));
    for (int k = 0; k < devices; ++k) {
      DeviceState x;
      x.buffer_age = model.space(k).has_buffer() ? fix_buffer : 0;
      x.device_age = 0;
      x.receiver_age = fix_receiver;
      x.remaining = fix_remaining;
      if (!model.space(k).contains(x))
        throw ConfigError("fixed coordinates outside the state space of device " +
                          std::to_string(k));
      fixed[static_cast<std::size_t>(k)] = x;
    }
    write_csv(o, "structure_map.csv", [&](std::ostream& os) {
      os << "# config: " << config_to_json(cfg) << '\n';
      os << "# fixed: a_r=" << fix_receiver << " d=" << fix_remaining;
      if (model.space(row_device).has_buffer()) os << " a_b=" << fix_buffer;
      os << '\n';
      os << "a_d_" << row_device << ",a_d_" << col_device << ",action_" << row_device
         << ",action_" << col_device << ",scheduled\n";
      std::vector<DeviceState> state = fixed;
      const int rows = model.space(row_device).cap_device();
      const int cols = model.space(col_device).cap_device();
      for (int r = 0; r <= rows; ++r) {
        for (int c = 0; c <= cols; ++c) {
          state[static_cast<std::size_t>(row_device)].device_age = r;
          state[static_cast<std::size_t>(col_device)].device_age = c;
          const std::uint64_t idx = model.index_of(state);
          const SystemAction& w = model.actions()[policy.action_id[idx]];
          os << r << ',' << c << ',' << action_char(w[static_cast<std::size_t>(row_device)])
             << ',' << action_char(w[static_cast<std::size_t>(col_device)]) << ',';
          bool first = true;
          for (int k = 0; k < devices; ++k) {
            if (w[static_cast<std::size_t>(k)] == DeviceAction::Idle) continue;
            if (!first) os << ';';
            os << k;
            first = false;
          }
          os << '\n';
        }
      }
    });
  }

  json s;
  s["theta"] = vt.theta;
  s["iterations"] = vt.iterations;
  write_summary(o, std::move(s));
  std::cout << "theta " << format_double(vt.theta) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepParam {
  std::string name;  // lambda, rho, L, tau or M
  int device = -1;
};

SweepParam parse_param(const std::string& text) {
  SweepParam p;
  const auto colon = text.find(':');
  p.name = text.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      p.device = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad device index in --param");
    }
  }
  const bool per_device = p.name == "lambda" || p.name == "rho" || p.name == "L" || p.name == "tau";
  if (per_device && p.device < 0)
    throw ConfigError("--param " + p.name + " needs a device index, e.g. " + p.name + ":0");
  if (p.name == "M" && p.device >= 0) throw ConfigError("--param M takes no device index");
  if (!per_device && p.name != "M")
    throw ConfigError("unknown sweep parameter \"" + p.name + "\" (lambda, rho, L, tau or M)");
  return p;
}

void apply_param(SystemConfig& cfg, const SweepParam& p, double value) {
  auto as_int = [&](double v) {
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw ConfigError("--param " + p.name + " needs integers");
    return i;
  };
  if (p.name == "M") {
    cfg.max_scheduled = as_int(value);
    return;
  }
  if (p.device >= static_cast<int>(cfg.devices.size()))
    throw ConfigError("--param device index out of range");
  DeviceParams& d = cfg.devices[static_cast<std::size_t>(p.device)];
  if (p.name == "lambda")
    d.channel_reliability = value;
  else if (p.name == "rho")
    d.arrival_rate = value;
  else if (p.name == "L")
    d.packets_per_update = as_int(value);
  else
    d.generation_slots = as_int(value);
}

int run_sweep(const CommonOpts& o, const std::string& param_text,
              const std::vector<double>& values, bool no_optimal) {
  if (values.empty()) throw ConfigError("--values must list at least one grid point");
  const SweepParam param = parse_param(param_text);
  const SystemConfig base_cfg = load_config(o.config_path);

  struct Row {
    double value;
    double theta_optimal;
    double theta_suboptimal;
    double theta_base;
  };
  std::vector<Row> rows;
  for (double v : values) {
    SystemConfig cfg = base_cfg;
    apply_param(cfg, param, v);
    const SystemModel model(cfg);
    const SolverOptions sopts = solver_options(o);
    EvalOptions eopts;
    eopts.max_states = o.max_states;

    Row row{v, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
    if (!no_optimal) {
      const ValueTable vt = rvia_solve(model, sopts);
      row.theta_optimal =
          exact_policy_evaluation(model, structure_aware_extract(model, vt.values).policy, eopts)
              .theta;
    }
    const DecompositionTables tables =
        solve_decomposition(model, default_base_scheduling(cfg), sopts);
    row.theta_suboptimal =
        exact_policy_evaluation(model, materialize_suboptimal_policy(model, tables, o.max_states).policy,
                                eopts)
            .theta;
    row.theta_base = exact_policy_evaluation(model, base_policy_evaluator(model, tables), eopts).theta;
    rows.push_back(row);
    std::cout << param_text << '=' << format_double(v) << " theta_optimal "
              << format_double(row.theta_optimal) << " theta_suboptimal "
              << format_double(row.theta_suboptimal) << " theta_base "
              << format_double(row.theta_base) << '\n';
  }

  write_csv(o, "sweep.csv", [&](std::ostream& os) {
    os << "# config: " << config_to_json(base_cfg) << '\n';
    os << "# param: " << param_text << '\n';
    os << "param_value,theta_optimal,theta_suboptimal,theta_base\n";
    for (const Row& r : rows)
      os << format_double(r.value) << ',' << format_double(r.theta_optimal) << ','
         << format_double(r.theta_suboptimal) << ',' << format_double(r.theta_base) << '\n';
  });

  json s;
  s["param"] = param_text;
  json grid = json::array();
  for (const Row& r : rows) {
    json e;
    e["value"] = r.value;
    e["theta_optimal"] = r.theta_optimal;
    e["theta_suboptimal"] = r.theta_suboptimal;
    e["theta_base"] = r.theta_base;
    grid.push_back(std::move(e));
  }
  s["grid"] = std::move(grid);
  write_summary(o, std::move(s));
  return 0;
}

// ---------------------------------------------------------------------------

const char* error_type(int code) {
  switch (code) {
    case 2: return "config";
    case 3: return "non_convergence";
    case 4: return "budget";
    default: return "internal";
  }
}

void emit_error(const CommonOpts& o, int code, const std::string& message) {
  json e;
  e["error"]["type"] = error_type(code);
  e["error"]["message"] = message;
  const std::string text = e.dump();
  std::cerr << text << '\n';
  std::error_code ignored;
  if (fs::exists(o.out_dir, ignored)) {
    std::ofstream out(fs::path(o.out_dir) / "error.json", std::ios::binary);
    if (out) out << text << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Status-age scheduling toolkit: exact and decomposed solvers plus simulation"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string policy_name = "suboptimal";
  bool trajectory = false;
  std::vector<std::string> compare_names{"suboptimal", "greedy", "base"};
  int row_device = 0, col_device = 1;
  int fix_receiver = 5, fix_remaining = 1, fix_buffer = 1;
  std::string param_text;
  std::vector<double> sweep_values;
  bool no_optimal = false;

  CLI::App* solve_optimal = app.add_subcommand(
      "solve-optimal", "Exact average-cost solve and optimal policy export");
  add_common_flags(*solve_optimal, o, false);

  CLI::App* solve_suboptimal = app.add_subcommand(
      "solve-suboptimal", "Per-device decomposition solve and improved policy export");
  add_common_flags(*solve_suboptimal, o, false);

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Run one policy in the simulator");
  add_common_flags(*simulate_cmd, o, true);
  simulate_cmd->add_option("--policy", policy_name,
                           "optimal, suboptimal, greedy, base or all_idle");
  simulate_cmd->add_flag("--trajectory", trajectory, "Also export replication 0 ages per slot");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Run several policies on common random numbers");
  add_common_flags(*compare_cmd, o, true);
  compare_cmd->add_option("--policies", compare_names, "Policies to compare")->delimiter(',');

  CLI::App* structure_cmd = app.add_subcommand(
      "structure-map", "Export the optimal policy as age-plane grids");
  add_common_flags(*structure_cmd, o, false);
  structure_cmd->add_option("--row-device", row_device, "Row device of the switch map");
  structure_cmd->add_option("--col-device", col_device, "Column device of the switch map");
  structure_cmd->add_option("--fix-receiver", fix_receiver, "Pinned receiver age (switch map)");
  structure_cmd->add_option("--fix-remaining", fix_remaining, "Pinned remaining packets");
  structure_cmd->add_option("--fix-buffer", fix_buffer, "Pinned buffer age (buffered variant)");

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Exact average cost of the three policies over a parameter grid");
  add_common_flags(*sweep_cmd, o, false);
  sweep_cmd->add_option("--param", param_text, "Swept parameter: lambda:K, rho:K, L:K, tau:K or M")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "Grid values")->required()->delimiter(',');
  sweep_cmd->add_flag("--no-optimal", no_optimal, "Skip the exact optimal solve per point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error(o, 2, e.what());
    return 2;
  }

  try {
    if (solve_optimal->parsed()) return run_solve_optimal(o);
    if (solve_suboptimal->parsed()) return run_solve_suboptimal(o);
    if (simulate_cmd->parsed()) return run_simulate(o, policy_name, trajectory);
    if (compare_cmd->parsed()) return run_compare(o, compare_names);
    if (structure_cmd->parsed())
      return run_structure_map(o, row_device, col_device, fix_receiver, fix_remaining, fix_buffer);
    if (sweep_cmd->parsed()) return run_sweep(o, param_text, sweep_values, no_optimal);
    emit_error(o, 2, "no subcommand given");
    return 2;
  } catch (const ConfigError& e) {
    emit_error(o, 2, e.what());
    return 2;
  } catch (const NonConvergence& e) {
    emit_error(o, 3, e.what());
    return 3;
  } catch (const BudgetExceeded& e) {
    emit_error(o, 4, e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error(o, 1, e.what());
    return 1;
  }
}
