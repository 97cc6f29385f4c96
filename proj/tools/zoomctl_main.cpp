// Batch CLI: scenario-driven checks, decompositions, simulations and
// Monte Carlo diagnostics with deterministic seeding and file emission.

#include <complex>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "json.hpp"

#include "zoomctl/analysis.hpp"
#include "zoomctl/closed_loop.hpp"
#include "zoomctl/decomposition.hpp"
#include "zoomctl/linear_system.hpp"
#include "zoomctl/report_io.hpp"
#include "zoomctl/scenario.hpp"

namespace {

using nlohmann::json;
using namespace zoomctl;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStructural = 3;
constexpr int kExitRuntime = 4;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::string format = "jsonl";
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  int threads = 0;
};

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json complex_list_json(const std::vector<std::complex<double>>& values) {
  json out = json::array();
  for (const auto& v : values) {
    out.push_back({{"re", v.real()}, {"im", v.imag()}});
  }
  return out;
}

std::vector<std::complex<double>> system_eigenvalues(const LinearSystem& sys) {
  Eigen::EigenSolver<Matrix> es(sys.A, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < sys.A.rows(); ++i) {
    out.push_back(es.eigenvalues()(i));
  }
  return out;
}

void emit(const CommonArgs& args, const std::string& name,
          const std::string& content) {
  if (args.out_dir.empty()) return;
  std::filesystem::create_directories(args.out_dir);
  write_text_file(args.out_dir + "/" + name, content);
}

Scenario load_scenario(CommonArgs& args) {
  if (args.scenario_path.empty()) {
    throw ConfigError("/: --scenario is required");
  }
  Scenario sc = Scenario::from_file(args.scenario_path);
  if (args.seed) sc.seed = *args.seed;
  if (args.trials) {
    if (*args.trials < 1) throw ConfigError("/run/trials: must be >= 1");
    sc.trials = *args.trials;
  }
  return sc;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kBounded:
      return "bounded";
    case Verdict::kDiverging:
      return "diverging";
    default:
      return "inconclusive";
  }
}

int cmd_check(CommonArgs& args) {
  const Scenario sc = load_scenario(args);
  const AssumptionReport rep = check_assumptions(sc.system);
  json out;
  out["controllable"] = rep.controllable;
  out["jointly_observable"] = rep.jointly_observable;
  out["per_sensor_observable"] = rep.per_sensor_observable;
  out["unstable_eigenvalues"] = complex_list_json(rep.unstable_eigenvalues);
  out["all_modes_unstable"] = rep.all_modes_unstable;
  out["state_dim"] = rep.state_dim;
  out["ok"] = rep.ok();
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  emit(args, "check.json", text);
  return kExitOk;
}

int cmd_decompose(CommonArgs& args, bool search_order) {
  const Scenario sc = load_scenario(args);
  BlockDecomposition decomp =
      search_order
          ? find_decreasing_order(sc.system)
                .value_or(build_block_decomposition(sc.system, sc.sensor_order))
          : build_block_decomposition(sc.system, sc.sensor_order);

  json out;
  out["Q"] = matrix_json(decomp.Q);
  out["A_bar"] = matrix_json(decomp.A_bar);
  json blocks = json::array();
  for (const auto& blk : decomp.blocks) {
    blocks.push_back({{"sensor", blk.sensor},
                      {"offset", blk.offset},
                      {"dim", blk.dim},
                      {"eigenvalues", complex_list_json(blk.eigenvalues)}});
  }
  out["blocks"] = std::move(blocks);
  out["sensor_order"] = decomp.sensor_order;
  out["below_block_residual"] = decomp.below_block_residual;
  out["c_pattern_residual"] = decomp.c_pattern_residual;
  out["decoupled"] = decomp.decoupled;
  out["decreasing_order"] = check_decreasing_order(decomp);
  out["sufficient_rate_bits_per_stage"] = sufficient_rate(decomp);
  out["min_rate_bits_per_stage"] = min_rate(system_eigenvalues(sc.system));

  const EigenspaceAssignment asg = check_eigenspace_assumption(sc.system);
  json assignment;
  assignment["satisfied"] = asg.satisfied;
  assignment["block_sensor"] = asg.block_sensor;
  assignment["unassigned_blocks"] = asg.unassigned_blocks;
  if (asg.satisfied) {
    assignment["Q"] = matrix_json(asg.Q);
    assignment["offdiag_residual"] = asg.offdiag_residual;
  }
  out["eigenspace_assignment"] = std::move(assignment);

  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  emit(args, "decompose.json", text);
  return kExitOk;
}

json summary_json(const Scenario& sc,
                  const std::vector<RunReport>& reports) {
  json out;
  out["scenario"] = json::parse(sc.resolved_json());
  out["trials"] = static_cast<int>(reports.size());
  int aborted = 0;
  int initial_misses = 0;
  for (const auto& rep : reports) {
    if (rep.aborted) ++aborted;
    if (!rep.initial_zoom_ok) ++initial_misses;
  }
  out["aborted_trials"] = aborted;
  out["initial_zoom_misses"] = initial_misses;
  if (!reports.empty()) {
    out["K"] = reports[0].K;
    out["bits_per_period"] = reports[0].bits_per_period;
    out["measured_bits_per_period"] = measured_bits_per_period(reports[0]);
    out["F"] = reports[0].F;
    json lam = json::array();
    for (Eigen::Index i = 0; i < reports[0].lam_abs.size(); ++i) {
      lam.push_back(reports[0].lam_abs(i));
    }
    out["sampled_eigenvalue_magnitudes"] = std::move(lam);
  }
  return out;
}

int cmd_simulate(CommonArgs& args) {
  const Scenario sc = load_scenario(args);
  const std::vector<RunReport> reports =
      run_batch(sc.system, sc.loop, sc.seed, sc.trials, args.threads);
  const json summary = summary_json(sc, reports);
  const std::string summary_text = summary.dump(2) + "\n";
  if (args.out_dir.empty()) {
    std::cout << summary_text;
    return kExitOk;
  }
  if (args.format == "csv") {
    emit(args, "trials.csv", run_records_csv(reports));
  } else {
    emit(args, "trials.jsonl", run_records_jsonl(reports));
  }
  emit(args, "summary.json", summary_text);
  std::cout << summary_text;
  return kExitOk;
}

int cmd_rate(CommonArgs& args, int t_max) {
  const Scenario sc = load_scenario(args);
  const auto eigs = system_eigenvalues(sc.system);
  const int links = sc.loop.multi_sensor ? sc.system.sensor_count() : 0;
  json out;
  out["min_rate_bits_per_stage"] = min_rate(eigs);
  json table = json::array();
  std::string csv = "T,paper_formula,implemented_policy,gap_implemented\n";
  for (int T = 1; T <= t_max; ++T) {
    const AvgRate rate = avg_rate(eigs, T, sc.loop.zoom.epsilon, links);
    const AvgRate gap = avg_rate_gap(eigs, T, sc.loop.zoom.epsilon, links);
    table.push_back({{"T", T},
                     {"paper_formula", rate.paper_formula},
                     {"implemented_policy", rate.implemented_policy},
                     {"gap_implemented", gap.implemented_policy}});
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", T,
                  rate.paper_formula, rate.implemented_policy,
                  gap.implemented_policy);
    csv += line;
  }
  out["avg_rate"] = std::move(table);
  if (sc.system.sensor_count() > 1) {
    out["sufficient_rate_bits_per_stage"] =
        sufficient_rate(build_block_decomposition(sc.system, sc.sensor_order));
  }
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  emit(args, "rate.json", text);
  emit(args, "rate.csv", csv);
  return kExitOk;
}

int cmd_tailbound(CommonArgs& args) {
  const Scenario sc = load_scenario(args);
  const TrialSetup setup = prepare_trial(sc.system, sc.loop);
  // Bound P(|v| exceeds the granular half-range) for a sweep of bin scales.
  const SampledSystem samp = build_sampled_system(sc.system, {},
                                                  sc.loop.estimator);
  json out;
  out["sigma_v_bar"] = matrix_json(samp.Sigma_v_bar);
  json rows = json::array();
  std::string csv = "scale,bound\n";
  for (double scale = 1.0; scale <= 16.0; scale *= 2.0) {
    Vector delta(setup.n);
    for (int i = 0; i < setup.n; ++i) {
      delta(i) = std::max(1.0, 0.5 * setup.K[i] * setup.bins0.delta(i) * scale);
    }
    const double bound = gaussian_tail_bound(samp.Sigma_v_bar, delta);
    rows.push_back({{"scale", scale}, {"bound", bound}});
    char line[80];
    std::snprintf(line, sizeof(line), "%.17g,%.17g\n", scale, bound);
    csv += line;
  }
  out["bounds"] = std::move(rows);
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  emit(args, "tailbound.json", text);
  emit(args, "tailbound.csv", csv);
  return kExitOk;
}

int cmd_diagnose(CommonArgs& args) {
  const Scenario sc = load_scenario(args);
  const std::vector<RunReport> reports =
      run_batch(sc.system, sc.loop, sc.seed, sc.trials, args.threads);

  json out = summary_json(sc, reports);

  const TailDecay tail = tail_decay_diagnostic(reports, sc.tail_fit_start);
  out["tail"] = {{"conclusive", tail.conclusive},
                 {"intervals", tail.intervals},
                 {"slope", tail.slope},
                 {"slope_se", tail.slope_se},
                 {"ci", {tail.ci_low, tail.ci_high}},
                 {"fit_start", tail.fit_start},
                 {"fit_end", tail.fit_end}};

  const double F = reports.empty() ? 0.0 : reports[0].F;
  const DriftCheck drift = drift_diagnostic(reports, sc.loop.zoom, F);
  out["drift"] = {{"conclusive", drift.conclusive},
                  {"ok", drift.ok},
                  {"gamma_hat", drift.gamma_hat},
                  {"b_hat", drift.b_hat},
                  {"excursions_outside", drift.excursions_outside},
                  {"excursions_inside", drift.excursions_inside}};

  const MomentDiagnostics moments =
      moment_diagnostic(reports, sc.bounded_factor);
  json coord = json::array();
  for (Verdict v : moments.per_coordinate) coord.push_back(verdict_name(v));
  out["moments"] = {{"overall", verdict_name(moments.overall)},
                    {"per_coordinate", std::move(coord)},
                    {"mid_run_mean", moments.mid_run_mean},
                    {"last_quarter_mean", moments.last_quarter_mean},
                    {"kappa_hat", moments.kappa_hat},
                    {"aborted_trials", moments.trials_aborted}};

  const int S = sc.loop.horizon;
  const int s1 = sc.dist_s1 > 0 ? sc.dist_s1 : S / 2;
  const int s2 = sc.dist_s2 > 0 ? sc.dist_s2 : S;
  try {
    const DistributionDistance dist =
        invariant_distribution_diagnostic(reports, s1, s2);
    out["distribution"] = {
        {"s1", dist.s1},
        {"s2", dist.s2},
        {"ks_between_times", dist.ks_between_times},
        {"ks_null", dist.ks_null},
        {"critical_between", dist.critical_between},
        {"critical_null", dist.critical_null},
        {"stationary_consistent", dist.stationary_consistent}};
  } catch (const InputError& err) {
    out["distribution"] = {{"error", err.what()}};
  }

  // Moment series as CSV.
  std::string csv = "step,mean_sq,se\n";
  for (std::size_t s = 0; s < moments.mean_sq.size(); ++s) {
    char line[100];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", s,
                  moments.mean_sq[s], moments.se_sq[s]);
    csv += line;
  }
  std::string tail_csv = "k,survival\n";
  for (std::size_t k = 0; k < tail.survival.size(); ++k) {
    char line[80];
    std::snprintf(line, sizeof(line), "%zu,%.17g\n", k, tail.survival[k]);
    tail_csv += line;
  }

  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  emit(args, "diagnostics.json", text);
  emit(args, "moment_series.csv", csv);
  emit(args, "tail_survival.csv", tail_csv);
  return kExitOk;
}

void report_error(const std::string& kind, const std::string& message) {
  json err;
  err["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized-feedback stabilization toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  bool search_order = false;
  int t_max = 50;

  const auto add_common = [&](CLI::App* cmd, bool with_run_flags) {
    cmd->add_option("--scenario", args.scenario_path, "Scenario JSON path")
        ->required();
    cmd->add_option("--out", args.out_dir, "Output directory");
    if (with_run_flags) {
      cmd->add_option("--seed", args.seed, "Override scenario seed (u64)");
      cmd->add_option("--trials", args.trials, "Override trial count");
      cmd->add_option("--threads", args.threads,
                      "Worker threads (0 = hardware)");
      cmd->add_option("--format", args.format, "jsonl|csv")
          ->check(CLI::IsMember({"jsonl", "csv"}));
    }
  };

  CLI::App* check = app.add_subcommand("check", "Assumption report");
  add_common(check, false);
  CLI::App* decompose =
      app.add_subcommand("decompose", "Observability block decomposition");
  add_common(decompose, false);
  decompose->add_flag("--search-order", search_order,
                      "Search sensor orders for decreasing block magnitudes");
  CLI::App* simulate = app.add_subcommand("simulate", "Run the coding loop");
  add_common(simulate, true);
  CLI::App* rate = app.add_subcommand("rate", "Rate floor and policy rates");
  add_common(rate, false);
  rate->add_option("--t-max", t_max, "Largest period multiplier")
      ->check(CLI::PositiveNumber);
  CLI::App* tailbound =
      app.add_subcommand("tailbound", "Gaussian overflow tail bounds");
  add_common(tailbound, false);
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Stability diagnostics from Monte Carlo");
  add_common(diagnose, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (check->parsed()) return cmd_check(args);
    if (decompose->parsed()) return cmd_decompose(args, search_order);
    if (simulate->parsed()) return cmd_simulate(args);
    if (rate->parsed()) return cmd_rate(args, t_max);
    if (tailbound->parsed()) return cmd_tailbound(args);
    if (diagnose->parsed()) return cmd_diagnose(args);
  } catch (const ConfigError& err) {
    report_error("validation", err.what());
    return kExitValidation;
  } catch (const InputError& err) {
    report_error("validation", err.what());
    return kExitValidation;
  } catch (const UnsupportedSystemError& err) {
    report_error("unsupported-system", err.what());
    return kExitStructural;
  } catch (const StructuralError& err) {
    report_error("structural", err.what());
    return kExitStructural;
  } catch (const IoError& err) {
    report_error("io", err.what());
    return kExitRuntime;
  } catch (const NumericError& err) {
    report_error("numeric", err.what());
    return kExitRuntime;
  } catch (const std::exception& err) {
    report_error("internal", err.what());
    return kExitRuntime;
  }
  return kExitOk;
}
