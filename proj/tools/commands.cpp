#include "commands.hpp"

#include "critlab/counterexample.hpp"
#include "critlab/flow.hpp"
#include "critlab/interactions.hpp"
#include "critlab/output.hpp"
#include "critlab/spectral.hpp"
#include "critlab/stability.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <ostream>
#include <thread>

namespace critlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kStabilitySpread = 3.0;
constexpr double kDistanceFraction = 0.5;
constexpr double kBoundedGrowthExponent = 0.1;
constexpr double kInteractionSlopeTol = 0.03;

// Runs work(i) for i < count on up to `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& work) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errs(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) work(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

Provenance provenance(const ExperimentConfig& cfg, const std::string& command_line,
                      std::vector<std::pair<std::string, std::string>> grid) {
  Provenance p;
  p.command = command_line;
  p.config_hash = config_hash(cfg.entries());
  p.grid = std::move(grid);
  return p;
}

fs::path prepare_out(const ExperimentConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

json config_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.entries()) j[k] = v;
  return j;
}

// NaN and infinities have no JSON form; they are written as null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json rate_json(const RateFit& r) {
  return {{"rate", num(r.rate)}, {"log_prefactor", num(r.log_prefactor)}, {"rss", num(r.rss)},
          {"points", r.points}};
}

json model_json(const ScalingModelFit& f) {
  return {{"model", f.model},         {"exponent", num(f.exponent)},
          {"log_power", num(f.log_power)}, {"log_prefactor", num(f.log_prefactor)},
          {"rss", num(f.rss)},        {"aic", num(f.aic)},
          {"points", f.points}};
}

std::vector<std::pair<std::string, std::string>> axi_sweep_grid(int n, int ns, int nr,
                                                                double extent_factor,
                                                                const std::vector<double>& Rs) {
  return {{"kind", "axisymmetric"},
          {"n", std::to_string(n)},
          {"ns", std::to_string(ns)},
          {"nr", std::to_string(nr)},
          {"extent", format_number(extent_factor) + "*R"},
          {"foci", "-R;R for R in " + format_list(Rs)}};
}

void fail_check(CommandResult& res, const std::string& msg) {
  res.check_passed = false;
  res.check_messages.push_back(msg);
}

}  // namespace

CommandResult cmd_spectrum(const ExperimentConfig& cfg, const std::string& command_line) {
  const int n = cfg.n;
  const auto& Rs = *cfg.R;
  const int ns = cfg.resolution > 0 ? cfg.resolution : 256;
  const int nr = ns / 2;
  const double p = (n + 2.0) / (n - 2.0);
  EigenOptions eo;
  eo.seed = static_cast<unsigned>(cfg.seed);

  const EpsilonGap gap = epsilon_gap(n);
  RadialGridSpec rs;
  rs.n = n;
  if (cfg.r_max > 0) rs.r_max = cfg.r_max;
  auto radial = make_radial_grid(rs);
  const auto single_w = single_bubble_weight(n, make_params(n, 1.0));
  const auto single0 = solve_weighted_eigen(radial, single_w, 0, 3, eo);
  const auto single1 = solve_weighted_eigen(radial, single_w, 1, 1, eo);

  struct Point {
    TwoBubbleSpectra spectra;
    int count0 = 0, count1 = 0, total = 0;
    bool tie = false;
    bool structural = false;
    double dEF = NAN, dEF_sampled = NAN;
  };
  std::vector<Point> pts(Rs.size());
  parallel_for(Rs.size(), cfg.threads, [&](std::size_t i) {
    const double R = Rs[i];
    auto grid = make_axi_grid(two_bubble_axi_spec(n, R, ns, nr));
    Point& pt = pts[i];
    pt.spectra = two_bubble_spectra(grid, R, 8, 4, eo);
    try {
      BuildEReport rep = build_E(pt.spectra, gap);
      pt.count0 = rep.count_sector0;
      pt.count1 = rep.count_sector1;
      pt.total = rep.total;
      pt.tie = rep.threshold_tie;
      pt.dEF = subspace_distance(rep.E, build_F_discrete(grid, R, eo));
      pt.dEF_sampled = subspace_distance(rep.E, build_F(grid, R));
    } catch (const StructuralError& e) {
      pt.structural = true;
      pt.total = e.count();
    }
  });

  CommandResult res;
  fs::path dir = prepare_out(cfg);
  Provenance prov = provenance(cfg, command_line, axi_sweep_grid(n, ns, nr, 64.0, Rs));

  CsvTable table({"weight", "R", "sector", "index", "eigenvalue", "multiplicity", "residual"});
  auto add_pairs = [&](const std::string& label, double R, const SpectralDecomposition& sd) {
    for (std::size_t k = 0; k < sd.pairs.size(); ++k)
      table.add_row({label, R, static_cast<long long>(sd.sector), static_cast<long long>(k),
                     sd.pairs[k].lambda, static_cast<long long>(sd.multiplicity),
                     sd.pairs[k].residual});
  };
  add_pairs("single", 0.0, single0);
  add_pairs("single", 0.0, single1);
  for (std::size_t i = 0; i < Rs.size(); ++i) {
    add_pairs("two", Rs[i], pts[i].spectra.sector0);
    add_pairs("two", Rs[i], pts[i].spectra.sector1);
  }
  table.write(dir / "spectra.csv", prov);
  res.files.push_back((dir / "spectra.csv").string());

  json points = json::array();
  for (std::size_t i = 0; i < Rs.size(); ++i) {
    const Point& pt = pts[i];
    points.push_back({{"R", Rs[i]},
                      {"count_sector0", pt.count0},
                      {"count_sector1", pt.count1},
                      {"dim_E", pt.total},
                      {"structural_error", pt.structural},
                      {"threshold_tie", pt.tie},
                      {"dEF", num(pt.dEF)},
                      {"dEF_sampled", num(pt.dEF_sampled)}});
  }
  json body = {{"n", n},
               {"p", p},
               {"Lambda", gap.Lambda},
               {"epsilon", gap.epsilon},
               {"threshold", gap.threshold()},
               {"expected_dim", 2 * n + 4},
               {"single_bubble",
                {{"grid", json(radial->metadata())},
                 {"sector0", {single0.pairs[0].lambda, single0.pairs[1].lambda,
                              single0.pairs[2].lambda}},
                 {"sector1", {single1.pairs[0].lambda}}}},
               {"points", points},
               {"config", config_json(cfg)}};
  write_manifest(dir / "spectrum.json", prov, body);
  res.files.push_back((dir / "spectrum.json").string());

  for (std::size_t i = 0; i < Rs.size(); ++i) {
    if (pts[i].total != 2 * n + 4)
      fail_check(res, "R=" + format_number(Rs[i]) + ": " + std::to_string(pts[i].total) +
                          " eigenvalues below the threshold, expected " +
                          std::to_string(2 * n + 4));
    if (i > 0 && !(pts[i].dEF < pts[i - 1].dEF))
      fail_check(res, "d(E,F) does not decrease from R=" + format_number(Rs[i - 1]) + " to R=" +
                          format_number(Rs[i]));
  }
  return res;
}

CommandResult cmd_interaction(const ExperimentConfig& cfg, const std::string& command_line) {
  const int n = cfg.n;
  const auto& Ds = *cfg.R;
  QuadratureResolution qr;
  if (cfg.resolution > 0) {
    qr.ns = cfg.resolution;
    qr.nr = cfg.resolution / 2;
  }

  CommandResult res;
  CsvTable table({"n", "alpha", "beta", "D", "Q", "value", "predicted", "ratio"});
  json pairs = json::array();
  for (std::size_t k = 0; k + 1 < cfg.exponents.size(); k += 2) {
    const double a = cfg.exponents[k], b = cfg.exponents[k + 1];
    auto rows = interaction_sweep(n, a, b, Ds, qr, cfg.threads);
    for (const auto& r : rows)
      table.add_row({static_cast<long long>(n), a, b, r.D, r.Q, r.value, r.predicted, r.ratio});

    std::vector<InteractionSweepRow> separated;
    for (const auto& r : rows)
      if (r.Q < 1.0) separated.push_back(r);
    const InteractionRegime regime = classify_exponents(a, b);
    json entry = {{"alpha", a},
                  {"beta", b},
                  {"regime", to_string(regime)},
                  {"predicted_exponent", (n - 2.0) * std::min(a, b) / 2.0}};
    if (separated.size() >= 3) {
      auto choice = choose_interaction_model(separated);
      entry["power"] = model_json(choice.power);
      entry["power_log"] = model_json(choice.power_log);
      entry["prefers_log"] = choice.prefers_log;
      const double pred = (n - 2.0) * std::min(a, b) / 2.0;
      if (regime == InteractionRegime::Unbalanced) {
        const double err = std::abs(choice.power.exponent - pred) / pred;
        if (err > kInteractionSlopeTol)
          fail_check(res, "alpha=" + format_number(a) + " beta=" + format_number(b) +
                              ": fitted exponent " + format_number(choice.power.exponent) +
                              " vs " + format_number(pred));
      } else if (regime == InteractionRegime::Balanced && !choice.prefers_log) {
        fail_check(res, "alpha=beta=" + format_number(a) + ": log-corrected model not preferred");
      }
    }
    pairs.push_back(entry);
  }

  fs::path dir = prepare_out(cfg);
  Provenance prov = provenance(cfg, command_line,
                               {{"kind", "pair"},
                                {"n", std::to_string(n)},
                                {"ns", std::to_string(qr.ns)},
                                {"nr", std::to_string(qr.nr)},
                                {"radial_cells", std::to_string(qr.radial_cells)}});
  table.write(dir / "interaction.csv", prov);
  res.files.push_back((dir / "interaction.csv").string());
  write_manifest(dir / "interaction.json", prov,
                 {{"n", n},
                  {"S_pow_n", sobolev_constants(n).S_pow_n},
                  {"pairs", pairs},
                  {"config", config_json(cfg)}});
  res.files.push_back((dir / "interaction.json").string());
  return res;
}

CommandResult cmd_counterexample(const ExperimentConfig& cfg, const std::string& command_line) {
  const int n = cfg.n;
  const auto& Rs = *cfg.R;
  CounterexampleConfig cc;
  if (cfg.resolution > 0) {
    cc.ns = cfg.resolution;
    cc.nr = cfg.resolution * 5 / 8;
  }
  cc.solve_tol = cfg.tol;

  std::vector<CounterexampleRun> runs(Rs.size());
  parallel_for(Rs.size(), cfg.threads, [&](std::size_t i) { runs[i] = assemble_run(n, Rs[i], cc); });
  std::vector<ScalingFit> fits;
  if (runs.size() >= 4) fits = sweep_fits(runs);

  CommandResult res;
  CsvTable table({"n", "R", "grad_rho", "f_L2", "f_Hm1", "ftilde_Hm1", "f_minus_ftilde_dual",
                  "deficit_dual", "deficit_h", "zeta", "xi", "deficit_over_zeta",
                  "fitted_distance", "distance_over_deficit_h", "grad_u_minus", "dEF",
                  "min_gap", "pde_residual"});
  for (const auto& r : runs) {
    const auto& N = r.norms;
    table.add_row({static_cast<long long>(n), r.R, N.grad_rho, N.f_L2, N.f_Hm1, N.ftilde_Hm1,
                   N.f_minus_ftilde_dual, N.deficit_dual, N.deficit_h, r.zeta_of_rho,
                   r.xi_of_rho, N.deficit_dual / r.zeta_of_rho, r.fitted_distance,
                   r.fitted_distance / N.deficit_h, N.grad_u_minus, r.dEF, r.min_gap,
                   r.pde_residual});
  }
  fs::path dir = prepare_out(cfg);
  Provenance prov =
      provenance(cfg, command_line, axi_sweep_grid(n, cc.ns, cc.nr, cc.extent_factor, Rs));
  table.write(dir / "counterexample.csv", prov);
  res.files.push_back((dir / "counterexample.csv").string());

  json jf = json::array();
  if (!fits.empty()) {
    CsvTable ft({"quantity", "model", "exponent", "log_power", "reference_exponent",
                 "reference_log_power", "exponent_error"});
    for (const auto& f : fits) {
      ft.add_row({f.quantity, f.fit.model, f.fit.exponent, f.fit.log_power,
                  f.has_reference ? f.reference_exponent : NAN,
                  f.has_reference ? f.reference_log_power : NAN,
                  f.has_reference ? f.exponent_error : NAN});
      json e = {{"quantity", f.quantity}, {"fit", model_json(f.fit)}};
      if (f.has_reference) {
        e["reference_exponent"] = f.reference_exponent;
        e["reference_log_power"] = f.reference_log_power;
        e["exponent_error"] = num(f.exponent_error);
      }
      jf.push_back(e);
    }
    ft.write(dir / "counterexample_fits.csv", prov);
    res.files.push_back((dir / "counterexample_fits.csv").string());
  }

  std::vector<double> ratio;
  for (const auto& r : runs) ratio.push_back(r.norms.deficit_dual / r.zeta_of_rho);
  json body = {{"n", n}, {"fits", jf}, {"config", config_json(cfg)}};
  if (runs.size() >= 2) {
    auto g = fit_power_law(Rs, ratio);
    body["deficit_over_zeta_growth"] = model_json(g);
    if (g.exponent > kBoundedGrowthExponent)
      fail_check(res, "deficit/zeta grows like R^" + format_number(g.exponent));
  }
  write_manifest(dir / "counterexample.json", prov, body);
  res.files.push_back((dir / "counterexample.json").string());

  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    if (i > 0 && !(r.norms.grad_rho < runs[i - 1].norms.grad_rho))
      fail_check(res, "grad rho does not decrease at R=" + format_number(r.R));
    if (r.fitted_distance < kDistanceFraction * r.norms.grad_rho)
      fail_check(res, "fitted distance below half of grad rho at R=" + format_number(r.R));
  }
  return res;
}

CommandResult cmd_stability(const ExperimentConfig& cfg, const std::string& command_line) {
  PerturbationConfig pc;
  if (cfg.resolution > 0) {
    if (cfg.nu == 1) pc.radial_cells = cfg.resolution;
    else {
      pc.ns = cfg.resolution;
      pc.nr = cfg.resolution * 3 / 4;
    }
  }
  std::vector<PerturbationExperiment> exps(cfg.dims.size());
  parallel_for(cfg.dims.size(), cfg.threads, [&](std::size_t i) {
    exps[i] = perturbation_experiment(cfg.dims[i], cfg.nu, cfg.t, pc);
  });

  CommandResult res;
  CsvTable table({"n", "nu", "R_or_t", "distance", "deficit_h", "deficit_dual", "ratio",
                  "max_interaction_ratio"});
  json per_n = json::array();
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const auto& e = exps[i];
    for (const auto& r : e.rows)
      table.add_row({static_cast<long long>(r.n), static_cast<long long>(r.nu), r.t, r.distance,
                     r.deficit_h, r.deficit_dual, r.ratio, r.max_interaction_ratio});
    per_n.push_back({{"n", cfg.dims[i]},
                     {"R", num(e.R)},
                     {"psi_eigenvalue", e.psi_eigenvalue},
                     {"interaction_deficit", e.interaction_deficit},
                     {"margin_met", e.margin_met},
                     {"spread", e.spread}});
    if (!(e.spread <= kStabilitySpread))
      fail_check(res, "n=" + std::to_string(cfg.dims[i]) + ": ratio spread " +
                          format_number(e.spread));
  }
  std::vector<std::pair<std::string, std::string>> grid;
  if (cfg.nu == 1)
    grid = {{"kind", "radial"}, {"cells", std::to_string(pc.radial_cells)}};
  else
    grid = {{"kind", "axisymmetric"},
            {"ns", std::to_string(pc.ns)},
            {"nr", std::to_string(pc.nr)},
            {"foci", "-R;R, R per dimension in the manifest"}};
  fs::path dir = prepare_out(cfg);
  Provenance prov = provenance(cfg, command_line, grid);
  table.write(dir / "stability.csv", prov);
  res.files.push_back((dir / "stability.csv").string());
  write_manifest(dir / "stability.json", prov,
                 {{"nu", cfg.nu}, {"experiments", per_n}, {"config", config_json(cfg)}});
  res.files.push_back((dir / "stability.json").string());
  return res;
}

CommandResult cmd_flow(const ExperimentConfig& cfg, const std::string& command_line) {
  RadialGridSpec rs;
  rs.n = cfg.n;
  rs.cells = cfg.resolution > 0 ? cfg.resolution : 2000;
  if (cfg.r_max > 0) rs.r_max = cfg.r_max;
  auto grid = make_radial_grid(rs);
  GridFunction w0 = sample_bubble(grid, make_params(cfg.n, cfg.lambda), BubbleComponent::Value);
  w0.values += cfg.amplitude * radial_mode(grid, cfg.lambda, 2).values;
  FlowOptions fo;
  fo.ds = cfg.ds;
  fo.s_max = cfg.s_max;
  FlowRun run = run_to_convergence(make_state(w0), fo);

  CommandResult res;
  fs::path dir = prepare_out(cfg);
  Provenance prov = provenance(cfg, command_line, grid->metadata());
  CsvTable table({"s", "J", "deficit", "mass_2star", "distance_to_fitted_bubble"});
  for (const auto& tp : run.trajectory)
    table.add_row({tp.s, tp.J, tp.deficit, tp.mass_2star, tp.distance >= 0 ? tp.distance : NAN});
  table.write(dir / "trajectory.csv", prov);
  res.files.push_back((dir / "trajectory.csv").string());
  write_manifest(dir / "flow.json", prov,
                 {{"n", cfg.n},
                  {"outcome", to_string(run.outcome)},
                  {"amplitude", run.amplitude},
                  {"shots", run.shots},
                  {"J_ref", run.J_ref},
                  {"J_exact", run.J_exact},
                  {"J_grid_bubble", run.J_grid_bubble},
                  {"lambda_limit", run.lambda_limit},
                  {"J_monotone", run.J_monotone},
                  {"min_excess", run.min_excess},
                  {"energy_identity_error", run.energy_identity_error},
                  {"dissipation_rate", rate_json(run.dissipation_rate)},
                  {"J_rate", rate_json(run.J_rate)},
                  {"distance_rate", rate_json(run.distance_rate)},
                  {"steps", run.trajectory.size()},
                  {"config", config_json(cfg)}});
  res.files.push_back((dir / "flow.json").string());

  if (run.outcome != FlowOutcome::Converged)
    fail_check(res, "trajectory ended as " + to_string(run.outcome));
  if (!run.J_monotone) fail_check(res, "J is not strictly decreasing");
  if (!(run.J_rate.rate > 0.0)) fail_check(res, "no positive exponential rate for J");
  return res;
}

namespace {

void diagnostic(std::ostream& err, const std::string& kind, const std::string& command,
                const std::string& message) {
  err << json{{"error", kind}, {"command", command}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Experiment runner for critical Sobolev stability studies", "critlab_cli"};
  app.set_version_flag("--version", std::string(CRITLAB_VERSION));
  app.require_subcommand(1);

  struct Flags {
    std::string config, n, R, resolution, out, threads;
    std::vector<std::string> sets;
    bool check = false;
  };
  Flags flags;
  const std::pair<const char*, const char*> subcommands[] = {
      {"spectrum", "linearized spectrum at one or two bubbles"},
      {"interaction", "bubble interaction integrals against separation"},
      {"counterexample", "two-bubble corrected profile sweep"},
      {"stability", "deficit versus distance for perturbed bubbles"},
      {"flow", "rescaled fast diffusion flow from a perturbed bubble"}};
  for (const auto& [name, about] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", flags.config, "key = value file");
    sub->add_option("--n", flags.n, "dimension");
    sub->add_option("--R", flags.R, "comma-separated separations");
    sub->add_option("--resolution", flags.resolution, "grid cells");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--threads", flags.threads, "worker threads");
    sub->add_option("--set", flags.sets, "extra key=value override")->take_all();
    sub->add_flag("--check", flags.check, "exit 4 when the experiment's checks fail");
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  std::string command_line;
  for (std::size_t i = 0; i < args.size(); ++i) command_line += (i ? " " : "") + args[i];

  ExperimentConfig cfg;
  Command cmd;
  try {
    cmd = parse_command(name);
    if (!flags.config.empty()) load_config_file(cfg, flags.config);
    for (const auto& kv : flags.sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!flags.n.empty()) set_key(cfg, "n", flags.n);
    if (!flags.R.empty()) set_key(cfg, "R", flags.R);
    if (!flags.resolution.empty()) set_key(cfg, "resolution", flags.resolution);
    if (!flags.out.empty()) set_key(cfg, "out", flags.out);
    if (!flags.threads.empty()) set_key(cfg, "threads", flags.threads);
    if (flags.check) cfg.check = true;
    cfg.apply_defaults(cmd);
    cfg.validate(cmd);
  } catch (const std::exception& e) {
    diagnostic(err, "validation", name, e.what());
    return kValidation;
  }

  CommandResult res;
  try {
    switch (cmd) {
      case Command::Spectrum: res = cmd_spectrum(cfg, command_line); break;
      case Command::Interaction: res = cmd_interaction(cfg, command_line); break;
      case Command::Counterexample: res = cmd_counterexample(cfg, command_line); break;
      case Command::Stability: res = cmd_stability(cfg, command_line); break;
      case Command::Flow: res = cmd_flow(cfg, command_line); break;
    }
  } catch (const InvalidParameter& e) {
    diagnostic(err, "validation", name, e.what());
    return kValidation;
  } catch (const std::exception& e) {
    diagnostic(err, "solver_failure", name, e.what());
    return kSolverFailure;
  }

  for (const auto& f : res.files) out << f << "\n";
  if (cfg.check) {
    for (const auto& m : res.check_messages) err << "check: " << m << "\n";
    if (!res.check_passed) {
      diagnostic(err, "check_failure", name, std::to_string(res.check_messages.size()) +
                                                 " check(s) failed");
      return kCheckFailure;
    }
  }
  return kSuccess;
}

}  // namespace critlab::cli
