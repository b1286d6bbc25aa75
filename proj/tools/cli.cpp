#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cnhpp/error.hpp"
#include "cnhpp/estimation.hpp"
#include "cnhpp/ingest.hpp"
#include "cnhpp/simulate.hpp"
#include "cnhpp/timing.hpp"
#include "cnhpp/validation.hpp"
#include "json_config.hpp"

namespace cnhpp::cli {

namespace fs = std::filesystem;

namespace {

struct NeighborFlags {
  bool include_self = true;
  std::string scheme = "equal";
  bool renormalize = false;
  double snap_tolerance = 1e-6;

  NeighborConfig config() const {
    NeighborConfig cfg;
    cfg.include_self = include_self;
    cfg.scheme = weight_scheme_from_string(scheme);
    cfg.renormalize = renormalize;
    cfg.snap_tolerance = snap_tolerance;
    cfg.validate();
    return cfg;
  }
};

nlohmann::json neighbors_to_json(const NeighborConfig& cfg) {
  return {{"include_self", cfg.include_self},
          {"weight_scheme", to_string(cfg.scheme)},
          {"renormalize", cfg.renormalize},
          {"snap_tolerance", cfg.snap_tolerance}};
}

NeighborConfig neighbors_from_json(const nlohmann::json& j) {
  NeighborConfig cfg;
  cfg.include_self = j.value("include_self", cfg.include_self);
  cfg.scheme = weight_scheme_from_string(j.value("weight_scheme", std::string("equal")));
  cfg.renormalize = j.value("renormalize", cfg.renormalize);
  cfg.snap_tolerance = j.value("snap_tolerance", cfg.snap_tolerance);
  cfg.validate();
  return cfg;
}

void add_neighbor_flags(CLI::App* cmd, NeighborFlags& f) {
  cmd->add_flag("--include-self,!--exclude-self", f.include_self, "Count a segment among its own neighbors")
      ->capture_default_str();
  cmd->add_option("--weight-scheme", f.scheme, "Neighbor weights")
      ->check(CLI::IsMember({"equal", "exponential"}))
      ->capture_default_str();
  cmd->add_flag("--renormalize", f.renormalize, "Rescale exponential weights to sum to one per segment");
  cmd->add_option("--snap-tolerance", f.snap_tolerance, "Endpoint snapping distance")->capture_default_str();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("--xi-grid: '" + item + "' is not a number");
    }
  }
  if (grid.empty()) throw InputError("--xi-grid is empty");
  return grid;
}

std::string format_grid(const std::vector<double>& grid) {
  std::ostringstream out;
  for (std::size_t k = 0; k < grid.size(); ++k) out << (k ? "," : "") << grid[k];
  return out.str();
}

void require_file(const std::string& flag, const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError(flag + ": file not found: " + path);
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream out(dir / name);
  if (!out) throw InputError("cannot write " + (dir / name).string());
  return out;
}

void make_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("--out: cannot create directory " + dir.string());
}

int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// fit ---------------------------------------------------------------------

struct FitOptions {
  std::string network, adjacency, panel, events, out;
  std::string xi_grid = format_grid(default_xi_grid());
  int K = 7;
  std::string mode = "truncated";
  bool baselines = false;
  bool standardize = true;
  int threads = default_threads();
  int max_iterations = 500;
  double grad_tolerance = 1e-8;
  NeighborFlags neighbors;
};

void write_profile_csv(std::ostream& out, const FitResult& fit) {
  out << std::setprecision(17) << "xi,loglik,converged,status,iterations,gradient_norm";
  const auto q = fit.params_hat.beta.size();
  for (Eigen::Index j = 0; j < q; ++j) out << ",beta_" << j;
  out << '\n';
  for (const auto& p : fit.profile) {
    out << p.xi << ',' << p.loglik << ',' << (p.converged ? 1 : 0) << ',' << p.status << ',' << p.iterations
        << ',' << p.gradient_norm;
    for (Eigen::Index j = 0; j < q; ++j) {
      out << ',';
      if (j < p.beta.size()) out << p.beta(j);
    }
    out << '\n';
  }
}

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  require_file("--network", o.network);
  require_file("--panel", o.panel);
  require_file("--events", o.events);
  if (!o.adjacency.empty()) require_file("--adjacency", o.adjacency);

  const NeighborConfig ncfg = o.neighbors.config();
  SolverConfig cfg;
  cfg.xi_grid = parse_grid(o.xi_grid);
  cfg.K = o.K;
  cfg.mode = history_mode_from_string(o.mode);
  cfg.threads = o.threads;
  cfg.max_iterations = o.max_iterations;
  cfg.grad_tolerance = o.grad_tolerance;
  cfg.validate();

  const LinearNetwork net =
      load_network(o.network, ncfg, o.adjacency.empty() ? std::nullopt : std::optional<fs::path>(o.adjacency));
  const WeightMatrix w = build_weights(net, ncfg);
  CovariatePanel panel = load_panel(o.panel, net.size());
  std::optional<StandardizationStats> stats;
  if (o.standardize) {
    auto [z, s] = standardize(panel);
    panel = std::move(z);
    stats = std::move(s);
  }
  const EventLog events = load_events(o.events, net.size(), panel.window_steps());
  make_output_dir(o.out);

  const FitResult fit = fit_cnhpp(panel, events, w, cfg);
  bool converged = fit.converged();

  nlohmann::json j = to_json(fit);
  j["n_segments"] = net.size();
  j["window_steps"] = panel.window_steps();
  j["n_events"] = events.size();
  j["neighbors"] = neighbors_to_json(ncfg);
  j["standardization"] = stats ? stats->to_json() : nlohmann::json(nullptr);
  open_output(o.out, "fit.json") << std::setw(2) << j << '\n';
  {
    auto f = open_output(o.out, "profile.csv");
    write_profile_csv(f, fit);
  }

  std::vector<ComparisonColumn> columns;
  if (o.baselines) {
    const double rate = fit_hpp(events, net.size(), panel.window_steps());
    columns.push_back(hpp_column("HPP", rate, hpp_log_likelihood(rate, events.size(), net.size(), panel.window_steps())));
    const FitResult nhpp = fit_nhpp(panel, events, cfg);
    converged = converged && nhpp.converged();
    columns.push_back(fit_column("NHPP", nhpp, false));
  }
  columns.push_back(fit_column("cNHPP", fit, true));
  const ComparisonTable table = model_comparison(columns);
  open_output(o.out, "comparison.txt") << table.to_text();
  open_output(o.out, "comparison.csv") << table.to_csv();

  const PercentileReport report = percentile_rank(predict_intensity(fit, panel, w), events);
  {
    auto f = open_output(o.out, "percentiles.csv");
    write_percentile_csv(f, report);
  }

  out << table.to_text();
  if (!report.records.empty()) {
    out << "event percentiles: median " << report.quantiles(2) << ", mean " << report.mean << '\n';
  }
  if (!converged) {
    for (const auto& p : fit.profile) {
      if (!p.converged) err << "warning: xi=" << p.xi << " did not converge (" << p.status << ")\n";
    }
    err << "error: the fit did not converge at every grid point\n";
    return kNotConverged;
  }
  return kOk;
}

// simulate ----------------------------------------------------------------

struct SimulateOptions {
  std::string topology = "chain";
  Index n = 50;
  int T = 50;
  int burn_in = 7;
  int K = 7;
  double xi = 0.5;
  std::vector<double> beta{-6.0, -1.2, 0.7, 0.9, -0.7};
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  double rho = 0.5;
  double noise_scale = 1.0;
  std::string mode = "truncated";
  std::string out;
  NeighborFlags neighbors;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  ScenarioConfig cfg;
  cfg.topology = topology_from_string(o.topology);
  cfg.n_segments = o.n;
  cfg.horizon = o.T;
  cfg.burn_in = o.burn_in;
  cfg.K = o.K;
  cfg.q = static_cast<int>(o.beta.size()) - 1;
  cfg.rho = o.rho;
  cfg.noise_scale = o.noise_scale;
  cfg.truth.xi = o.xi;
  cfg.truth.beta = Eigen::Map<const Eigen::VectorXd>(o.beta.data(), static_cast<Eigen::Index>(o.beta.size()));
  cfg.seed = o.seed;
  cfg.neighbors = o.neighbors.config();
  cfg.mode = history_mode_from_string(o.mode);
  cfg.validate();

  const Scenario s = simulate_scenario(cfg, o.replicate);
  make_output_dir(o.out);
  {
    auto f = open_output(o.out, "network.csv");
    write_segments_csv(f, s.network);
  }
  {
    auto f = open_output(o.out, "adjacency.csv");
    write_adjacency_csv(f, s.network);
  }
  {
    auto f = open_output(o.out, "panel.csv");
    write_panel_csv(f, s.panel);
  }
  {
    auto f = open_output(o.out, "events.csv");
    write_events_csv(f, s.events);
  }
  const nlohmann::json truth = {{"xi", o.xi},
                                {"beta", o.beta},
                                {"K", o.K},
                                {"history_mode", o.mode},
                                {"topology", to_string(cfg.topology)},
                                {"n_segments", o.n},
                                {"window_steps", o.T},
                                {"burn_in", o.burn_in},
                                {"rho", o.rho},
                                {"noise_scale", o.noise_scale},
                                {"seed", o.seed},
                                {"replicate", o.replicate},
                                {"n_events", s.events.size()},
                                {"neighbors", neighbors_to_json(cfg.neighbors)}};
  open_output(o.out, "truth.json") << std::setw(2) << truth << '\n';
  out << "simulated " << s.events.size() << " events on " << s.network.size() << " segments over " << o.T
      << " steps -> " << o.out << '\n';
  return kOk;
}

// predict -----------------------------------------------------------------

struct PredictOptions {
  std::string fit, network, adjacency, panel, out;
  int steps = 1;
  std::optional<int> density_step;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  require_file("--fit", o.fit);
  require_file("--network", o.network);
  require_file("--panel", o.panel);
  if (!o.adjacency.empty()) require_file("--adjacency", o.adjacency);
  if (o.steps < 1) throw InputError("--steps must be at least 1");

  nlohmann::json j;
  {
    std::ifstream in(o.fit);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(o.fit + ": invalid JSON: " + e.what());
    }
  }
  const FitResult fit = fit_from_json(j);
  NeighborConfig ncfg;
  try {
    if (j.contains("neighbors")) ncfg = neighbors_from_json(j.at("neighbors"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(o.fit + ": malformed neighbors: " + e.what());
  }

  const LinearNetwork net =
      load_network(o.network, ncfg, o.adjacency.empty() ? std::nullopt : std::optional<fs::path>(o.adjacency));
  if (j.contains("n_segments") && j.at("n_segments").get<Index>() != net.size()) {
    throw InputError("the fit was made on " + j.at("n_segments").dump() + " segments but " + o.network + " has " +
                     std::to_string(net.size()));
  }
  const WeightMatrix w = build_weights(net, ncfg);
  CovariatePanel panel = load_panel(o.panel, net.size());
  if (j.contains("standardization") && !j.at("standardization").is_null()) {
    panel = apply_standardization(panel, StandardizationStats::from_json(j.at("standardization")));
  }
  if (o.steps > panel.window_steps()) {
    throw InputError("--steps " + std::to_string(o.steps) + " exceeds the " + std::to_string(panel.window_steps()) +
                     " steps (t >= 0) present in " + o.panel);
  }
  if (panel.burn_in() < fit.K) {
    throw InputError(o.panel + ": prediction needs covariate history at steps " + std::to_string(-fit.K) +
                     "..-1 but the panel starts at step " + std::to_string(-panel.burn_in()));
  }

  const IntensityField full = predict_intensity(fit, panel, w);
  const IntensityField field{0, full.log_lambda.topRows(o.steps)};
  make_output_dir(o.out);
  {
    auto f = open_output(o.out, "intensity.csv");
    write_intensity_csv(f, field);
  }
  if (o.density_step) {
    auto f = open_output(o.out, "density.csv");
    export_density(f, field, *o.density_step);
  }
  out << "predicted " << o.steps << " step(s) on " << net.size() << " segments -> " << o.out << '\n';
  return kOk;
}

// bench -------------------------------------------------------------------

struct BenchOptions {
  BenchConfig cfg;
  std::string out;
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  o.cfg.validate();
  make_output_dir(o.out);
  const auto rows = compare_evaluation_cost(o.cfg);
  {
    auto f = open_output(o.out, "timing.csv");
    write_timing_csv(f, rows);
  }
  open_output(o.out, "timing.json") << std::setw(2) << to_json(rows) << '\n';
  out << " K   series[s]  recurrence[s]   ratio\n";
  for (const auto& r : rows) {
    char line[96];
    std::snprintf(line, sizeof line, "%2d  %10.5f  %13.5f  %6.2f\n", r.K, r.series_seconds, r.recurrence_seconds,
                  r.ratio);
    out << line;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convolutional Poisson intensity models on linear networks", "cnhpp"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values, one object per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "Fit the model by profile likelihood over a decay grid");
  fit->add_option("--network", fo.network, "Segment file (CSV or JSON)")->required();
  fit->add_option("--adjacency", fo.adjacency, "Explicit adjacency CSV overriding snapping");
  fit->add_option("--panel", fo.panel, "Covariate panel CSV")->required();
  fit->add_option("--events", fo.events, "Events CSV")->required();
  fit->add_option("--xi-grid", fo.xi_grid, "Comma-separated decay values")->capture_default_str();
  fit->add_option("--K", fo.K, "Truncation of the history series")->check(CLI::NonNegativeNumber)->capture_default_str();
  fit->add_option("--mode", fo.mode, "History handling")
      ->check(CLI::IsMember({"truncated", "recurrent"}))
      ->capture_default_str();
  fit->add_flag("--baselines", fo.baselines, "Also fit HPP and NHPP and tabulate them");
  fit->add_flag("--standardize,!--no-standardize", fo.standardize, "Z-score covariates before fitting")
      ->capture_default_str();
  fit->add_option("--threads", fo.threads, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_option("--max-iterations", fo.max_iterations, "Quasi-Newton iteration cap")->capture_default_str();
  fit->add_option("--grad-tolerance", fo.grad_tolerance, "Score sup-norm tolerance")->capture_default_str();
  add_neighbor_flags(fit, fo.neighbors);
  fit->add_option("--out", fo.out, "Output directory")->required();

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario bundle from planted parameters");
  sim->add_option("--topology", so.topology, "Network shape")
      ->check(CLI::IsMember({"chain", "tree", "binary_tree", "lattice"}))
      ->capture_default_str();
  sim->add_option("--n", so.n, "Number of segments")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--T", so.T, "Window steps")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--burn-in", so.burn_in, "History steps before the window")->capture_default_str();
  sim->add_option("--K", so.K, "Truncation of the history series")->capture_default_str();
  sim->add_option("--xi", so.xi, "Planted decay")->capture_default_str();
  sim->add_option("--beta", so.beta, "Planted coefficients, intercept first")->delimiter(',')->capture_default_str();
  sim->add_option("--seed", so.seed, "Master seed")->capture_default_str();
  sim->add_option("--replicate", so.replicate, "Replicate index (selects random substreams)");
  sim->add_option("--rho", so.rho, "AR(1) coefficient of the covariates")->capture_default_str();
  sim->add_option("--noise-scale", so.noise_scale, "Innovation scale of the covariates")->capture_default_str();
  sim->add_option("--mode", so.mode, "History handling")
      ->check(CLI::IsMember({"truncated", "recurrent"}))
      ->capture_default_str();
  add_neighbor_flags(sim, so.neighbors);
  sim->add_option("--out", so.out, "Output directory")->required();

  PredictOptions po;
  auto* pred = app.add_subcommand("predict", "Intensities for a covariate panel under a saved fit");
  pred->add_option("--fit", po.fit, "fit.json written by 'fit'")->required();
  pred->add_option("--network", po.network, "Segment file the fit was made on")->required();
  pred->add_option("--adjacency", po.adjacency, "Explicit adjacency CSV");
  pred->add_option("--panel", po.panel, "Covariate panel with K history steps before t=0")->required();
  pred->add_option("--steps", po.steps, "Number of steps to predict from t=0")->capture_default_str();
  pred->add_option("--density-step", po.density_step, "Also export lambda at this step to density.csv");
  pred->add_option("--out", po.out, "Output directory")->required();

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Time the series and recurrence evaluation routes");
  bench->add_option("--n", bo.cfg.n_segments, "Number of segments")->capture_default_str();
  bench->add_option("--T", bo.cfg.window_steps, "Window steps")->capture_default_str();
  bench->add_option("--K-min", bo.cfg.K_min, "Smallest truncation")->capture_default_str();
  bench->add_option("--K-max", bo.cfg.K_max, "Largest truncation")->capture_default_str();
  bench->add_option("--q", bo.cfg.q, "Covariates besides the intercept")->capture_default_str();
  bench->add_option("--repeats", bo.cfg.repeats, "Timed repeats (best is kept)")->capture_default_str();
  bench->add_option("--seed", bo.cfg.seed, "Seed of the synthetic covariates")->capture_default_str();
  bench->add_option("--out", bo.out, "Output directory")->required();

  // CLI11 consumes a reversed argument list without the program name
  std::vector<std::string> reversed(args.empty() ? args.end() : args.begin() + 1, args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (fit->parsed()) return cmd_fit(fo, out, err);
    if (sim->parsed()) return cmd_simulate(so, out);
    if (pred->parsed()) return cmd_predict(po, out);
    if (bench->parsed()) return cmd_bench(bo, out);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace cnhpp::cli
