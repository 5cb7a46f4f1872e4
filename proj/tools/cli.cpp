#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wmcm/baselines.hpp"
#include "wmcm/error.hpp"
#include "wmcm/io.hpp"
#include "wmcm/model_selection.hpp"
#include "wmcm/parallel.hpp"
#include "wmcm/simulation.hpp"
#include "wmcm/solver.hpp"

namespace wmcm::cli {
namespace {

struct DataArgs {
  std::string covariates;
  std::string outcomes;
  std::string treatment_column = "treatment";
  std::string coding = "pm1";
  bool no_intercept = false;
  bool standardize = false;
  std::vector<std::string> covariate_columns;
  std::vector<std::string> outcome_columns;
  std::string propensity = "rct";
  std::string propensity_column;
};

struct SolverArgs {
  double tol = 1e-6;
  double inner_tol = 1e-8;
  int max_iter = 500;
  int max_inner = 100;
  std::uint64_t seed = 0;
  std::string init = "weighted_ls";
};

void add_data_options(CLI::App* app, DataArgs& a) {
  app->add_option("--covariates", a.covariates, "covariate CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--outcomes", a.outcomes, "outcome CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--treatment-column", a.treatment_column, "treatment column name")
      ->capture_default_str();
  app->add_option("--coding", a.coding, "treatment coding")
      ->check(CLI::IsMember({"pm1", "01"}))
      ->capture_default_str();
  app->add_flag("--no-intercept", a.no_intercept, "do not prepend an intercept column");
  app->add_flag("--standardize", a.standardize, "center and scale covariates");
  app->add_option("--covariate-columns", a.covariate_columns, "subset of covariate columns")
      ->delimiter(',');
  app->add_option("--outcome-columns", a.outcome_columns, "subset of outcome columns")
      ->delimiter(',');
  app->add_option("--propensity", a.propensity, "propensity source")
      ->check(CLI::IsMember({"rct", "known", "logistic"}))
      ->capture_default_str();
  app->add_option("--propensity-column", a.propensity_column,
                  "column holding known propensities");
}

void add_solver_options(CLI::App* app, SolverArgs& s) {
  app->add_option("--tol", s.tol, "relative outer tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--inner-tol", s.inner_tol)->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--max-iter", s.max_iter, "outer iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--max-inner", s.max_inner)->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--seed", s.seed)->capture_default_str();
  app->add_option("--init", s.init)
      ->check(CLI::IsMember({"weighted_ls", "random"}))
      ->capture_default_str();
}

FitConfig solver_config(const SolverArgs& s) {
  FitConfig cfg;
  cfg.outer_tol = s.tol;
  cfg.inner_tol = s.inner_tol;
  cfg.max_outer = s.max_iter;
  cfg.max_inner = s.max_inner;
  cfg.seed = s.seed;
  cfg.init = s.init == "random" ? Initialization::random : Initialization::weighted_ls;
  return cfg;
}

io::LoadedDataset load(const DataArgs& a) {
  io::CsvDatasetOptions o;
  o.covariates_path = a.covariates;
  o.outcomes_path = a.outcomes;
  o.treatment_column = a.treatment_column;
  o.coding = a.coding == "01" ? TreatmentCoding::zero_one : TreatmentCoding::plus_minus_one;
  o.add_intercept = !a.no_intercept;
  o.standardize = a.standardize;
  o.covariate_columns = a.covariate_columns;
  o.outcome_columns = a.outcome_columns;
  if (a.propensity == "known") {
    if (a.propensity_column.empty()) {
      throw InvalidArgument("--propensity known requires --propensity-column");
    }
    o.propensity_column = a.propensity_column;
  }
  return io::load_csv_dataset(o);
}

io::ModelArtifact artifact_for(const io::LoadedDataset& data, const FactorModel& model,
                               const FitConfig& cfg, PropensitySource source,
                               const std::vector<double>& trace, bool converged,
                               int outer_iters) {
  io::ModelArtifact art;
  art.model = model;
  art.config = cfg;
  art.propensity = source;
  art.objective_trace = trace;
  art.converged = converged;
  art.outer_iters = outer_iters;
  art.covariate_names = data.covariate_names;
  art.outcome_names = data.outcome_names;
  art.standardized = data.standardized;
  art.center = data.center;
  art.scale = data.scale;
  return art;
}

std::string describe(const FactorModel& m) {
  Eigen::Index active = 0, outliers = 0;
  for (Eigen::Index j = 0; j < m.w.rows(); ++j) active += (m.w.row(j).array() != 0.0).any();
  for (Eigen::Index i = 0; i < m.c.rows(); ++i) outliers += (m.c.row(i).array() != 0.0).any();
  std::ostringstream os;
  os << "rank=" << m.rank() << " active_covariates=" << active
     << " outlier_rows=" << outliers;
  return os.str();
}

unsigned thread_count(unsigned requested) {
  unsigned threads = resolve_threads(requested);
  if (const char* env = std::getenv("WMCM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw InvalidArgument("WMCM_THREADS must be a positive integer");
    }
    threads = std::min(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

struct Runner {
  Runner(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;

  DataArgs data;
  SolverArgs solver;

  // fit
  int rank = 1;
  double lambda = 0.0;
  double phi = 0.0;
  int restarts = 0;  // extra random-initialization fits
  std::string model_out;
  std::string diagram;

  // cv
  std::string method = "wmcmr4";
  std::vector<double> lambdas, phis;
  std::vector<int> ranks;
  int folds = 5;
  std::string surface;
  unsigned threads = 0;

  // simulate
  std::string config;
  std::vector<std::string> methods{"wmcmr4", "wmcmrrr", "wmcm_l1", "wmcm", "wfull"};
  int replications = 0;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  bool no_cv = false;
  std::string table_out;

  // report
  std::string report_in;

  void fit_command() {
    const io::LoadedDataset loaded = load(data);
    const PropensitySource source = propensity_source_from_string(data.propensity);
    const WeightVector a = weights_for(loaded.data, source);
    FitConfig cfg = solver_config(solver);
    cfg.rank = rank;
    cfg.lambda_w = lambda;
    cfg.phi_c = phi;
    const FitResult res =
        fit_with_restarts(loaded.data, a, cfg, restarts);
    const auto art = artifact_for(loaded, res.model, cfg, source, res.trace.objective,
                                  res.trace.converged, res.trace.outer_iters);
    io::save_model(art, model_out);
    if (!diagram.empty()) {
      io::export_path_diagram(res.model, loaded.covariate_names, loaded.outcome_names, diagram);
    }
    out << "fit: n=" << loaded.data.n() << " q=" << loaded.data.outcomes() << ' '
        << describe(res.model) << " objective=" << io::format_double(res.trace.objective.back())
        << " outer_iters=" << res.trace.outer_iters
        << " converged=" << (res.trace.converged ? "true" : "false") << '\n';
  }

  void cv_command() {
    const Method m = method_from_string(method);
    if (!model_out.empty() && !(m == Method::wmcmr4 || m == Method::wmcmrrr)) {
      throw InvalidArgument("--out needs a factor method (wmcmr4 or wmcmrrr)");
    }
    const io::LoadedDataset loaded = load(data);
    const PropensitySource source = propensity_source_from_string(data.propensity);
    const WeightVector a = weights_for(loaded.data, source);

    CvGrid grid;
    grid.lambdas = lambdas;
    grid.phis = phis;
    grid.ranks = ranks;
    grid.folds = folds;
    grid.seed = solver.seed;
    if (grid.lambdas.empty() || grid.phis.empty() || grid.ranks.empty()) {
      const CvGrid def = default_grid(loaded.data, a, folds, solver.seed);
      if (grid.lambdas.empty()) grid.lambdas = def.lambdas;
      if (grid.phis.empty()) grid.phis = def.phis;
      if (grid.ranks.empty()) grid.ranks = def.ranks;
    }
    CvOptions opts;
    opts.propensity = source;
    opts.fit = solver_config(solver);
    opts.threads = thread_count(threads);
    const CvResult res = cross_validate(loaded.data, grid, m, opts);
    if (!surface.empty()) io::write_csv_file(surface, io::cv_surface_table(res));

    out << "cv: method=" << to_string(m) << " best_lambda=" << io::format_double(res.best.lambda)
        << " best_phi=" << io::format_double(res.best.phi) << " best_rank=" << res.best.rank
        << '\n';

    if (!model_out.empty()) {
      FitConfig cfg = solver_config(solver);
      cfg.rank = res.best.rank;
      cfg.lambda_w = res.best.lambda;
      cfg.phi_c = m == Method::wmcmrrr ? std::numeric_limits<double>::infinity() : res.best.phi;
      const BaselineModel b =
          fit_method(m, loaded.data, a, {res.best.rank, res.best.lambda, res.best.phi}, cfg);
      const auto art = artifact_for(loaded, *b.factors, cfg, source, b.trace, b.converged,
                                    static_cast<int>(b.trace.size()) - 1);
      io::save_model(art, model_out);
      if (!diagram.empty()) {
        io::export_path_diagram(*b.factors, loaded.covariate_names, loaded.outcome_names,
                                diagram);
      }
    }
  }

  void simulate_command() {
    std::vector<ScenarioSpec> specs = io::load_scenarios(config);
    std::vector<Method> ms;
    for (const auto& name : methods) ms.push_back(method_from_string(name));
    if (ms.empty()) throw InvalidArgument("--methods is empty");

    SweepOptions opts;
    opts.cross_validate = !no_cv;
    opts.grid.lambdas = lambdas;
    opts.grid.phis = phis;
    opts.grid.ranks = ranks;
    opts.grid.folds = folds;
    opts.fixed = {rank, lambda, phi};
    opts.fit = solver_config(solver);
    opts.threads = thread_count(threads);

    std::vector<ReplicationRow> rows;
    for (auto& spec : specs) {
      if (replications > 0) spec.replications = replications;
      if (sim_seed_set) spec.seed = sim_seed;
      auto part = run_scenario(spec, ms, opts);
      std::size_t failures = 0;
      for (const auto& r : part) {
        if (r.metric == "error") {
          ++failures;
          err << "warning: replication " << r.replication << " " << r.method << ": "
              << r.message << '\n';
        }
      }
      out << "simulate: scenario=" << scenario_label(spec) << " replications="
          << spec.replications << " methods=" << ms.size() << " failures=" << failures << '\n';
      rows.insert(rows.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
    }
    io::write_csv_file(table_out, io::replication_table(rows));
  }

  void report_command() {
    const auto rows = io::parse_replication_table(io::read_csv(report_in));
    const io::CsvTable summary = io::summarize(rows);
    io::write_csv_file(table_out, summary);
    out << "report: groups=" << summary.rows.size() << '\n';
  }
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& what) {
  err << "error: " << kind << ": " << one_line(what) << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Runner r(out, err);
  CLI::App app{"Multi-outcome heterogeneous treatment effect estimation", "wmcm"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "fit the reduced-rank robust estimator");
  add_data_options(fit, r.data);
  add_solver_options(fit, r.solver);
  fit->add_option("--rank", r.rank)->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--lambda", r.lambda, "group penalty on rows of W")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit->add_option("--phi", r.phi, "group penalty on rows of C (inf disables C)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit->add_option("--restarts", r.restarts)->check(CLI::NonNegativeNumber)->capture_default_str();
  fit->add_option("--out", r.model_out, "model file")->required();
  fit->add_option("--diagram", r.diagram, "path diagram (DOT)");

  auto* cv = app.add_subcommand("cv", "cross-validate the tuning grid");
  add_data_options(cv, r.data);
  add_solver_options(cv, r.solver);
  cv->add_option("--method", r.method)->capture_default_str();
  cv->add_option("--lambdas", r.lambdas)->delimiter(',');
  cv->add_option("--phis", r.phis)->delimiter(',');
  cv->add_option("--ranks", r.ranks)->delimiter(',');
  cv->add_option("--folds", r.folds)->capture_default_str();
  cv->add_option("--surface", r.surface, "CV loss surface CSV");
  cv->add_option("--out", r.model_out, "best model file");
  cv->add_option("--diagram", r.diagram, "path diagram of the best model");
  cv->add_option("--threads", r.threads, "0 = hardware concurrency");

  auto* sim = app.add_subcommand("simulate", "run a simulation study");
  add_solver_options(sim, r.solver);
  sim->add_option("--config", r.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--methods", r.methods)->delimiter(',');
  sim->add_option("--replications", r.replications)->check(CLI::PositiveNumber);
  sim->add_option("--sim-seed", r.sim_seed, "master seed, overrides the config")
      ->each([&](const std::string&) { r.sim_seed_set = true; });
  sim->add_flag("--no-cv", r.no_cv, "use --rank/--lambda/--phi instead of CV");
  sim->add_option("--rank", r.rank)->check(CLI::PositiveNumber);
  sim->add_option("--lambda", r.lambda)->check(CLI::NonNegativeNumber);
  sim->add_option("--phi", r.phi)->check(CLI::NonNegativeNumber);
  sim->add_option("--lambdas", r.lambdas)->delimiter(',');
  sim->add_option("--phis", r.phis)->delimiter(',');
  sim->add_option("--ranks", r.ranks)->delimiter(',');
  sim->add_option("--folds", r.folds)->capture_default_str();
  sim->add_option("--threads", r.threads, "0 = hardware concurrency");
  sim->add_option("--out", r.table_out, "replication CSV")->required();

  auto* report = app.add_subcommand("report", "summarize a replication CSV");
  report->add_option("--in", r.report_in)->required()->check(CLI::ExistingFile);
  report->add_option("--out", r.table_out, "summary CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    return fail(err, usage, "usage", e.what());
  }

  try {
    if (fit->parsed()) r.fit_command();
    else if (cv->parsed()) r.cv_command();
    else if (sim->parsed()) r.simulate_command();
    else if (report->parsed()) r.report_command();
    return ok;
  } catch (const InvalidArgument& e) {
    return fail(err, usage, "usage", e.what());
  } catch (const DataError& e) {
    return fail(err, data, "data", e.what());
  } catch (const NumericalError& e) {
    return fail(err, numerical, "numerical", e.what());
  } catch (const Error& e) {
    return fail(err, data, "io", e.what());
  } catch (const std::exception& e) {
    return fail(err, numerical, "internal", e.what());
  }
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(argc, argv, std::cout, std::cerr);
}

}  // namespace wmcm::cli
