// survaudit: fits reference survival models, reduces distribution predictions
// to relative risks by every catalogued method, computes concordance measures,
// and emits an audit grid exposing how measure and reduction choices steer the
// reported "C-index".

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survaudit/survaudit.hpp"

namespace {

using namespace survaudit;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw validation_error("cannot parse number '" + tok + "' in list '" + s + "'");
    }
  }
  return out;
}

struct SchemaFlags {
  std::string time_col = "time";
  std::string status_col = "status";
  std::string drop_cols;

  CsvSchema schema() const { return {time_col, status_col, split_list(drop_cols)}; }
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& flags) {
  cmd->add_option("--time-col", flags.time_col, "Name of the observed-time column")
      ->capture_default_str();
  cmd->add_option("--status-col", flags.status_col, "Name of the event-indicator column (0/1)")
      ->capture_default_str();
  cmd->add_option("--drop-cols", flags.drop_cols, "Comma-separated columns to exclude from the covariates");
}

struct RsfFlags {
  std::size_t trees = 250;
  std::size_t mtry = 0;
  std::size_t min_node_size = 5;
  std::size_t threads = 1;
  bool no_bootstrap = false;

  RsfHyperparameters hp(std::uint64_t seed) const {
    RsfHyperparameters h;
    h.n_trees = trees;
    h.mtry = mtry;
    h.min_node_size = min_node_size;
    h.n_threads = threads;
    h.bootstrap = !no_bootstrap;
    h.seed = seed;
    return h;
  }
};

void add_rsf_flags(CLI::App* cmd, RsfFlags& flags) {
  cmd->add_option("--trees", flags.trees, "Number of survival trees")->capture_default_str();
  cmd->add_option("--mtry", flags.mtry, "Covariates tried per split (0 = ceil(sqrt(p)))")
      ->capture_default_str();
  cmd->add_option("--min-node-size", flags.min_node_size, "Minimal samples per node")
      ->capture_default_str();
  cmd->add_option("--threads", flags.threads, "Worker threads for tree growing")->capture_default_str();
  cmd->add_flag("--no-bootstrap", flags.no_bootstrap, "Grow every tree on the full sample");
}

struct SmoothCFlags {
  double sigma = 0.1;
  std::size_t steps = 2000;
  double lr = 1.0;

  SmoothCOptions opts() const { return {sigma, steps, lr, 1e-6}; }
};

void add_smoothc_flags(CLI::App* cmd, SmoothCFlags& flags) {
  cmd->add_option("--sigma", flags.sigma, "Sigmoid smoothing bandwidth")->capture_default_str();
  cmd->add_option("--steps", flags.steps, "Gradient-ascent steps")->capture_default_str();
  cmd->add_option("--lr", flags.lr, "Gradient-ascent learning rate")->capture_default_str();
}

int run_simulate(std::size_t n, const std::string& beta_list, double shape, double scale,
                 double censor_rate, std::uint64_t seed, const std::string& out) {
  const auto beta = parse_double_list(beta_list);
  const Dataset data = simulate_weibull_ph(n, beta, shape, scale, censor_rate, seed);
  save_csv(data, out);
  std::size_t events = data.n_events();
  std::printf("wrote %zu records (%zu events, %.1f%% censored) to %s\n", data.size(), events,
              100.0 * static_cast<double>(data.size() - events) / static_cast<double>(data.size()),
              out.c_str());
  return 0;
}

int run_fit(const std::string& data_path, const SchemaFlags& schema, const std::string& kind,
            std::uint64_t seed, const RsfFlags& rsf, const SmoothCFlags& sc, double tol, int max_iter,
            const std::string& out) {
  const Dataset data = load_csv(data_path, schema.schema());
  FittedModel model = [&]() -> FittedModel {
    if (kind == "cox") return FittedModel{cox_fit(data, {tol, max_iter, 50.0})};
    if (kind == "rsf") return FittedModel{rsf_fit(data, rsf.hp(seed))};
    if (kind == "smoothc") return FittedModel{smoothc_fit(data, sc.opts())};
    throw validation_error("unknown model kind '" + kind + "' (expected cox, rsf or smoothc)");
  }();
  save_model(model, out);
  std::printf("fitted %s on %zu records (%zu features); model written to %s\n", kind.c_str(), data.size(),
              data.n_features(), out.c_str());
  if (const auto* cox = std::get_if<CoxModel>(&model.model)) {
    for (const auto& w : cox->warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  return 0;
}

int run_evaluate(const std::string& data_path, const SchemaFlags& schema, const std::string& model_path,
                 const std::string& measure, const std::string& reduction_name,
                 std::optional<double> time_point, std::optional<double> delta, std::optional<double> tau,
                 std::optional<double> roc_time, const std::string& train_path,
                 const std::string& curves_out) {
  const Dataset data = load_csv(data_path, schema.schema());
  const FittedModel model = load_model(model_path);
  const OutcomeView outcomes = OutcomeView::from(data);

  if (!curves_out.empty()) {
    if (!model.predicts_distribution())
      throw validation_error("model kind '" + model.kind() +
                             "' does not return a distribution prediction; nothing to write");
    write_curve_matrix_csv(model.distribution(data), curves_out);
  }

  auto make_risks = [&]() -> RiskVector {
    if (reduction_name == "native") {
      if (!model.predicts_risk())
        throw validation_error("model kind '" + model.kind() +
                               "' does not return a native risk prediction; choose a distribution "
                               "reduction instead");
      return model.native_risk(data);
    }
    const auto method = reduction_from_string(reduction_name);
    if (!method)
      throw validation_error("unknown reduction '" + reduction_name +
                             "' (expected native, expected_mortality, prob_at_time, mean_naive, "
                             "mean_drop, mean_linear or median_drop)");
    if (!model.predicts_distribution())
      throw validation_error("model kind '" + model.kind() +
                             "' does not return a distribution prediction; only native risk measures "
                             "apply");
    ReductionSpec spec{*method, time_point, delta};
    return reduce(model.distribution(data), spec);
  };

  std::cout << concordance_csv_header() << "\n";
  if (measure == "harrell") {
    std::cout << harrell_c(make_risks(), outcomes).to_csv_row() << "\n";
  } else if (measure == "uno") {
    if (train_path.empty())
      throw validation_error("uno requires --train-data (censoring weights come from the training set)");
    const Dataset train = load_csv(train_path, schema.schema());
    std::cout << uno_c(make_risks(), outcomes, OutcomeView::from(train), tau).to_csv_row() << "\n";
  } else if (measure == "antolini") {
    if (reduction_name != "native")
      throw validation_error("antolini evaluates the distribution directly; do not pass --reduction");
    if (!model.predicts_distribution())
      throw validation_error("model kind '" + model.kind() +
                             "' does not return a distribution prediction, which Antolini's C requires");
    std::cout << antolini_c(model.distribution(data), outcomes).to_csv_row() << "\n";
  } else if (measure == "auc") {
    if (!roc_time) throw validation_error("auc requires --at <time>");
    const RiskVector risks = make_risks();
    const double a = auc_at_time(risks, outcomes, *roc_time);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "auc_at_time,%s,%.12g,,,,%.12g", risks.source.label.c_str(), a,
                  *roc_time);
    std::cout << buf << "\n";
  } else {
    throw validation_error("unknown measure '" + measure + "' (expected harrell, uno, antolini or auc)");
  }
  return 0;
}

int run_audit(const std::string& data_path, const SchemaFlags& schema, double train_fraction,
              std::uint64_t seed, bool seed_given, const std::string& model_list, const RsfFlags& rsf,
              const SmoothCFlags& sc, double delta, bool no_full_scan, const std::string& out_prefix,
              const std::string& experiment_path) {
  const Dataset data = load_csv(data_path, schema.schema());

  ExperimentConfig config;
  if (!experiment_path.empty()) {
    config = parse_experiment_config(experiment_path);
    if (seed_given) config.seed = seed;  // an explicit flag beats the file
    if (config.data_label.empty()) config.data_label = data_path;
  } else {
    config.train_fraction = train_fraction;
    config.seed = seed;
    config.drop_delta = delta;
    config.full_scan = !no_full_scan;
    config.data_label = data_path;
    for (const auto& kind : split_list(model_list)) {
      ModelSpec spec;
      spec.kind = kind;
      if (kind == "cox") spec.name = "CPH";
      else if (kind == "rsf") spec.name = "RSF";
      else if (kind == "smoothc") spec.name = "GBM";
      else spec.name = kind;
      spec.rsf_hp = rsf.hp(seed);
      spec.smoothc_opts = sc.opts();
      config.models.push_back(spec);
    }
  }

  const AuditGrid grid = run_experiment(data, config);
  const AuditReport report = audit_report(grid);
  write_report_files(report, out_prefix);
  std::cout << report.markdown;
  std::printf("\nwrote %s_grid.csv and %s_report.md\n", out_prefix.c_str(), out_prefix.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survaudit: survival model discrimination audit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags like --seed also parse after a subcommand
  app.set_config("--config", "", "Read options from an INI config file (sections per subcommand)");

  std::uint64_t seed = 42;
  auto* seed_opt =
      app.add_option("--seed", seed, "Master seed controlling all randomness")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic proportional-hazards dataset");
  std::size_t sim_n = 1000;
  std::string sim_beta = "0.5,-0.5";
  double sim_shape = 1.5, sim_scale = 2.0, sim_censor = 0.3;
  std::string sim_out = "simulated.csv";
  sim->add_option("--n", sim_n, "Number of subjects")->capture_default_str();
  sim->add_option("--beta", sim_beta, "Comma-separated true coefficients")->capture_default_str();
  sim->add_option("--shape", sim_shape, "Weibull shape")->capture_default_str();
  sim->add_option("--scale", sim_scale, "Weibull scale")->capture_default_str();
  sim->add_option("--censor-rate", sim_censor, "Exponential censoring rate")->capture_default_str();
  sim->add_option("--out", sim_out, "Output CSV path")->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model and save it to a text file");
  std::string fit_data, fit_kind = "cox", fit_out = "model.txt";
  SchemaFlags fit_schema;
  RsfFlags fit_rsf;
  SmoothCFlags fit_sc;
  double fit_tol = 1e-9;
  int fit_max_iter = 60;
  fit->add_option("--data", fit_data, "Training CSV")->required();
  add_schema_flags(fit, fit_schema);
  fit->add_option("--model", fit_kind, "cox | rsf | smoothc")->capture_default_str();
  fit->add_option("--tol", fit_tol, "Cox gradient tolerance")->capture_default_str();
  fit->add_option("--max-iter", fit_max_iter, "Cox Newton iteration cap")->capture_default_str();
  add_rsf_flags(fit, fit_rsf);
  add_smoothc_flags(fit, fit_sc);
  fit->add_option("--out", fit_out, "Model output path")->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a saved model with one measure");
  std::string ev_data, ev_model, ev_measure = "harrell", ev_reduction = "native", ev_train;
  SchemaFlags ev_schema;
  std::optional<double> ev_time_point, ev_delta, ev_tau, ev_at;
  ev->add_option("--data", ev_data, "Evaluation CSV")->required();
  add_schema_flags(ev, ev_schema);
  ev->add_option("--model-file", ev_model, "Saved model path")->required();
  ev->add_option("--measure", ev_measure, "harrell | uno | antolini | auc")->capture_default_str();
  ev->add_option("--reduction", ev_reduction,
                 "native | expected_mortality | prob_at_time | mean_naive | mean_drop | mean_linear | "
                 "median_drop")
      ->capture_default_str();
  ev->add_option("--time-point", ev_time_point, "Evaluation time for prob_at_time");
  ev->add_option("--delta", ev_delta, "Drop-to-zero offset for the drop reductions");
  ev->add_option("--tau", ev_tau, "Truncation time for Uno's C");
  ev->add_option("--at", ev_at, "Horizon for the time-dependent AUC");
  ev->add_option("--train-data", ev_train, "Training CSV for Uno's censoring weights");
  std::string ev_curves;
  ev->add_option("--write-curves", ev_curves,
                 "Also write the predicted survival matrix as CSV (time column + one column per subject)");

  // audit
  auto* audit = app.add_subcommand("audit", "Run the full model-by-method concordance audit");
  std::string audit_data, audit_models = "cox,rsf,smoothc", audit_prefix = "audit";
  SchemaFlags audit_schema;
  RsfFlags audit_rsf;
  SmoothCFlags audit_sc;
  double audit_fraction = 2.0 / 3.0, audit_delta = 1.0;
  bool audit_no_full_scan = false;
  audit->add_option("--data", audit_data, "Input CSV")->required();
  add_schema_flags(audit, audit_schema);
  audit->add_option("--train-fraction", audit_fraction, "Holdout training fraction")
      ->capture_default_str();
  audit->add_option("--models", audit_models, "Comma-separated model kinds")->capture_default_str();
  add_rsf_flags(audit, audit_rsf);
  add_smoothc_flags(audit, audit_sc);
  audit->add_option("--delta", audit_delta, "Drop-to-zero offset for Summary (extr)")
      ->capture_default_str();
  audit->add_flag("--no-full-scan", audit_no_full_scan,
                  "Evaluate the probability reduction only at the random time-point");
  audit->add_option("--out-prefix", audit_prefix, "Prefix for <prefix>_grid.csv and <prefix>_report.md")
      ->capture_default_str();
  std::string audit_experiment;
  audit->add_option("--experiment", audit_experiment,
                    "Experiment file: global key=value pairs plus one [section] per model "
                    "(keys mirror the flags; see the README). Overrides the model flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) return run_simulate(sim_n, sim_beta, sim_shape, sim_scale, sim_censor, seed, sim_out);
    if (*fit)
      return run_fit(fit_data, fit_schema, fit_kind, seed, fit_rsf, fit_sc, fit_tol, fit_max_iter, fit_out);
    if (*ev)
      return run_evaluate(ev_data, ev_schema, ev_model, ev_measure, ev_reduction, ev_time_point, ev_delta,
                          ev_tau, ev_at, ev_train, ev_curves);
    if (*audit)
      return run_audit(audit_data, audit_schema, audit_fraction, seed, seed_opt->count() > 0,
                       audit_models, audit_rsf, audit_sc, audit_delta, audit_no_full_scan, audit_prefix,
                       audit_experiment);
  } catch (const validation_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
