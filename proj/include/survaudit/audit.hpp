#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/concordance.hpp"
#include "survaudit/cox.hpp"
#include "survaudit/data.hpp"
#include "survaudit/forest.hpp"
#include "survaudit/model_io.hpp"
#include "survaudit/reductions.hpp"
#include "survaudit/smoothc.hpp"

namespace survaudit {

// The nine evaluation rows of the audit grid, in report order.
enum class GridMethod {
  harrell_native,
  uno_native,
  antolini,
  prob_min,
  prob_max,
  prob_rand,
  summary_naive,
  summary_extr,
  expmort,
};

inline const std::vector<GridMethod>& all_grid_methods() {
  static const std::vector<GridMethod> methods = {
      GridMethod::harrell_native, GridMethod::uno_native,   GridMethod::antolini,
      GridMethod::prob_min,       GridMethod::prob_max,     GridMethod::prob_rand,
      GridMethod::summary_naive,  GridMethod::summary_extr, GridMethod::expmort,
  };
  return methods;
}

inline const char* grid_method_label(GridMethod m) {
  switch (m) {
    case GridMethod::harrell_native: return "Harrell";
    case GridMethod::uno_native: return "Uno";
    case GridMethod::antolini: return "Antolini";
    case GridMethod::prob_min: return "Prob (min)";
    case GridMethod::prob_max: return "Prob (max)";
    case GridMethod::prob_rand: return "Prob (rand)";
    case GridMethod::summary_naive: return "Summary (naive)";
    case GridMethod::summary_extr: return "Summary (extr)";
    case GridMethod::expmort: return "ExpMort";
  }
  return "?";
}

inline std::optional<GridMethod> grid_method_from_string(const std::string& s) {
  for (auto m : all_grid_methods())
    if (s == grid_method_label(m)) return m;
  return std::nullopt;
}

// Rows 1-2 evaluate a native risk prediction; everything else needs a
// distribution prediction. Incompatibility is a pure function of these types.
inline bool method_needs_risk(GridMethod m) {
  return m == GridMethod::harrell_native || m == GridMethod::uno_native;
}
inline bool method_needs_distribution(GridMethod m) { return !method_needs_risk(m); }

struct ModelSpec {
  std::string name;  // column label, e.g. "CPH"
  std::string kind;  // cox | rsf | smoothc
  CoxFitOptions cox_opts;
  RsfHyperparameters rsf_hp;
  SmoothCOptions smoothc_opts;

  bool provides_risk() const { return kind != "rsf"; }
  bool provides_distribution() const { return kind != "smoothc"; }
};

struct ExperimentConfig {
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 42;
  std::vector<ModelSpec> models;
  std::vector<GridMethod> measures = all_grid_methods();
  double drop_delta = 1.0;      // Summary (extr) drop-to-zero offset
  bool full_scan = true;        // scan Harrell's C at every predicted time-point
  std::optional<double> uno_tau;
  std::string data_label;       // echoed into reports

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw validation_error("experiment config: train_fraction must be in (0, 1)");
    if (!(drop_delta > 0.0)) throw validation_error("experiment config: drop_delta must be positive");
    if (models.empty()) throw validation_error("experiment config: at least one model required");
    if (measures.empty()) throw validation_error("experiment config: at least one measure required");
    std::vector<std::string> names;
    for (const auto& m : models) {
      if (m.kind != "cox" && m.kind != "rsf" && m.kind != "smoothc")
        throw validation_error("experiment config: unknown model kind '" + m.kind + "'");
      if (std::find(names.begin(), names.end(), m.name) != names.end())
        throw validation_error("experiment config: duplicate model name '" + m.name + "'");
      names.push_back(m.name);
      bool any_compatible = false;
      for (auto meas : measures) {
        if (method_needs_risk(meas) && m.provides_risk()) any_compatible = true;
        if (method_needs_distribution(meas) && m.provides_distribution()) any_compatible = true;
      }
      if (!any_compatible)
        throw validation_error("experiment config: model '" + m.name +
                               "' is incompatible with every requested measure");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

inline double parse_num(const std::string& value, const std::string& key, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw validation_error("experiment config line " + std::to_string(lineno) + ": key '" + key +
                           "' needs a number, got '" + value + "'");
  }
}

}  // namespace detail

// Experiment file: flat key=value pairs with one [section] per model. Global
// keys (before the first section): seed, train_fraction, delta, full_scan,
// uno_tau, label. Model keys mirror the CLI flags: kind (required), and per
// kind tol/max_iter, trees/mtry/min_node_size/bootstrap/threads,
// sigma/steps/lr. '#' starts a comment.
inline ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("experiment config: cannot open " + path);

  ExperimentConfig config;
  ModelSpec* model = nullptr;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw validation_error("experiment config line " + std::to_string(lineno) + ": unterminated section");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (name.empty())
        throw validation_error("experiment config line " + std::to_string(lineno) + ": empty model name");
      config.models.push_back(ModelSpec{name, "", {}, {}, {}});
      model = &config.models.back();
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error("experiment config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto num = [&]() { return detail::parse_num(value, key, lineno); };

    if (model == nullptr) {
      if (key == "seed") config.seed = static_cast<std::uint64_t>(num());
      else if (key == "train_fraction") config.train_fraction = num();
      else if (key == "delta") config.drop_delta = num();
      else if (key == "full_scan") config.full_scan = num() != 0.0;
      else if (key == "uno_tau") config.uno_tau = num();
      else if (key == "label") config.data_label = value;
      else
        throw validation_error("experiment config line " + std::to_string(lineno) + ": unknown global key '" +
                               key + "'");
      continue;
    }

    if (key == "kind") model->kind = value;
    else if (key == "tol") model->cox_opts.tol = num();
    else if (key == "max_iter") model->cox_opts.max_iter = static_cast<int>(num());
    else if (key == "trees") model->rsf_hp.n_trees = static_cast<std::size_t>(num());
    else if (key == "mtry") model->rsf_hp.mtry = static_cast<std::size_t>(num());
    else if (key == "min_node_size") model->rsf_hp.min_node_size = static_cast<std::size_t>(num());
    else if (key == "bootstrap") model->rsf_hp.bootstrap = num() != 0.0;
    else if (key == "threads") model->rsf_hp.n_threads = static_cast<std::size_t>(num());
    else if (key == "sigma") model->smoothc_opts.sigma = num();
    else if (key == "steps") model->smoothc_opts.steps = static_cast<std::size_t>(num());
    else if (key == "lr") model->smoothc_opts.lr = num();
    else
      throw validation_error("experiment config line " + std::to_string(lineno) + ": unknown model key '" +
                             key + "'");
  }
  config.validate();
  return config;
}

struct GridCell {
  bool populated = false;
  ConcordanceResult result;
  std::string incompatible_reason;
};

struct ProbScanAnnotation {
  double t_min = 0.0, c_min = 0.0;
  double t_max = 0.0, c_max = 0.0;
  double t_rand = 0.0, c_rand = 0.0;
  double spread = 0.0;
  std::size_t n_scanned = 0;
  bool scan_includes_pre_event_time = false;  // some scanned t precedes the first predicted event time
};

struct OrientationDemo {
  double proper_estimate = 0.0;    // orientation handled correctly
  double inverted_estimate = 0.0;  // vector fed as if higher meant riskier
};

struct AuditGrid {
  std::vector<GridMethod> methods;
  std::vector<std::string> model_names;
  std::vector<std::vector<GridCell>> cells;  // [method][model]
  std::map<std::string, ProbScanAnnotation> prob_scan;
  std::map<std::string, OrientationDemo> naive_demo;
  ExperimentConfig config;
  std::size_t n_train = 0, n_test = 0, train_events = 0, test_events = 0;

  const GridCell& cell(GridMethod m, const std::string& model) const {
    const auto mi = std::find(methods.begin(), methods.end(), m);
    const auto ci = std::find(model_names.begin(), model_names.end(), model);
    if (mi == methods.end() || ci == model_names.end())
      throw validation_error("audit grid: unknown method or model");
    return cells[static_cast<std::size_t>(mi - methods.begin())]
                [static_cast<std::size_t>(ci - model_names.begin())];
  }
};

namespace detail {

inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline FittedModel fit_model(const ModelSpec& spec, const Dataset& train, std::uint64_t master_seed,
                             std::size_t model_index) {
  try {
    if (spec.kind == "cox") return FittedModel{cox_fit(train, spec.cox_opts)};
    if (spec.kind == "rsf") {
      RsfHyperparameters hp = spec.rsf_hp;
      hp.seed = master_seed ^ substream(stream::model_fit, model_index);
      return FittedModel{rsf_fit(train, hp)};
    }
    return FittedModel{smoothc_fit(train, spec.smoothc_opts)};
  } catch (const validation_error& e) {
    throw validation_error("model '" + spec.name + "': " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error("model '" + spec.name + "': " + e.what());
  }
}

}  // namespace detail

// Fits every configured model on the training partition and fills the
// method-by-model grid of concordance results on the holdout, mirroring the
// incompatibility pattern of the models' prediction types. Deterministic per
// config seed.
inline AuditGrid run_experiment(const Dataset& data, const ExperimentConfig& config) {
  config.validate();

  AuditGrid grid;
  grid.config = config;
  grid.methods = config.measures;
  for (const auto& m : config.models) grid.model_names.push_back(m.name);
  grid.cells.assign(grid.methods.size(), std::vector<GridCell>(config.models.size()));

  const auto [train, test] = holdout_split(data, SplitSpec{config.train_fraction, config.seed});
  grid.n_train = train.size();
  grid.n_test = test.size();
  grid.train_events = train.n_events();
  grid.test_events = test.n_events();
  const auto test_outcomes = OutcomeView::from(test);
  const auto train_outcomes = OutcomeView::from(train);

  // Uno's weights are undefined past the support of the training censoring
  // distribution; cap the default truncation there so the grid stays
  // well-defined whenever the last training subjects are censored.
  std::optional<double> uno_tau = config.uno_tau;
  if (!uno_tau) {
    std::vector<int> censor_flags(train_outcomes.events.size());
    for (std::size_t i = 0; i < censor_flags.size(); ++i) censor_flags[i] = 1 - train_outcomes.events[i];
    const StepCurve censor_km = km_fit(train_outcomes.times, censor_flags);
    double tau = test_outcomes.max_event_time().value();
    for (std::size_t k = 0; k < censor_km.times.size(); ++k) {
      if (censor_km.probs[k] == 0.0) {
        tau = std::min(tau, censor_km.times[k]);
        break;
      }
    }
    uno_tau = tau;
  }

  for (std::size_t ci = 0; ci < config.models.size(); ++ci) {
    const auto& spec = config.models[ci];
    const FittedModel fitted = detail::fit_model(spec, train, config.seed, ci);

    auto set_cell = [&](GridMethod m, ConcordanceResult res) {
      const auto mi = std::find(grid.methods.begin(), grid.methods.end(), m);
      if (mi == grid.methods.end()) return;
      auto& cell = grid.cells[static_cast<std::size_t>(mi - grid.methods.begin())][ci];
      cell.populated = true;
      cell.result = std::move(res);
    };
    auto mark_incompatible = [&](GridMethod m, const std::string& reason) {
      const auto mi = std::find(grid.methods.begin(), grid.methods.end(), m);
      if (mi == grid.methods.end()) return;
      grid.cells[static_cast<std::size_t>(mi - grid.methods.begin())][ci].incompatible_reason = reason;
    };

    if (fitted.predicts_risk()) {
      const RiskVector native = fitted.native_risk(test);
      set_cell(GridMethod::harrell_native, harrell_c(native, test_outcomes));
      set_cell(GridMethod::uno_native, uno_c(native, test_outcomes, train_outcomes, uno_tau));
    } else {
      for (auto m : {GridMethod::harrell_native, GridMethod::uno_native})
        mark_incompatible(m, "no native risk prediction");
    }

    if (fitted.predicts_distribution()) {
      const CurveMatrix matrix = fitted.distribution(test);
      set_cell(GridMethod::antolini, antolini_c(matrix, test_outcomes));

      // Harrell's C on S(t) scanned over the predicted time grid
      ProbScanAnnotation scan;
      Rng rand_rng(config.seed, substream(stream::prob_scan, ci));
      const std::size_t rand_idx = rand_rng.uniform_below(matrix.times.size());
      scan.t_rand = matrix.times[rand_idx];

      const double first_event_time =
          matrix.n_times() > 0 ? [&] {
            // first grid time at which any row's survival leaves 1
            for (std::size_t k = 0; k < matrix.n_times(); ++k)
              for (const auto& row : matrix.probs)
                if (row[k] < 1.0) return matrix.times[k];
            return matrix.times.back() + 1.0;
          }()
                               : 0.0;

      std::vector<double> scan_times;
      if (config.full_scan) scan_times = matrix.times;
      else scan_times.push_back(scan.t_rand);

      ConcordanceResult res_min, res_max, res_rand;
      bool have = false;
      for (double t : scan_times) {
        const auto res = harrell_c(prob_at_time(matrix, t), test_outcomes);
        if (!have || res.estimate < res_min.estimate) {
          res_min = res;
          scan.t_min = t;
        }
        if (!have || res.estimate > res_max.estimate) {
          res_max = res;
          scan.t_max = t;
        }
        if (t == scan.t_rand) res_rand = res;
        if (t < first_event_time) scan.scan_includes_pre_event_time = true;
        have = true;
      }
      scan.c_min = res_min.estimate;
      scan.c_max = res_max.estimate;
      scan.c_rand = res_rand.estimate;
      scan.spread = scan.c_max - scan.c_min;
      scan.n_scanned = scan_times.size();
      grid.prob_scan[spec.name] = scan;

      set_cell(GridMethod::prob_min, res_min);
      set_cell(GridMethod::prob_max, res_max);
      set_cell(GridMethod::prob_rand, res_rand);

      const RiskVector naive = summary_reduce(matrix, {ReductionMethod::mean_naive, {}, {}});
      const auto naive_proper = harrell_c(naive, test_outcomes);
      RiskVector naive_misused = naive;  // deliberate misuse: orientation tag dropped
      naive_misused.orientation = Orientation::higher_is_riskier;
      naive_misused.source.label += "[orientation inverted]";
      grid.naive_demo[spec.name] =
          OrientationDemo{naive_proper.estimate, harrell_c(naive_misused, test_outcomes).estimate};
      set_cell(GridMethod::summary_naive, naive_proper);

      set_cell(GridMethod::summary_extr,
               harrell_c(summary_reduce(matrix, {ReductionMethod::mean_drop, {}, config.drop_delta}),
                         test_outcomes));
      set_cell(GridMethod::expmort, harrell_c(expected_mortality(matrix), test_outcomes));
    } else {
      for (auto m : {GridMethod::antolini, GridMethod::prob_min, GridMethod::prob_max,
                     GridMethod::prob_rand, GridMethod::summary_naive, GridMethod::summary_extr,
                     GridMethod::expmort})
        mark_incompatible(m, "no distribution prediction");
    }
  }
  return grid;
}

struct AuditReport {
  std::string markdown;
  std::string grid_csv;
  bool time_cherry_pick_flag = false;
  bool measure_conflict_flag = false;
  bool cross_type_flag = false;
};

namespace detail {

struct RowWinner {
  GridMethod method;
  std::string model;
  double value;
};

}  // namespace detail

// Renders the grid as markdown + CSV, reports the scan spreads and the
// orientation-inversion demo, regenerates the four reporting narratives from
// the actual numbers, and raises explicit flags where the numbers allow the
// reported ranking to be steered by measure, time-point, or orientation
// choice.
inline AuditReport audit_report(const AuditGrid& grid) {
  AuditReport report;
  std::ostringstream md;
  std::ostringstream csv;

  const auto& methods = grid.methods;
  const auto& models = grid.model_names;

  md << "# Concordance audit\n\n";
  md << "- data: " << (grid.config.data_label.empty() ? "(unnamed)" : grid.config.data_label) << "\n";
  md << "- seed: " << grid.config.seed << "\n";
  md << "- split: train fraction " << detail::fmt12(grid.config.train_fraction) << " -> n_train "
     << grid.n_train << " (" << grid.train_events << " events), n_test " << grid.n_test << " ("
     << grid.test_events << " events)\n";
  md << "- models:";
  for (const auto& m : grid.config.models) md << ' ' << m.name << " (" << m.kind << ")";
  md << "\n";
  md << "- Summary (extr) reduction: " << ReductionSpec{ReductionMethod::mean_drop, {}, grid.config.drop_delta}.to_label()
     << "; probability scan: " << (grid.config.full_scan ? "full grid" : "random point only") << "\n\n";

  md << "## C-statistic grid\n\n";
  md << "| Method |";
  for (const auto& m : models) md << ' ' << m << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < models.size(); ++i) md << "---|";
  md << "\n";
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    md << "| " << grid_method_label(methods[mi]) << " |";
    for (std::size_t ci = 0; ci < models.size(); ++ci) {
      const auto& cell = grid.cells[mi][ci];
      if (cell.populated) md << ' ' << detail::fmt4(cell.result.estimate) << " |";
      else md << " - |";
    }
    md << "\n";
  }
  md << "\nEmpty cells mark measures that are incompatible with the model's prediction type.\n\n";

  // per-cell provenance: no value appears without its measure and risk source
  md << "## Per-cell provenance\n\n";
  csv << "model,method," << concordance_csv_header() << "\n";
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ci = 0; ci < models.size(); ++ci) {
      const auto& cell = grid.cells[mi][ci];
      if (!cell.populated) continue;
      const auto& r = cell.result;
      md << "- " << models[ci] << " / " << grid_method_label(methods[mi]) << ": " << r.measure << " on "
         << r.risk_source << " = " << detail::fmt12(r.estimate) << " (comparable " << detail::fmt12(r.comparable)
         << ", concordant " << detail::fmt12(r.concordant) << ", tied " << detail::fmt12(r.tied_predictions);
      if (r.truncation) md << ", tau " << detail::fmt12(*r.truncation);
      md << ")\n";
      csv << models[ci] << ',' << grid_method_label(methods[mi]) << ',' << r.to_csv_row() << "\n";
    }
  }
  md << "\n";

  if (!grid.prob_scan.empty()) {
    md << "## Time-point scan (Harrell's C on S(t))\n\n";
    md << "| Model | min C @ t | max C @ t | rand C @ t | spread |\n|---|---|---|---|---|\n";
    for (const auto& [name, s] : grid.prob_scan) {
      md << "| " << name << " | " << detail::fmt4(s.c_min) << " @ " << detail::fmt12(s.t_min) << " | "
         << detail::fmt4(s.c_max) << " @ " << detail::fmt12(s.t_max) << " | " << detail::fmt4(s.c_rand)
         << " @ " << detail::fmt12(s.t_rand) << " | " << detail::fmt12(s.spread) << " |\n";
      if (s.spread > 0.0) report.time_cherry_pick_flag = true;
    }
    md << "\n";
  }

  if (!grid.naive_demo.empty()) {
    md << "## Orientation inversion demo, Summary (naive)\n\n";
    md << "A mean survival time ranks subjects from longest- to shortest-lived; feeding it to a\n";
    md << "concordance measure as if higher meant riskier flips the reported value to roughly 1 - C.\n\n";
    md << "| Model | proper orientation | inverted (misuse) |\n|---|---|---|\n";
    for (const auto& [name, d] : grid.naive_demo)
      md << "| " << name << " | " << detail::fmt4(d.proper_estimate) << " | "
         << detail::fmt4(d.inverted_estimate) << " |\n";
    md << "\n";
  }

  // winners per populated row with at least two models
  std::vector<detail::RowWinner> winners;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::size_t populated = 0;
    std::size_t best = 0;
    for (std::size_t ci = 0; ci < models.size(); ++ci) {
      if (!grid.cells[mi][ci].populated) continue;
      ++populated;
      if (populated == 1 || grid.cells[mi][ci].result.estimate > grid.cells[mi][best].result.estimate)
        best = ci;
    }
    if (populated >= 2)
      winners.push_back({methods[mi], models[best], grid.cells[mi][best].result.estimate});
  }

  if (models.size() >= 2) {
    md << "## Reporting narratives (most to least transparent)\n\n";
    int item = 1;
    auto narrative_for = [&](GridMethod m, const std::string& what) {
      const auto mi = std::find(methods.begin(), methods.end(), m);
      if (mi == methods.end()) return;
      const std::size_t row = static_cast<std::size_t>(mi - methods.begin());
      std::vector<std::pair<double, std::string>> ranked;
      for (std::size_t ci = 0; ci < models.size(); ++ci)
        if (grid.cells[row][ci].populated)
          ranked.emplace_back(grid.cells[row][ci].result.estimate, models[ci]);
      if (ranked.size() < 2) return;
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      md << item++ << ". " << ranked[0].second << " is the best performing model for " << what
         << " with a C-index of " << detail::fmt4(ranked[0].first) << ", compared to ";
      for (std::size_t k = 1; k < ranked.size(); ++k) {
        if (k > 1) md << ", ";
        md << ranked[k].second << "'s " << detail::fmt4(ranked[k].first);
      }
      md << ".\n";
    };
    narrative_for(GridMethod::antolini, "distribution predictions under Antolini's C");
    narrative_for(GridMethod::expmort,
                  "distribution predictions under the expected-mortality reduction with Harrell's C");
    narrative_for(GridMethod::uno_native, "risk predictions under Uno's C");

    // the least transparent: each model represented by its own best cell
    std::vector<std::tuple<double, std::string, GridMethod>> mixed;
    for (std::size_t ci = 0; ci < models.size(); ++ci) {
      bool any = false;
      double best = 0.0;
      GridMethod best_m = GridMethod::harrell_native;
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const auto& cell = grid.cells[mi][ci];
        if (!cell.populated) continue;
        if (!any || cell.result.estimate > best) {
          best = cell.result.estimate;
          best_m = methods[mi];
          any = true;
        }
      }
      if (any) mixed.emplace_back(best, models[ci], best_m);
    }
    std::stable_sort(mixed.begin(), mixed.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    if (mixed.size() >= 2) {
      md << item++ << ". ";
      for (std::size_t k = 0; k < mixed.size(); ++k) {
        if (k > 0) md << ", then ";
        md << std::get<1>(mixed[k]) << " with a C-index of " << detail::fmt4(std::get<0>(mixed[k]));
      }
      md << " (each model reported under its own most favorable measure; mixes prediction types).\n";
    }
    md << "\n";

    // cross-type mixing: does the mixed comparison ever contradict a shared measure?
    for (std::size_t a = 0; a < models.size() && !report.cross_type_flag; ++a) {
      for (std::size_t b = 0; b < models.size() && !report.cross_type_flag; ++b) {
        if (a == b) continue;
        const auto val = [&](std::size_t mi, std::size_t ci) -> std::optional<double> {
          const auto& c = grid.cells[mi][ci];
          if (!c.populated) return std::nullopt;
          return c.result.estimate;
        };
        for (std::size_t ra = 0; ra < methods.size() && !report.cross_type_flag; ++ra) {
          for (std::size_t rb = 0; rb < methods.size() && !report.cross_type_flag; ++rb) {
            if (method_needs_risk(methods[ra]) == method_needs_risk(methods[rb])) continue;
            const auto va = val(ra, a), vb = val(rb, b);
            if (!va || !vb || !(*va > *vb)) continue;
            for (std::size_t rc = 0; rc < methods.size(); ++rc) {
              const auto ca = val(rc, a), cb = val(rc, b);
              if (ca && cb && *cb > *ca) {
                report.cross_type_flag = true;
                md << "WARNING: cross-type comparison changes the ranking: " << models[a] << "'s "
                   << grid_method_label(methods[ra]) << " (" << detail::fmt4(*va) << ") beats " << models[b]
                   << "'s " << grid_method_label(methods[rb]) << " (" << detail::fmt4(*vb) << "), but "
                   << models[b] << " wins under the shared measure " << grid_method_label(methods[rc])
                   << " (" << detail::fmt4(*cb) << " vs " << detail::fmt4(*ca) << ").\n\n";
                break;
              }
            }
          }
        }
      }
    }
  }

  md << "## C-hacking flags\n\n";
  bool any_flag = false;
  if (report.time_cherry_pick_flag) {
    any_flag = true;
    md << "- time-point cherry-picking span:";
    for (const auto& [name, s] : grid.prob_scan)
      if (s.spread > 0.0)
        md << ' ' << name << " spread " << detail::fmt4(s.spread) << " (min " << detail::fmt4(s.c_min)
           << " @ " << detail::fmt12(s.t_min) << ", max " << detail::fmt4(s.c_max) << " @ "
           << detail::fmt12(s.t_max) << ");";
    md << "\n";
  }
  if (winners.size() >= 2) {
    for (std::size_t i = 1; i < winners.size(); ++i)
      if (winners[i].model != winners[0].model) report.measure_conflict_flag = true;
    if (report.measure_conflict_flag) {
      any_flag = true;
      md << "- measure choice changes the winner:";
      for (const auto& w : winners)
        md << ' ' << grid_method_label(w.method) << " -> " << w.model << " (" << detail::fmt4(w.value)
           << ");";
      md << "\n";
    }
  }
  if (report.cross_type_flag) {
    any_flag = true;
    md << "- cross-type comparison can invert a head-to-head ranking (see warning above).\n";
  }
  if (!any_flag) md << "none\n";
  md << "\nEvery value above is reported with its measure and risk source; a bare \"C-index\" without\n";
  md << "that provenance is exactly the reporting style this audit is designed to expose.\n";

  report.markdown = md.str();
  report.grid_csv = csv.str();
  return report;
}

inline void write_report_files(const AuditReport& report, const std::string& prefix) {
  {
    std::ofstream out(prefix + "_grid.csv");
    if (!out) throw validation_error("audit: cannot write " + prefix + "_grid.csv");
    out << report.grid_csv;
  }
  {
    std::ofstream out(prefix + "_report.md");
    if (!out) throw validation_error("audit: cannot write " + prefix + "_report.md");
    out << report.markdown;
  }
}

}  // namespace survaudit
