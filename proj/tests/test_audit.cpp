#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "survaudit/audit.hpp"

using namespace survaudit;

namespace {

bool rats_available() { return std::filesystem::exists("data/rats.csv"); }

Dataset load_rats() { return load_csv("data/rats.csv", {"time", "status", {"litter"}}); }

ExperimentConfig three_model_config(std::uint64_t seed, std::size_t n_trees = 60) {
  ExperimentConfig config;
  config.seed = seed;
  config.data_label = "test";
  ModelSpec cph{"CPH", "cox", {}, {}, {}};
  ModelSpec rsf{"RSF", "rsf", {}, {}, {}};
  rsf.rsf_hp.n_trees = n_trees;
  ModelSpec gbm{"GBM", "smoothc", {}, {}, {}};
  gbm.smoothc_opts.steps = 300;
  config.models = {cph, rsf, gbm};
  return config;
}

}  // namespace

TEST_CASE("experiment config validation happens before any fitting") {
  ExperimentConfig config = three_model_config(1);
  config.models[1].kind = "boosted-mystery";
  CHECK_THROWS_AS(static_cast<void>(run_experiment(simulate_weibull_ph(50, {0.5}, 1.4, 2.0, 0.3, 1), config)),
                  validation_error);

  ExperimentConfig dup = three_model_config(1);
  dup.models[2].name = "CPH";
  CHECK_THROWS_AS(static_cast<void>(run_experiment(simulate_weibull_ph(50, {0.5}, 1.4, 2.0, 0.3, 1), dup)),
                  validation_error);

  // a risk-only model with only distribution measures requested is rejected
  ExperimentConfig narrow = three_model_config(1);
  narrow.measures = {GridMethod::antolini, GridMethod::expmort};
  CHECK_THROWS_WITH_AS(
      static_cast<void>(run_experiment(simulate_weibull_ph(50, {0.5}, 1.4, 2.0, 0.3, 1), narrow)),
      doctest::Contains("GBM"), validation_error);
}

TEST_CASE("grid incompatibility pattern is a pure function of model prediction types") {
  const Dataset data = simulate_weibull_ph(260, {0.8, -0.5}, 1.5, 2.0, 0.3, 9);
  const AuditGrid grid = run_experiment(data, three_model_config(5, 40));

  REQUIRE(grid.methods.size() == 9);
  REQUIRE(grid.model_names == std::vector<std::string>{"CPH", "RSF", "GBM"});

  auto populated_count = [&](const std::string& model) {
    std::size_t c = 0;
    for (auto m : grid.methods) c += grid.cell(m, model).populated ? 1 : 0;
    return c;
  };
  CHECK(populated_count("CPH") == 9);
  CHECK(populated_count("RSF") == 7);
  CHECK(populated_count("GBM") == 2);

  CHECK_FALSE(grid.cell(GridMethod::harrell_native, "RSF").populated);
  CHECK(grid.cell(GridMethod::harrell_native, "RSF").incompatible_reason == "no native risk prediction");
  CHECK_FALSE(grid.cell(GridMethod::antolini, "GBM").populated);
  CHECK(grid.cell(GridMethod::antolini, "GBM").incompatible_reason == "no distribution prediction");
}

TEST_CASE("prob scan ordering holds and the cox column collapses to one value") {
  const Dataset data = simulate_weibull_ph(300, {0.7, -0.4}, 1.5, 2.0, 0.35, 33);
  const AuditGrid grid = run_experiment(data, three_model_config(11, 40));

  for (const auto& name : {"CPH", "RSF"}) {
    const auto& scan = grid.prob_scan.at(name);
    CHECK(scan.c_min <= scan.c_rand + 1e-15);
    CHECK(scan.c_rand <= scan.c_max + 1e-15);
    CHECK(scan.spread == doctest::Approx(scan.c_max - scan.c_min));
  }

  const double href = grid.cell(GridMethod::harrell_native, "CPH").result.estimate;
  CHECK(grid.cell(GridMethod::expmort, "CPH").result.estimate == href);
  CHECK(grid.cell(GridMethod::summary_extr, "CPH").result.estimate == href);
  // the summary-naive cell uses the proper orientation, so it matches too
  CHECK(grid.cell(GridMethod::summary_naive, "CPH").result.estimate == href);
  // the random scan time lands at a positive baseline hazard almost surely
  const auto& scan = grid.prob_scan.at("CPH");
  if (scan.c_rand != 0.5) CHECK(scan.c_rand == href);
  if (scan.scan_includes_pre_event_time) CHECK(scan.c_min == 0.5);

  // inversion demo reflects around 1/2 up to prediction ties
  const auto& demo = grid.naive_demo.at("CPH");
  CHECK(demo.inverted_estimate == doctest::Approx(1.0 - demo.proper_estimate).epsilon(1e-9));
}

TEST_CASE("run_experiment is deterministic: identical grids and byte-identical reports") {
  const Dataset data = simulate_weibull_ph(220, {0.6, -0.6}, 1.4, 2.0, 0.3, 55);
  const ExperimentConfig config = three_model_config(21, 30);
  const AuditGrid g1 = run_experiment(data, config);
  const AuditGrid g2 = run_experiment(data, config);

  for (auto m : g1.methods)
    for (const auto& name : g1.model_names) {
      CHECK(g1.cell(m, name).populated == g2.cell(m, name).populated);
      if (g1.cell(m, name).populated)
        CHECK(g1.cell(m, name).result.estimate == g2.cell(m, name).result.estimate);
    }

  const AuditReport r1 = audit_report(g1);
  const AuditReport r2 = audit_report(g2);
  CHECK(r1.markdown == r2.markdown);
  CHECK(r1.grid_csv == r2.grid_csv);
}

TEST_CASE("audit on the rats fixture mirrors the published incompatibility pattern") {
  if (!rats_available()) {
    MESSAGE("data/rats.csv not present; skipping fixture audit");
    return;
  }
  ExperimentConfig config = three_model_config(42, 80);
  config.data_label = "rats";
  const AuditGrid grid = run_experiment(load_rats(), config);

  std::size_t gbm_cells = 0, rsf_native = 0;
  for (auto m : grid.methods) {
    gbm_cells += grid.cell(m, "GBM").populated ? 1 : 0;
    if (method_needs_risk(m)) rsf_native += grid.cell(m, "RSF").populated ? 1 : 0;
  }
  CHECK(gbm_cells == 2);
  CHECK(rsf_native == 0);

  // the early censored rats sit before the first tumour, so the cox grid
  // includes pre-event times and the scan minimum collapses to exactly 1/2
  const auto& scan = grid.prob_scan.at("CPH");
  if (scan.scan_includes_pre_event_time) {
    CHECK(grid.cell(GridMethod::prob_min, "CPH").result.estimate == 0.5);
  }

  const AuditReport report = audit_report(grid);
  CHECK(report.markdown.find("## C-statistic grid") != std::string::npos);
  CHECK(report.grid_csv.find("CPH,Harrell,harrell_c,native:cox_linear_predictor") != std::string::npos);
}

TEST_CASE("pure-noise experiment keeps every populated cell near chance") {
  const Dataset data = simulate_weibull_ph(450, {0.0, 0.0}, 1.5, 2.0, 0.3, 71);
  ExperimentConfig config = three_model_config(71, 50);
  const AuditGrid grid = run_experiment(data, config);
  for (auto m : grid.methods)
    for (const auto& name : grid.model_names) {
      const auto& cell = grid.cell(m, name);
      if (cell.populated) CHECK(std::fabs(cell.result.estimate - 0.5) < 0.09);
    }
}

TEST_CASE("audit_report narratives and flags") {
  const Dataset data = simulate_weibull_ph(300, {0.9, -0.5}, 1.5, 2.0, 0.3, 81);
  const AuditGrid grid = run_experiment(data, three_model_config(81, 40));
  const AuditReport report = audit_report(grid);

  CHECK(report.markdown.find("Reporting narratives") != std::string::npos);
  CHECK(report.markdown.find("C-hacking flags") != std::string::npos);
  // a full scan over a forest's time grid always exposes a positive spread
  CHECK(report.time_cherry_pick_flag);
  // every populated cell appears in the csv with its provenance
  std::size_t populated = 0;
  for (auto m : grid.methods)
    for (const auto& name : grid.model_names) populated += grid.cell(m, name).populated ? 1 : 0;
  std::size_t lines = 0;
  for (char c : report.grid_csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == populated + 1);  // header + one row per populated cell
}

TEST_CASE("single-model grid: spread section only, no ranking narratives") {
  const Dataset data = simulate_weibull_ph(200, {0.8}, 1.5, 2.0, 0.3, 91);
  ExperimentConfig config;
  config.seed = 91;
  ModelSpec cph{"CPH", "cox", {}, {}, {}};
  config.models = {cph};
  const AuditGrid grid = run_experiment(data, config);
  const AuditReport report = audit_report(grid);
  CHECK(report.markdown.find("Time-point scan") != std::string::npos);
  CHECK(report.markdown.find("Reporting narratives") == std::string::npos);
  CHECK_FALSE(report.measure_conflict_flag);
}

TEST_CASE("a PH-only grid over an event-anchored scan has exactly zero spread") {
  // censoring-free data: the first predicted time is an event time, so the
  // baseline hazard is positive over the whole scan and the proportional
  // ranking makes C(t) literally constant
  const Dataset data = simulate_weibull_ph(240, {0.8}, 1.5, 2.0, 1e-9, 93);
  ExperimentConfig config;
  config.seed = 93;
  ModelSpec cph{"CPH", "cox", {}, {}, {}};
  config.models = {cph};
  const AuditGrid grid = run_experiment(data, config);
  const auto& scan = grid.prob_scan.at("CPH");
  CHECK_FALSE(scan.scan_includes_pre_event_time);
  CHECK(scan.spread == 0.0);
  const AuditReport report = audit_report(grid);
  CHECK_FALSE(report.time_cherry_pick_flag);
}

TEST_CASE("experiment files carry global keys plus one section per model") {
  const auto path = (std::filesystem::temp_directory_path() / "survaudit_experiment.cfg").string();
  {
    std::ofstream out(path);
    out << "# two forests with different sizes share the grid\n"
        << "seed=17\n"
        << "train_fraction=0.5\n"
        << "delta=2\n"
        << "full_scan=0\n"
        << "[CPH]\n"
        << "kind=cox\n"
        << "tol=1e-8\n"
        << "[RSF-small]\n"
        << "kind=rsf\n"
        << "trees=10\n"
        << "min_node_size=8\n"
        << "[RSF-big]\n"
        << "kind=rsf\n"
        << "trees=40\n";
  }
  const ExperimentConfig config = parse_experiment_config(path);
  CHECK(config.seed == 17);
  CHECK(config.train_fraction == 0.5);
  CHECK(config.drop_delta == 2.0);
  CHECK_FALSE(config.full_scan);
  REQUIRE(config.models.size() == 3);
  CHECK(config.models[0].cox_opts.tol == 1e-8);
  CHECK(config.models[1].rsf_hp.n_trees == 10);
  CHECK(config.models[1].rsf_hp.min_node_size == 8);
  CHECK(config.models[2].rsf_hp.n_trees == 40);

  // the two forests get distinct derived seeds and tree counts, so their
  // columns genuinely differ
  const Dataset data = simulate_weibull_ph(300, {0.9, -0.3}, 1.5, 2.0, 0.3, 17);
  const AuditGrid grid = run_experiment(data, config);
  CHECK(grid.cell(GridMethod::expmort, "RSF-small").result.estimate !=
        grid.cell(GridMethod::expmort, "RSF-big").result.estimate);

  // unknown keys are named with their line
  {
    std::ofstream out(path);
    out << "[M]\nkind=cox\nboosting_rounds=5\n";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_experiment_config(path)),
                       doctest::Contains("boosting_rounds"), validation_error);
}

TEST_CASE("scan can be reduced to the random point only") {
  const Dataset data = simulate_weibull_ph(200, {0.7}, 1.5, 2.0, 0.3, 95);
  ExperimentConfig config = three_model_config(95, 25);
  config.full_scan = false;
  const AuditGrid grid = run_experiment(data, config);
  const auto& scan = grid.prob_scan.at("RSF");
  CHECK(scan.t_min == scan.t_rand);
  CHECK(scan.t_max == scan.t_rand);
  CHECK(scan.spread == 0.0);
  CHECK(grid.cell(GridMethod::prob_min, "RSF").result.estimate ==
        grid.cell(GridMethod::prob_max, "RSF").result.estimate);
}
