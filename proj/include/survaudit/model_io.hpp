#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/cox.hpp"
#include "survaudit/forest.hpp"
#include "survaudit/smoothc.hpp"

namespace survaudit {

// A fitted model of any supported kind plus its prediction-type surface.
// Risk-only and distribution-only models are first-class citizens here; the
// evaluation layer checks compatibility before asking for a prediction.
struct FittedModel {
  std::variant<CoxModel, ForestModel, SmoothCModel> model;

  std::string kind() const {
    if (std::holds_alternative<CoxModel>(model)) return "cox";
    if (std::holds_alternative<ForestModel>(model)) return "rsf";
    return "smoothc";
  }

  bool predicts_risk() const { return !std::holds_alternative<ForestModel>(model); }
  bool predicts_distribution() const { return !std::holds_alternative<SmoothCModel>(model); }

  std::size_t n_features() const {
    if (const auto* cox = std::get_if<CoxModel>(&model)) return cox->beta.size();
    if (const auto* rsf = std::get_if<ForestModel>(&model)) return rsf->n_features;
    return std::get<SmoothCModel>(model).weights.size();
  }

  RiskVector native_risk(const Dataset& test) const {
    if (const auto* cox = std::get_if<CoxModel>(&model)) return cox_predict_risk(*cox, test);
    if (const auto* sc = std::get_if<SmoothCModel>(&model)) return smoothc_predict(*sc, test);
    throw validation_error("model kind '" + kind() + "' does not return a native risk prediction");
  }

  CurveMatrix distribution(const Dataset& test) const {
    if (const auto* cox = std::get_if<CoxModel>(&model)) return cox_predict_distribution(*cox, test);
    if (const auto* rsf = std::get_if<ForestModel>(&model)) return rsf_predict(*rsf, test);
    throw validation_error("model kind '" + kind() + "' does not return a distribution prediction");
  }
};

namespace detail {

constexpr const char* kModelMagic = "survaudit-model";
constexpr int kModelVersion = 1;

inline void write_vector(std::ostream& out, const char* tag, const std::vector<double>& v) {
  out << tag << ' ' << v.size();
  for (double x : v) out << ' ' << format_double(x);
  out << '\n';
}

inline std::vector<double> read_vector(std::istream& in, const std::string& expect_tag) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != expect_tag)
    throw validation_error("model file: expected '" + expect_tag + "' section");
  std::vector<double> v(n);
  for (auto& x : v)
    if (!(in >> x)) throw validation_error("model file: truncated '" + expect_tag + "' section");
  return v;
}

}  // namespace detail

// Versioned field-tagged text format; doubles are written at full precision
// so a save/load round trip predicts identically.
inline void save_model(const FittedModel& fm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("save_model: cannot open " + path);
  out << detail::kModelMagic << ' ' << detail::kModelVersion << '\n';
  out << "kind " << fm.kind() << '\n';

  if (const auto* cox = std::get_if<CoxModel>(&fm.model)) {
    detail::write_vector(out, "beta", cox->beta);
    detail::write_vector(out, "means", cox->train_feature_means);
    detail::write_vector(out, "baseline_times", cox->baseline.times);
    detail::write_vector(out, "baseline_cumhaz", cox->baseline.cumhaz);
    out << "warnings " << cox->warnings.size() << '\n';
    for (const auto& w : cox->warnings) out << w << '\n';
  } else if (const auto* rsf = std::get_if<ForestModel>(&fm.model)) {
    out << "p " << rsf->n_features << '\n';
    out << "hp " << rsf->hp.n_trees << ' ' << rsf->hp.mtry << ' ' << rsf->hp.min_node_size << ' '
        << rsf->hp.seed << ' ' << (rsf->hp.bootstrap ? 1 : 0) << ' ' << rsf->hp.max_threshold_candidates
        << '\n';
    detail::write_vector(out, "grid", rsf->grid);
    out << "trees " << rsf->trees.size() << '\n';
    for (const auto& tree : rsf->trees) {
      out << "tree " << tree.nodes.size() << '\n';
      for (const auto& nd : tree.nodes) {
        out << nd.split_var << ' ' << detail::format_double(nd.threshold) << ' ' << nd.left << ' '
            << nd.right << ' ' << nd.cumhaz.size();
        for (double h : nd.cumhaz) out << ' ' << detail::format_double(h);
        out << '\n';
      }
    }
  } else {
    const auto& sc = std::get<SmoothCModel>(fm.model);
    detail::write_vector(out, "weights", sc.weights);
    out << "sigma " << detail::format_double(sc.sigma) << '\n';
    out << "converged " << (sc.converged ? 1 : 0) << '\n';
  }
  out << "end\n";
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("load_model: cannot open " + path);

  std::string magic, kind_tag, kind;
  int version = 0;
  if (!(in >> magic >> version) || magic != detail::kModelMagic)
    throw validation_error("load_model: not a model file: " + path);
  if (version != detail::kModelVersion)
    throw validation_error("load_model: unsupported model version " + std::to_string(version));
  if (!(in >> kind_tag >> kind) || kind_tag != "kind")
    throw validation_error("load_model: missing model kind");

  if (kind == "cox") {
    CoxModel cox;
    cox.beta = detail::read_vector(in, "beta");
    cox.train_feature_means = detail::read_vector(in, "means");
    cox.baseline.times = detail::read_vector(in, "baseline_times");
    cox.baseline.cumhaz = detail::read_vector(in, "baseline_cumhaz");
    std::string tag;
    std::size_t n_warn = 0;
    if (!(in >> tag >> n_warn) || tag != "warnings")
      throw validation_error("load_model: missing warnings section");
    std::string line;
    std::getline(in, line);
    for (std::size_t i = 0; i < n_warn; ++i) {
      std::getline(in, line);
      cox.warnings.push_back(line);
    }
    return FittedModel{cox};
  }
  if (kind == "rsf") {
    ForestModel rsf;
    std::string tag;
    if (!(in >> tag >> rsf.n_features) || tag != "p") throw validation_error("load_model: missing p");
    int bootstrap = 1;
    if (!(in >> tag >> rsf.hp.n_trees >> rsf.hp.mtry >> rsf.hp.min_node_size >> rsf.hp.seed >> bootstrap >>
          rsf.hp.max_threshold_candidates) ||
        tag != "hp")
      throw validation_error("load_model: missing hp");
    rsf.hp.bootstrap = bootstrap != 0;
    rsf.grid = detail::read_vector(in, "grid");
    std::size_t n_trees = 0;
    if (!(in >> tag >> n_trees) || tag != "trees") throw validation_error("load_model: missing trees");
    rsf.trees.resize(n_trees);
    for (auto& tree : rsf.trees) {
      std::size_t n_nodes = 0;
      if (!(in >> tag >> n_nodes) || tag != "tree") throw validation_error("load_model: missing tree");
      tree.nodes.resize(n_nodes);
      for (auto& nd : tree.nodes) {
        std::size_t ch = 0;
        if (!(in >> nd.split_var >> nd.threshold >> nd.left >> nd.right >> ch))
          throw validation_error("load_model: truncated tree node");
        nd.cumhaz.resize(ch);
        for (auto& h : nd.cumhaz)
          if (!(in >> h)) throw validation_error("load_model: truncated node hazard");
      }
    }
    return FittedModel{rsf};
  }
  if (kind == "smoothc") {
    SmoothCModel sc;
    sc.weights = detail::read_vector(in, "weights");
    std::string tag;
    int conv = 0;
    if (!(in >> tag >> sc.sigma) || tag != "sigma") throw validation_error("load_model: missing sigma");
    if (!(in >> tag >> conv) || tag != "converged") throw validation_error("load_model: missing converged");
    sc.converged = conv != 0;
    return FittedModel{sc};
  }
  throw validation_error("load_model: unknown model kind '" + kind + "'");
}

}  // namespace survaudit
