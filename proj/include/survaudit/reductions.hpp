#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/curves.hpp"

namespace survaudit {

enum class ReductionMethod {
  expected_mortality,
  prob_at_time,
  mean_naive,
  mean_drop,
  mean_linear,
  median_drop,
};

inline const char* to_string(ReductionMethod m) {
  switch (m) {
    case ReductionMethod::expected_mortality: return "expected_mortality";
    case ReductionMethod::prob_at_time: return "prob_at_time";
    case ReductionMethod::mean_naive: return "mean_naive";
    case ReductionMethod::mean_drop: return "mean_drop";
    case ReductionMethod::mean_linear: return "mean_linear";
    case ReductionMethod::median_drop: return "median_drop";
  }
  return "?";
}

inline std::optional<ReductionMethod> reduction_from_string(const std::string& s) {
  for (auto m : {ReductionMethod::expected_mortality, ReductionMethod::prob_at_time,
                 ReductionMethod::mean_naive, ReductionMethod::mean_drop, ReductionMethod::mean_linear,
                 ReductionMethod::median_drop})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

struct ReductionSpec {
  ReductionMethod method = ReductionMethod::expected_mortality;
  std::optional<double> time_point;  // prob_at_time only
  std::optional<double> delta;       // drop variants only

  void validate() const {
    if ((method == ReductionMethod::prob_at_time) != time_point.has_value())
      throw validation_error("reduction spec: time_point must be given exactly for prob_at_time");
    if (time_point && !(*time_point > 0.0))
      throw validation_error("reduction spec: time_point must be positive");
    if (delta && !(*delta > 0.0)) throw validation_error("reduction spec: delta must be positive");
  }

  std::string to_label() const {
    std::string s = to_string(method);
    char buf[48];
    if (time_point) {
      std::snprintf(buf, sizeof(buf), "(t=%.12g)", *time_point);
      s += buf;
    }
    if (delta && (method == ReductionMethod::mean_drop || method == ReductionMethod::median_drop)) {
      std::snprintf(buf, sizeof(buf), "(delta=%.12g)", *delta);
      s += buf;
    }
    return s;
  }
};

enum class Orientation { higher_is_riskier, higher_is_longer_lived };

inline const char* to_string(Orientation o) {
  return o == Orientation::higher_is_riskier ? "higher_is_riskier" : "higher_is_longer_lived";
}

// Where a risk vector came from: a native model score or a distribution
// reduction. Echoed verbatim into every report for provenance.
struct RiskSource {
  std::string label = "native";
  std::optional<ReductionSpec> reduction;
  std::size_t improper_count = 0;  // rows with terminal survival > 0 before any fix
};

// One real-valued relative risk per subject. Orientation always travels with
// the values; the measure layer performs the single explicit normalization.
struct RiskVector {
  std::vector<double> values;
  Orientation orientation = Orientation::higher_is_riskier;
  RiskSource source;

  void validate() const {
    if (values.empty()) throw validation_error("risk vector: empty");
    for (double v : values)
      if (!std::isfinite(v)) throw validation_error("risk vector: values must be finite");
  }
};

namespace detail {

inline std::size_t count_improper(const CurveMatrix& curves) {
  std::size_t c = 0;
  for (const auto& row : curves.probs) c += row.back() > 0.0 ? 1 : 0;
  return c;
}

}  // namespace detail

// Sum of the predicted cumulative hazard over the grid:
// phi_i = sum_t -log S_i(t). Higher values mean greater event risk.
inline RiskVector expected_mortality(const CurveMatrix& curves) {
  RiskVector out;
  out.orientation = Orientation::higher_is_riskier;
  out.source = {"expected_mortality", ReductionSpec{ReductionMethod::expected_mortality, {}, {}},
                detail::count_improper(curves)};
  out.values.reserve(curves.n_rows());
  for (const auto& row : curves.probs) {
    double phi = 0.0;
    for (double p : row) phi += -std::log(std::clamp(p, kProbClamp, 1.0));
    out.values.push_back(phi);
  }
  return out;
}

// phi_i = S_i(t) by the step convention. Note the orientation: a higher
// survival probability means a longer-lived prediction.
inline RiskVector prob_at_time(const CurveMatrix& curves, double t) {
  if (!(t > 0.0)) throw validation_error("prob_at_time: t must be positive");
  RiskVector out;
  out.orientation = Orientation::higher_is_longer_lived;
  ReductionSpec spec{ReductionMethod::prob_at_time, t, {}};
  out.source = {spec.to_label(), spec, detail::count_improper(curves)};
  out.values.reserve(curves.n_rows());
  for (std::size_t i = 0; i < curves.n_rows(); ++i) out.values.push_back(curves.value_at(i, t));
  return out;
}

// Mean/median summaries, optionally after one of the improper-curve fixes.
// mean_naive is the restricted mean over the predicted grid; the number of
// improper rows is recorded in the source descriptor.
inline RiskVector summary_reduce(const CurveMatrix& curves, const ReductionSpec& spec) {
  spec.validate();
  if (spec.method != ReductionMethod::mean_naive && spec.method != ReductionMethod::mean_drop &&
      spec.method != ReductionMethod::mean_linear && spec.method != ReductionMethod::median_drop)
    throw validation_error("summary_reduce: method must be one of mean_naive, mean_drop, mean_linear, median_drop");

  const double delta = spec.delta.value_or(1.0);
  RiskVector out;
  out.orientation = Orientation::higher_is_longer_lived;
  out.source = {spec.to_label(), spec, detail::count_improper(curves)};
  out.values.reserve(curves.n_rows());

  for (std::size_t i = 0; i < curves.n_rows(); ++i) {
    const StepCurve row = curves.row(i);
    switch (spec.method) {
      case ReductionMethod::mean_naive:
        out.values.push_back(curve_mean(row).value);
        break;
      case ReductionMethod::mean_drop:
        out.values.push_back(curve_mean(drop_to_zero(row, delta)).value);
        break;
      case ReductionMethod::mean_linear:
        try {
          out.values.push_back(curve_mean(linear_extrapolate(row)).value);
        } catch (const numeric_error& e) {
          throw numeric_error("summary_reduce: row " + std::to_string(i) + ": " + e.what());
        }
        break;
      case ReductionMethod::median_drop: {
        const auto med = curve_median(drop_to_zero(row, delta));
        if (!med)
          throw numeric_error("summary_reduce: row " + std::to_string(i) +
                              ": median undefined; use a fixing variant");
        out.values.push_back(*med);
        break;
      }
      default:
        break;
    }
  }
  return out;
}

// Dispatch over the full method enumeration.
inline RiskVector reduce(const CurveMatrix& curves, const ReductionSpec& spec) {
  spec.validate();
  switch (spec.method) {
    case ReductionMethod::expected_mortality: return expected_mortality(curves);
    case ReductionMethod::prob_at_time: return prob_at_time(curves, *spec.time_point);
    default: return summary_reduce(curves, spec);
  }
}

}  // namespace survaudit
