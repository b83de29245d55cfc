#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "survaudit/common.hpp"
#include "survaudit/data.hpp"

namespace survaudit {

// Probabilities are clamped into [kProbClamp, 1] before log transforms so
// expected mortality stays finite while preserving the ordering.
constexpr double kProbClamp = 1e-15;

// Right-continuous step survival function: value 1 on [0, times[0]), and
// probs[k] on [times[k], times[k+1]). times strictly increasing and positive,
// probs non-increasing in [0, 1].
struct StepCurve {
  std::vector<double> times;
  std::vector<double> probs;

  void validate() const {
    if (times.empty() || times.size() != probs.size())
      throw validation_error("step curve: times and probs must be non-empty and equal length");
    double prev_t = 0.0;
    double prev_p = 1.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (!(times[k] > prev_t)) throw validation_error("step curve: times must be strictly increasing and positive");
      if (!(probs[k] >= 0.0 && probs[k] <= 1.0))
        throw validation_error("step curve: probabilities must lie in [0, 1]");
      if (probs[k] > prev_p + 1e-12) throw validation_error("step curve: probabilities must be non-increasing");
      prev_t = times[k];
      prev_p = probs[k];
    }
  }

  double value_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  // left limit S(t-): value held strictly before t
  double value_before(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  double terminal() const { return probs.back(); }
  bool proper() const { return probs.back() == 0.0; }
};

// Cumulative hazard on a grid; 0 before the first grid time, non-decreasing.
struct HazardCurve {
  std::vector<double> times;
  std::vector<double> cumhaz;

  void validate() const {
    if (times.empty() || times.size() != cumhaz.size())
      throw validation_error("hazard curve: times and cumhaz must be non-empty and equal length");
    double prev_t = 0.0;
    double prev_h = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (!(times[k] > prev_t)) throw validation_error("hazard curve: times must be strictly increasing and positive");
      if (cumhaz[k] < prev_h - 1e-12 || cumhaz[k] < 0.0)
        throw validation_error("hazard curve: cumulative hazard must be non-negative and non-decreasing");
      prev_t = times[k];
      prev_h = cumhaz[k];
    }
  }

  double value_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumhaz[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

// Predicted survival probabilities for M subjects on a shared grid. Each row
// must be a valid StepCurve on that grid.
struct CurveMatrix {
  std::vector<double> times;
  std::vector<std::vector<double>> probs;  // M rows, each of length times.size()

  std::size_t n_rows() const { return probs.size(); }
  std::size_t n_times() const { return times.size(); }

  StepCurve row(std::size_t i) const { return StepCurve{times, probs[i]}; }

  double value_at(std::size_t i, double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[i][static_cast<std::size_t>(it - times.begin()) - 1];
  }

  void validate() const {
    if (probs.empty()) throw validation_error("curve matrix: no rows");
    for (const auto& r : probs) {
      StepCurve c{times, r};
      c.validate();
    }
  }
};

namespace detail {

struct RiskSetEntry {
  double time;
  std::size_t deaths;
  std::size_t at_risk;
};

// unique observed times with death counts and risk-set sizes
inline std::vector<RiskSetEntry> risk_table(std::vector<double> times, const std::vector<int>& status) {
  if (times.empty()) throw validation_error("estimator: no observations");
  if (times.size() != status.size()) throw validation_error("estimator: times and status lengths differ");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  std::vector<RiskSetEntry> table;
  std::size_t i = 0;
  const std::size_t n = times.size();
  while (i < n) {
    const double t = times[order[i]];
    std::size_t deaths = 0;
    std::size_t j = i;
    while (j < n && times[order[j]] == t) {
      deaths += static_cast<std::size_t>(status[order[j]]);
      ++j;
    }
    table.push_back({t, deaths, n - i});
    i = j;
  }
  return table;
}

}  // namespace detail

// Kaplan-Meier product-limit estimator over the unique observed times.
inline StepCurve km_fit(const std::vector<double>& times, const std::vector<int>& status) {
  const auto table = detail::risk_table(times, status);
  StepCurve curve;
  double s = 1.0;
  for (const auto& e : table) {
    s *= 1.0 - static_cast<double>(e.deaths) / static_cast<double>(e.at_risk);
    curve.times.push_back(e.time);
    curve.probs.push_back(s);
  }
  return curve;
}

inline StepCurve km_fit(const Dataset& data) { return km_fit(data.times(), data.statuses()); }

// Nelson-Aalen cumulative hazard estimator over the unique observed times.
inline HazardCurve na_fit(const std::vector<double>& times, const std::vector<int>& status) {
  const auto table = detail::risk_table(times, status);
  HazardCurve curve;
  double h = 0.0;
  for (const auto& e : table) {
    h += static_cast<double>(e.deaths) / static_cast<double>(e.at_risk);
    curve.times.push_back(e.time);
    curve.cumhaz.push_back(h);
  }
  return curve;
}

inline HazardCurve na_fit(const Dataset& data) { return na_fit(data.times(), data.statuses()); }

inline StepCurve surv_from_cumhaz(const HazardCurve& h) {
  StepCurve c;
  c.times = h.times;
  c.probs.resize(h.cumhaz.size());
  for (std::size_t k = 0; k < h.cumhaz.size(); ++k) c.probs[k] = std::exp(-h.cumhaz[k]);
  return c;
}

inline HazardCurve cumhaz_from_surv(const StepCurve& s) {
  HazardCurve h;
  h.times = s.times;
  h.cumhaz.resize(s.probs.size());
  for (std::size_t k = 0; k < s.probs.size(); ++k)
    h.cumhaz[k] = -std::log(std::clamp(s.probs[k], kProbClamp, 1.0));
  return h;
}

// Improper-curve fix: append one grid point at t_max + delta with survival 0.
// A curve that already ends at 0 is returned unchanged.
inline StepCurve drop_to_zero(const StepCurve& curve, double delta = 1.0) {
  if (!(delta > 0.0)) throw validation_error("drop_to_zero: delta must be positive");
  if (curve.proper()) return curve;
  StepCurve fixed = curve;
  fixed.times.push_back(curve.times.back() + delta);
  fixed.probs.push_back(0.0);
  return fixed;
}

// Improper-curve fix: extend beyond t_max along the line through (0, 1) and
// (t_max, S(t_max)) until it reaches 0. The appended tail is discretized so
// that (a) its step integral equals the exact area under the line (each
// appended segment stores the line's average over that segment), (b) the
// median-level crossing time appears as an exact grid point, and (c) the final
// grid point is exactly the zero crossing. A proper curve is returned
// unchanged; a flat curve S = 1 has no zero crossing and is an error.
inline StepCurve linear_extrapolate(const StepCurve& curve, std::size_t segments = 20) {
  const double s_term = curve.terminal();
  if (s_term == 0.0) return curve;
  if (s_term >= 1.0)
    throw numeric_error("linear_extrapolate: curve is flat at 1, the extrapolation line never reaches 0");
  if (segments < 1) throw validation_error("linear_extrapolate: need at least one segment");

  const double t_max = curve.times.back();
  const double zero_at = t_max / (1.0 - s_term);
  auto line = [&](double t) { return std::max(0.0, 1.0 - t / zero_at); };

  // Boundaries: a sliver just after t_max (the observed terminal value is held
  // until the first appended point, so keeping that interval negligible keeps
  // the tail integral exact), then uniform points to the zero crossing, plus
  // the exact time where the line reaches 1/2 when that lies in the tail.
  std::vector<double> bounds;
  const double span = zero_at - t_max;
  double sliver = t_max + std::max(span * 1e-9, t_max * 1e-12);
  if (!(sliver > t_max)) sliver = std::nextafter(t_max, zero_at);
  bounds.push_back(sliver);
  for (std::size_t k = 1; k <= segments; ++k)
    bounds.push_back(t_max + span * static_cast<double>(k) / static_cast<double>(segments));
  bounds.back() = zero_at;
  if (s_term > 0.5) bounds.push_back(0.5 * zero_at);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  StepCurve fixed = curve;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    fixed.times.push_back(bounds[k]);
    fixed.probs.push_back(0.5 * (line(bounds[k]) + line(bounds[k + 1])));
  }
  fixed.times.push_back(bounds.back());
  fixed.probs.push_back(0.0);
  return fixed;
}

struct CurveMean {
  double value = 0.0;
  bool improper = false;  // true when the curve's terminal probability is > 0
};

// Exact step integration of S over [0, t_max]. For an improper curve this is
// the restricted mean: the unassigned tail mass is deliberately ignored and
// the result is flagged.
inline CurveMean curve_mean(const StepCurve& curve) {
  CurveMean out;
  double area = curve.times.front();  // S = 1 on [0, times[0])
  for (std::size_t k = 0; k + 1 < curve.times.size(); ++k)
    area += curve.probs[k] * (curve.times[k + 1] - curve.times[k]);
  out.value = area;
  out.improper = !curve.proper();
  return out;
}

// Smallest grid time with S(t) <= 1/2; empty when the terminal probability
// stays above 1/2 (the median of an improper prediction is undefined).
inline std::optional<double> curve_median(const StepCurve& curve) {
  for (std::size_t k = 0; k < curve.times.size(); ++k)
    if (curve.probs[k] <= 0.5) return curve.times[k];
  return std::nullopt;
}

// CSV layout: first column `time`, one column per subject, 12 significant digits.
inline void write_curve_matrix_csv(const CurveMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("write_curve_matrix_csv: cannot open " + path);
  out << "time";
  for (std::size_t i = 0; i < m.n_rows(); ++i) out << ",s" << (i + 1);
  out << '\n';
  char buf[40];
  for (std::size_t k = 0; k < m.n_times(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.12g", m.times[k]);
    out << buf;
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g", m.probs[i][k]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace survaudit
