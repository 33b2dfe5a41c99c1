#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "failbench/core.hpp"
#include "failbench/measure.hpp"
#include "failbench/stats.hpp"

namespace failbench {

enum class BasisKind {
  Unconditional,
  DiscardSingle,
  DiscardAll,
  Imputed,
};

struct Basis {
  BasisKind kind = BasisKind::Unconditional;
  std::string policy;  // imputation policy label, Imputed only

  std::string label() const {
    switch (kind) {
      case BasisKind::Unconditional: return "unconditional";
      case BasisKind::DiscardSingle: return "discard_single";
      case BasisKind::DiscardAll: return "discard_all";
      case BasisKind::Imputed: return "imputed:" + policy;
    }
    return "unconditional";
  }
};

// An aggregate that is allowed to not exist. Undefined is a first-class
// state, not a sentinel number; callers must branch on defined().
struct AggregateValue {
  std::optional<double> value;
  std::size_t n_used = 0;
  Basis basis;

  bool defined() const { return value.has_value(); }

  static AggregateValue undefined(Basis b, std::size_t n_used = 0) {
    AggregateValue a;
    a.basis = b;
    a.n_used = n_used;
    return a;
  }

  static AggregateValue of(double v, std::size_t n_used, Basis b) {
    AggregateValue a;
    a.value = v;
    a.n_used = n_used;
    a.basis = b;
    return a;
  }
};

// Summary statistic over the selected cell values; arithmetic mean unless the
// study supplies its own.
using SummaryFn = std::function<double(std::span<const double>)>;

inline SummaryFn mean_summary() {
  return [](std::span<const double> xs) { return mean(xs); };
}

namespace detail {

inline std::vector<double> row_values(const ResultTable& table, std::size_t m) {
  std::vector<double> vals;
  for (const RunOutcome& o : table.row(m)) {
    if (o.is_success()) vals.push_back(*o.value);
  }
  return vals;
}

}  // namespace detail

// Defined only when the method never fails; a single failure makes the
// all-datasets aggregate undefined rather than silently conditional.
inline AggregateValue aggregate_unconditional(const ResultTable& table, const MethodId& method,
                                              const SummaryFn& stat = mean_summary()) {
  const std::size_t m = table.method_index(method);
  std::vector<double> vals = detail::row_values(table, m);
  const Basis basis{BasisKind::Unconditional, {}};
  if (vals.size() != table.n_datasets() || vals.empty()) {
    return AggregateValue::undefined(basis);
  }
  return AggregateValue::of(stat(vals), vals.size(), basis);
}

// Summary over the method's own success set.
inline AggregateValue aggregate_discard_single(const ResultTable& table, const MethodId& method,
                                               const SummaryFn& stat = mean_summary()) {
  const std::size_t m = table.method_index(method);
  std::vector<double> vals = detail::row_values(table, m);
  const Basis basis{BasisKind::DiscardSingle, {}};
  if (vals.empty()) return AggregateValue::undefined(basis);
  return AggregateValue::of(stat(vals), vals.size(), basis);
}

// Every method summarized over the joint success set, so all entries share
// the same n_used.
inline std::map<MethodId, AggregateValue> aggregate_discard_all(
    const ResultTable& table, std::span<const MethodId> methods,
    const SummaryFn& stat = mean_summary()) {
  require(!methods.empty(), Errc::empty_method_list, "discard-all over no methods");
  const std::vector<DatasetId> joint = joint_success_set(table, methods);
  std::vector<std::size_t> didx;
  didx.reserve(joint.size());
  for (const auto& d : joint) didx.push_back(table.dataset_index(d));

  const Basis basis{BasisKind::DiscardAll, {}};
  std::map<MethodId, AggregateValue> out;
  for (const auto& method : methods) {
    const std::size_t m = table.method_index(method);
    if (didx.empty()) {
      out[method] = AggregateValue::undefined(basis);
      continue;
    }
    std::vector<double> vals;
    vals.reserve(didx.size());
    for (std::size_t d : didx) vals.push_back(*table.cell(m, d).value);
    out[method] = AggregateValue::of(stat(vals), vals.size(), basis);
  }
  return out;
}

struct FailureProportion {
  double overall = 0.0;
  std::map<FailureCause, double> by_kind;
};

inline FailureProportion failure_proportion(const ResultTable& table, const MethodId& method) {
  const std::size_t m = table.method_index(method);
  FailureProportion fp;
  const double n = static_cast<double>(table.n_datasets());
  std::map<FailureCause, std::size_t> counts;
  std::size_t total = 0;
  for (const RunOutcome& o : table.row(m)) {
    if (!o.is_success()) {
      ++counts[o.failure->kind];
      ++total;
    }
  }
  fp.overall = static_cast<double>(total) / n;
  for (const auto& [k, c] : counts) fp.by_kind[k] = static_cast<double>(c) / n;
  return fp;
}

// ---------------------------------------------------------------------------
// Imputation. Kept for demonstration and contrast with the discard bases;
// every table produced here is permanently labeled with its policy.

struct ImputationPolicy {
  enum class Kind {
    WorstValue,
    MeanOfMethodRemaining,
    CrossMethodMean,
    ThresholdRule,
  };

  Kind kind = Kind::WorstValue;
  double worst = 0.0;      // WorstValue, ThresholdRule
  double threshold = 0.0;  // ThresholdRule, fraction in [0,1]

  static ImputationPolicy worst_value(double worst) {
    require(std::isfinite(worst), Errc::config, "worst value must be finite");
    return {Kind::WorstValue, worst, 0.0};
  }
  static ImputationPolicy mean_of_method_remaining() {
    return {Kind::MeanOfMethodRemaining, 0.0, 0.0};
  }
  static ImputationPolicy cross_method_mean() { return {Kind::CrossMethodMean, 0.0, 0.0}; }
  static ImputationPolicy threshold_rule(double threshold, double worst) {
    require(threshold >= 0.0 && threshold <= 1.0, Errc::config,
            "threshold must lie in [0,1]");
    require(std::isfinite(worst), Errc::config, "worst value must be finite");
    return {Kind::ThresholdRule, worst, threshold};
  }

  std::string label() const {
    switch (kind) {
      case Kind::WorstValue: return "worst_value(" + format_double(worst) + ")";
      case Kind::MeanOfMethodRemaining: return "mean_of_method_remaining";
      case Kind::CrossMethodMean: return "cross_method_mean";
      case Kind::ThresholdRule:
        return "threshold_rule(" + format_double(threshold) + "," + format_double(worst) + ")";
    }
    return "worst_value";
  }
};

// Returns a failure-free copy. Successful cells are preserved bitwise;
// imputed cells carry the provenance flag and the policy name lands in the
// table header.
inline ResultTable impute(const ResultTable& table, const ImputationPolicy& policy) {
  const std::size_t nm = table.n_methods();
  const std::size_t nd = table.n_datasets();

  // Donor means per method over its own success set.
  std::vector<std::optional<double>> method_mean(nm);
  std::vector<double> method_fail_prop(nm, 0.0);
  for (std::size_t m = 0; m < nm; ++m) {
    std::vector<double> vals = detail::row_values(table, m);
    if (!vals.empty()) method_mean[m] = mean(vals);
    method_fail_prop[m] =
        static_cast<double>(nd - vals.size()) / static_cast<double>(nd);
  }

  std::vector<RunOutcome> cells;
  cells.reserve(nm * nd);
  for (std::size_t m = 0; m < nm; ++m) {
    for (std::size_t d = 0; d < nd; ++d) {
      const RunOutcome& o = table.cell(m, d);
      if (o.is_success()) {
        cells.push_back(o);
        continue;
      }
      double v = 0.0;
      switch (policy.kind) {
        case ImputationPolicy::Kind::WorstValue:
          v = policy.worst;
          break;
        case ImputationPolicy::Kind::MeanOfMethodRemaining:
          require(method_mean[m].has_value(), Errc::no_donor,
                  "method '" + table.methods()[m] + "' has no successful cell to donate");
          v = *method_mean[m];
          break;
        case ImputationPolicy::Kind::CrossMethodMean: {
          std::vector<double> donors;
          for (std::size_t om = 0; om < nm; ++om) {
            if (om == m) continue;
            const RunOutcome& other = table.cell(om, d);
            if (other.is_success()) donors.push_back(*other.value);
          }
          require(!donors.empty(), Errc::no_donor,
                  "no successful method on dataset '" + table.datasets()[d] + "'");
          v = mean(donors);
          break;
        }
        case ImputationPolicy::Kind::ThresholdRule:
          if (method_fail_prop[m] > policy.threshold) {
            v = policy.worst;
          } else {
            require(method_mean[m].has_value(), Errc::no_donor,
                    "method '" + table.methods()[m] + "' has no successful cell to donate");
            v = *method_mean[m];
          }
          break;
      }
      RunOutcome filled = RunOutcome::success(v, o.elapsed);
      filled.imputed = true;
      filled.note = o.note;
      cells.push_back(std::move(filled));
    }
  }
  ResultTable out(table.methods(), table.datasets(), std::move(cells), table.measure());
  out.set_imputed_policy(policy.label());
  out.set_subset_manifest(table.subset_manifest());
  return out;
}

// ---------------------------------------------------------------------------
// Ranking and measures.

// Competition ranking: ties share a rank and the following rank is skipped.
// Output iteration order is by method id (std::map).
inline std::map<MethodId, int> rank_methods(const std::map<MethodId, AggregateValue>& values,
                                            const MeasureSpec& measure) {
  require(!values.empty(), Errc::empty_input, "ranking over no methods");
  std::vector<std::pair<double, MethodId>> keyed;
  keyed.reserve(values.size());
  for (const auto& [m, a] : values) {
    require(a.defined(), Errc::undefined_input,
            "undefined aggregate for method '" + m + "' cannot be ranked");
    keyed.emplace_back(measure.rank_key(*a.value), m);
  }
  std::sort(keyed.begin(), keyed.end());
  std::map<MethodId, int> ranks;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i > 0 && keyed[i].first == keyed[i - 1].first) {
      ranks[keyed[i].second] = ranks[keyed[i - 1].second];
    } else {
      ranks[keyed[i].second] = static_cast<int>(i) + 1;
    }
  }
  return ranks;
}

// Mean deviation of the estimates from the true value.
inline double bias(std::span<const double> estimates, double truth) {
  require(!estimates.empty(), Errc::empty_input, "bias of empty sample");
  return mean(estimates) - truth;
}

// Mean deviation on the log scale; symmetric around "no association" for
// ratio-type estimands.
inline double log_bias(std::span<const double> estimates, double truth) {
  require(!estimates.empty(), Errc::empty_input, "log bias of empty sample");
  require(truth > 0.0 && std::isfinite(truth), Errc::non_positive_estimate,
          "log bias needs truth > 0");
  std::vector<double> logs;
  logs.reserve(estimates.size());
  for (double e : estimates) {
    require(e > 0.0, Errc::non_positive_estimate,
            "log bias needs strictly positive estimates, got " + format_double(e));
    logs.push_back(std::log(e));
  }
  return mean(logs) - std::log(truth);
}

// ---------------------------------------------------------------------------
// Coverage with explicit policies for undefined intervals.

struct CoverageVerdict {
  bool defined = false;
  bool covers = false;
};

enum class CoverageHandling {
  DiscardUndefined,
  CountAsNonCover,
};

inline double empirical_coverage(std::span<const CoverageVerdict> verdicts,
                                 CoverageHandling handling) {
  require(!verdicts.empty(), Errc::empty_input, "coverage of empty verdict list");
  std::size_t covers = 0;
  std::size_t defined = 0;
  for (const auto& v : verdicts) {
    if (v.defined) {
      ++defined;
      if (v.covers) ++covers;
    }
  }
  if (handling == CoverageHandling::DiscardUndefined) {
    require(defined > 0, Errc::all_undefined, "all verdicts undefined");
    return static_cast<double>(covers) / static_cast<double>(defined);
  }
  return static_cast<double>(covers) / static_cast<double>(verdicts.size());
}

// ---------------------------------------------------------------------------
// Aggregate report rows: (method, basis, measure, value_or_UNDEFINED, n_used,
// failure_proportion), as CSV and mirrored JSON.

struct AggregateReportRow {
  MethodId method;
  Basis basis;
  std::string measure;
  AggregateValue value;
  double failure_prop = 0.0;
};

inline std::string aggregate_report_csv(std::span<const AggregateReportRow> rows) {
  std::ostringstream os;
  os << "method,basis,measure,value_or_UNDEFINED,n_used,failure_proportion\n";
  for (const auto& r : rows) {
    os << csv_escape(r.method) << ',' << r.basis.label() << ',' << csv_escape(r.measure)
       << ',' << (r.value.defined() ? format_double(*r.value.value) : "UNDEFINED") << ','
       << r.value.n_used << ',' << format_double(r.failure_prop) << '\n';
  }
  return os.str();
}

inline nlohmann::json aggregate_report_json(std::span<const AggregateReportRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["method"] = r.method;
    row["basis"] = r.basis.label();
    row["measure"] = r.measure;
    if (r.value.defined()) {
      row["value"] = *r.value.value;
    } else {
      row["value"] = nullptr;
    }
    row["defined"] = r.value.defined();
    row["n_used"] = r.value.n_used;
    row["failure_proportion"] = r.failure_prop;
    arr.push_back(std::move(row));
  }
  return arr;
}

}  // namespace failbench
