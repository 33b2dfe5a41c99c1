#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "failbench/aggregate.hpp"
#include "failbench/config.hpp"
#include "failbench/core.hpp"
#include "failbench/engine.hpp"
#include "failbench/rng.hpp"
#include "failbench/stats.hpp"

namespace failbench {

// ---------------------------------------------------------------------------
// Synthetic classification data: one standard-normal predictor z, outcome
// y ~ Bernoulli(sigmoid(beta * z)). Stands in for a real benchmark data set
// with a tunable signal strength.

struct ClassifData {
  std::vector<double> z;
  std::vector<int> y;

  std::size_t size() const { return z.size(); }
};

inline ClassifData generate_classif_data(double beta, std::size_t n, Rng& rng) {
  require(n >= 2, Errc::config, "need at least 2 rows");
  ClassifData data;
  data.z.reserve(n);
  data.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    const double p = 1.0 / (1.0 + std::exp(-beta * z));
    data.z.push_back(z);
    data.y.push_back(rng.bernoulli(p) ? 1 : 0);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Depth-1 classification tree with per-leaf prevalence scores. If no split
// reduces Gini impurity by at least min_impurity_decrease, the model is the
// constant prevalence predictor, i.e. it does not split.

struct StumpModel {
  bool is_split = false;
  double threshold = 0.0;
  double score_left = 0.5;   // prevalence for z <= threshold
  double score_right = 0.5;  // prevalence for z > threshold

  double predict(double z) const {
    if (!is_split) return score_left;
    return z <= threshold ? score_left : score_right;
  }
};

inline StumpModel fit_stump(const ClassifData& train, double min_impurity_decrease) {
  require(train.size() > 0, Errc::empty_train, "empty training set");
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return train.z[a] < train.z[b]; });

  std::size_t n_pos = 0;
  for (int y : train.y) n_pos += static_cast<std::size_t>(y);
  const double prevalence = static_cast<double>(n_pos) / static_cast<double>(n);

  StumpModel constant;
  constant.score_left = constant.score_right = prevalence;
  if (n_pos == 0 || n_pos == n) return constant;  // nothing to separate

  auto gini = [](std::size_t pos, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
  };
  const double parent = gini(n_pos, n);

  double best_decrease = -1.0;
  std::size_t best_cut = 0;  // split after sorted position best_cut - 1
  std::size_t pos_left = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    pos_left += static_cast<std::size_t>(train.y[order[i]]);
    if (train.z[order[i]] == train.z[order[i + 1]]) continue;  // not a boundary
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    const double child =
        (static_cast<double>(nl) * gini(pos_left, nl) +
         static_cast<double>(nr) * gini(n_pos - pos_left, nr)) /
        static_cast<double>(n);
    const double decrease = parent - child;
    if (decrease > best_decrease) {
      best_decrease = decrease;
      best_cut = nl;
    }
  }

  if (best_decrease < min_impurity_decrease || best_cut == 0) return constant;

  StumpModel model;
  model.is_split = true;
  model.threshold =
      0.5 * (train.z[order[best_cut - 1]] + train.z[order[best_cut]]);
  std::size_t pl = 0;
  for (std::size_t i = 0; i < best_cut; ++i) pl += static_cast<std::size_t>(train.y[order[i]]);
  model.score_left = static_cast<double>(pl) / static_cast<double>(best_cut);
  model.score_right =
      static_cast<double>(n_pos - pl) / static_cast<double>(n - best_cut);
  return model;
}

// ---------------------------------------------------------------------------
// AUC as the Mann-Whitney statistic with midranks for ties:
// (#concordant + 0.5 #tied) / (#pos * #neg). Constant scores give exactly 0.5.

inline double auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size() && !scores.empty(), Errc::empty_input,
          "auc needs matching, non-empty scores and labels");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y);
  const std::size_t n = labels.size();
  require(n_pos > 0 && n_pos < n, Errc::single_class, "auc needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of positive midranks.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

// ---------------------------------------------------------------------------
// Interval construction.

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool zero_width() const { return lower == upper; }
  bool covers(double v) const { return lower <= v && v <= upper; }  // closed
};

// Legacy semantics reproduce the upstream implementation that errors on zero
// sample variance; Repaired returns the zero-width interval instead.
enum class CiSemantics { Legacy, Repaired };

struct CiSpec {
  int k = 15;                // subsampling repetitions
  double split_ratio = 0.8;  // train fraction within the subsampled set
  double level = 0.95;
  double c = 0.0;  // variance correction term; 0 for the naive method

  void validate() const {
    require(k >= 2, Errc::config, "k must be >= 2");
    require(split_ratio > 0.0 && split_ratio < 1.0, Errc::config,
            "split_ratio must lie in (0,1)");
    require(level > 0.0 && level < 1.0, Errc::config, "level must lie in (0,1)");
    require(c >= 0.0 && std::isfinite(c), Errc::config, "c must be >= 0");
  }
};

struct CiOutcome {
  std::optional<Interval> interval;
  std::optional<Failure> failure;

  bool ok() const { return interval.has_value(); }
};

// t-interval around the mean estimate with half-width
// t_{(1+level)/2, k-1} * sqrt((1/k + c) * S^2).
inline CiOutcome ci_interval(std::span<const double> estimates, const CiSpec& spec,
                             CiSemantics semantics) {
  spec.validate();
  require(estimates.size() == static_cast<std::size_t>(spec.k), Errc::config,
          "estimate count does not match spec.k");
  const double m = mean(estimates);
  const double s2 = sample_variance(estimates);
  if (s2 == 0.0 && semantics == CiSemantics::Legacy) {
    CiOutcome out;
    out.failure = Failure{FailureCause::Calculation, "zero variance: data are constant"};
    return out;
  }
  const double tq =
      student_t_quantile(0.5 * (1.0 + spec.level), static_cast<double>(spec.k - 1));
  const double half = tq * std::sqrt((1.0 / static_cast<double>(spec.k) + spec.c) * s2);
  CiOutcome out;
  out.interval = Interval{m - half, m + half};
  return out;
}

// ---------------------------------------------------------------------------
// Repeated subsampling of a training set: k random splits, model fit on the
// split_ratio share, AUC on the rest. Folds whose evaluation part is
// single-class are redrawn, up to 100 retries each.

inline std::vector<double> subsample_auc_estimates(const ClassifData& d_train, int k,
                                                   double split_ratio,
                                                   double min_impurity_decrease, Rng& rng) {
  require(d_train.size() >= 5, Errc::config, "training set too small to subsample");
  const std::size_t n = d_train.size();
  auto n_fit = static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(n)));
  n_fit = std::clamp<std::size_t>(n_fit, 1, n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(k));
  for (int rep = 0; rep < k; ++rep) {
    bool done = false;
    for (int attempt = 0; attempt < 100 && !done; ++attempt) {
      rng.shuffle(std::span<std::size_t>(idx));
      ClassifData fit_part;
      std::vector<double> eval_scores;
      std::vector<int> eval_labels;
      int eval_pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < n_fit) {
          fit_part.z.push_back(d_train.z[idx[i]]);
          fit_part.y.push_back(d_train.y[idx[i]]);
        } else {
          eval_labels.push_back(d_train.y[idx[i]]);
          eval_pos += d_train.y[idx[i]];
        }
      }
      if (eval_pos == 0 || static_cast<std::size_t>(eval_pos) == eval_labels.size()) {
        continue;  // single-class evaluation fold, redraw
      }
      const StumpModel model = fit_stump(fit_part, min_impurity_decrease);
      eval_scores.reserve(eval_labels.size());
      for (std::size_t i = n_fit; i < n; ++i) {
        eval_scores.push_back(model.predict(d_train.z[idx[i]]));
      }
      estimates.push_back(auc(eval_scores, eval_labels));
      done = true;
    }
    require(done, Errc::degenerate_folds,
            "could not draw a two-class evaluation fold in 100 attempts");
  }
  return estimates;
}

// ---------------------------------------------------------------------------
// Coverage study. Per iteration: generate a population, hold out a large
// test part to approximate the true AUC, subsample the training part for the
// interval estimates, then record coverage verdicts for the naive method N
// (c = 0, legacy semantics), the corrected method C, and N with the
// zero-width repair.

struct CiStudyConfig {
  std::size_t n_iter = 1000;
  std::size_t n_total = 500;
  double beta = 0.3;
  double min_impurity_decrease = 0.04;  // the failure-rate knob; see docs/calibration.md
  double test_fraction = 0.8;           // population share approximating the truth
  CiSpec spec{15, 0.8, 0.95, 0.0};      // c set per method below
  double c_corrected = 0.25;            // test/train ratio of the inner subsampling
  std::uint64_t master_seed = 0;
  unsigned workers = 1;

  void validate() const {
    require(n_iter >= 1, Errc::config, "n_iter must be >= 1");
    require(n_total >= 50, Errc::config, "n_total must be >= 50");
    require(std::isfinite(beta), Errc::config, "beta must be finite");
    require(min_impurity_decrease >= 0.0, Errc::config,
            "min_impurity_decrease must be >= 0");
    require(test_fraction > 0.0 && test_fraction < 1.0, Errc::config,
            "test_fraction must lie in (0,1)");
    require(c_corrected > 0.0, Errc::config, "c for the corrected method must be > 0");
    require(workers >= 1, Errc::config, "workers must be >= 1");
    CiSpec s = spec;
    s.validate();
  }
};

struct CiIterationRecord {
  double true_auc = 0.0;
  std::vector<double> auc_estimates;
  CiOutcome interval_n;       // legacy semantics
  CiOutcome interval_c;
  Interval interval_n_repaired;
  CoverageVerdict covers_n;   // undefined iff interval_n failed
  CoverageVerdict covers_c;
  CoverageVerdict covers_n_repaired;
};

struct CiCoverageRow {
  double discard_single = 0.0;
  double discard_all = 0.0;
  double count_noncover = 0.0;
  double zero_width = 0.0;
};

struct CiStudyResult {
  std::vector<CiIterationRecord> records;
  CiCoverageRow coverage_n;
  CiCoverageRow coverage_c;
  double failure_prop_n = 0.0;
  std::size_t n_defined_n = 0;
  std::uint64_t table_digest = 0;  // canonical verdict-grid json
};

inline CiIterationRecord run_ci_iteration(const CiStudyConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const ClassifData population = generate_classif_data(config.beta, config.n_total, rng);

  // Outer split: large test part approximates the truth, the rest is D_train.
  const std::size_t n = population.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_test =
      static_cast<std::size_t>(std::floor(config.test_fraction * static_cast<double>(n)));
  ClassifData d_test;
  ClassifData d_train;
  for (std::size_t i = 0; i < n; ++i) {
    auto& part = i < n_test ? d_test : d_train;
    part.z.push_back(population.z[idx[i]]);
    part.y.push_back(population.y[idx[i]]);
  }

  CiIterationRecord rec;
  const StumpModel model = fit_stump(d_train, config.min_impurity_decrease);
  std::vector<double> test_scores;
  test_scores.reserve(d_test.size());
  for (double z : d_test.z) test_scores.push_back(model.predict(z));
  rec.true_auc = auc(test_scores, d_test.y);

  rec.auc_estimates = subsample_auc_estimates(
      d_train, config.spec.k, config.spec.split_ratio, config.min_impurity_decrease, rng);

  CiSpec spec_n = config.spec;
  spec_n.c = 0.0;
  CiSpec spec_c = config.spec;
  spec_c.c = config.c_corrected;

  rec.interval_n = ci_interval(rec.auc_estimates, spec_n, CiSemantics::Legacy);
  rec.interval_c = ci_interval(rec.auc_estimates, spec_c, CiSemantics::Repaired);
  const CiOutcome repaired = ci_interval(rec.auc_estimates, spec_n, CiSemantics::Repaired);
  rec.interval_n_repaired = *repaired.interval;

  rec.covers_n.defined = rec.interval_n.ok();
  rec.covers_n.covers = rec.interval_n.ok() && rec.interval_n.interval->covers(rec.true_auc);
  rec.covers_c.defined = true;
  rec.covers_c.covers = rec.interval_c.interval->covers(rec.true_auc);
  rec.covers_n_repaired.defined = true;
  rec.covers_n_repaired.covers = rec.interval_n_repaired.covers(rec.true_auc);
  return rec;
}

inline CiStudyResult run_ci_study(const CiStudyConfig& config) {
  config.validate();
  CiStudyResult result;
  result.records.resize(config.n_iter);
  parallel_for(config.n_iter, config.workers, [&](std::size_t i) {
    result.records[i] = run_ci_iteration(config, derive_seed(config.master_seed, i));
  });

  // Verdict grid: methods x iterations with 1/0 coverage indicators; N's
  // failures stay failures. Aggregation then runs through the same machinery
  // as any other study.
  std::vector<CellEntry> entries;
  std::vector<DatasetId> iter_ids;
  entries.reserve(3 * config.n_iter);
  for (std::size_t i = 0; i < config.n_iter; ++i) {
    const auto& rec = result.records[i];
    const DatasetId id = std::to_string(i + 1);
    iter_ids.push_back(id);
    if (rec.interval_n.ok()) {
      entries.push_back({"N", id, RunOutcome::success(rec.covers_n.covers ? 1.0 : 0.0)});
    } else {
      entries.push_back(
          {"N", id, RunOutcome::failed(rec.interval_n.failure->kind,
                                       rec.interval_n.failure->detail)});
    }
    entries.push_back({"C", id, RunOutcome::success(rec.covers_c.covers ? 1.0 : 0.0)});
    entries.push_back(
        {"N_zero_width", id,
         RunOutcome::success(rec.covers_n_repaired.covers ? 1.0 : 0.0)});
  }
  MeasureSpec cover_measure{"coverage", Direction::CloserToTarget, config.spec.level};
  const ResultTable table = build_table({"N", "C", "N_zero_width"}, iter_ids, entries,
                                        cover_measure);

  const std::vector<MethodId> nc{"N", "C"};
  const auto all = aggregate_discard_all(table, std::span<const MethodId>(nc));
  const auto single_n = aggregate_discard_single(table, "N");
  const auto single_c = aggregate_discard_single(table, "C");

  std::vector<CoverageVerdict> verdicts_n;
  std::vector<CoverageVerdict> verdicts_c;
  for (const auto& rec : result.records) {
    verdicts_n.push_back(rec.covers_n);
    verdicts_c.push_back(rec.covers_c);
  }

  result.failure_prop_n = failure_proportion(table, "N").overall;
  result.n_defined_n = single_n.n_used;

  result.coverage_n.discard_single = single_n.defined() ? *single_n.value : 0.0;
  result.coverage_n.discard_all = all.at("N").defined() ? *all.at("N").value : 0.0;
  result.coverage_n.count_noncover =
      empirical_coverage(verdicts_n, CoverageHandling::CountAsNonCover);
  result.coverage_n.zero_width = *aggregate_unconditional(table, "N_zero_width").value;

  result.coverage_c.discard_single = single_c.defined() ? *single_c.value : 0.0;
  result.coverage_c.discard_all = all.at("C").defined() ? *all.at("C").value : 0.0;
  result.coverage_c.count_noncover =
      empirical_coverage(verdicts_c, CoverageHandling::CountAsNonCover);
  result.coverage_c.zero_width = result.coverage_c.discard_single;

  result.table_digest = digest64(table_to_json(strip_timing(table)).dump());
  return result;
}

}  // namespace failbench
