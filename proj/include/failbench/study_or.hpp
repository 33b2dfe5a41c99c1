#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "failbench/aggregate.hpp"
#include "failbench/config.hpp"
#include "failbench/core.hpp"
#include "failbench/engine.hpp"
#include "failbench/pipeline.hpp"
#include "failbench/report.hpp"
#include "failbench/rng.hpp"
#include "failbench/stats.hpp"

namespace failbench {

// 2x2 exposure x outcome counts; n11 = (X=1, Y=1), n10 = (X=1, Y=0),
// n01 = (X=0, Y=1), n00 = (X=0, Y=0).
struct ContingencyTable2x2 {
  std::uint32_t n11 = 0;
  std::uint32_t n10 = 0;
  std::uint32_t n01 = 0;
  std::uint32_t n00 = 0;

  std::uint32_t total() const { return n11 + n10 + n01 + n00; }
};

struct CorrectedTable2x2 {
  double c11 = 0.0;
  double c10 = 0.0;
  double c01 = 0.0;
  double c00 = 0.0;
};

struct OrScenario {
  std::size_t n_obs = 50;
  double true_or = 1.0;
  double p_x = 0.5;   // exposure probability P(X=1)
  double p0 = 0.5;    // baseline outcome probability P(Y=1 | X=0); see docs/calibration.md
  std::size_t n_rep = 100000;

  std::string label() const {
    return "or" + format_double(true_or) + "_px" + format_double(p_x);
  }

  void validate() const {
    require(n_obs > 0, Errc::config, "n_obs must be positive");
    require(std::isfinite(true_or) && true_or > 0.0, Errc::config, "true OR must be > 0");
    require(p_x > 0.0 && p_x < 1.0, Errc::config, "p_x must lie in (0,1)");
    require(p0 > 0.0 && p0 < 1.0, Errc::config, "p0 must lie in (0,1)");
    require(n_rep > 0, Errc::config, "n_rep must be positive");
  }
};

// Draws one table: X ~ Bern(p_x); Y|X=0 ~ Bern(p0); Y|X=1 ~ Bern(p1) with
// p1 chosen so the odds ratio equals true_or.
inline ContingencyTable2x2 simulate_2x2(const OrScenario& sc, Rng& rng) {
  const double omega = sc.p0 / (1.0 - sc.p0);
  const double p1 = sc.true_or * omega / (1.0 + sc.true_or * omega);
  ContingencyTable2x2 t;
  for (std::size_t i = 0; i < sc.n_obs; ++i) {
    const bool x = rng.bernoulli(sc.p_x);
    const bool y = rng.bernoulli(x ? p1 : sc.p0);
    if (x && y) ++t.n11;
    else if (x) ++t.n10;
    else if (y) ++t.n01;
    else ++t.n00;
  }
  return t;
}

inline bool has_sampling_zero(const ContingencyTable2x2& t) {
  return t.n11 == 0 || t.n10 == 0 || t.n01 == 0 || t.n00 == 0;
}

// +0.5 on all four cells, regardless of where (or whether) zeros occur.
inline CorrectedTable2x2 haldane_correct(const ContingencyTable2x2& t) {
  return {t.n11 + 0.5, t.n10 + 0.5, t.n01 + 0.5, t.n00 + 0.5};
}

enum class OrEstimator { Manual, Fisher, Midp, Small, Woolf };

inline std::string or_estimator_name(OrEstimator e) {
  switch (e) {
    case OrEstimator::Manual: return "Manual";
    case OrEstimator::Fisher: return "Fisher";
    case OrEstimator::Midp: return "Midp";
    case OrEstimator::Small: return "Small";
    case OrEstimator::Woolf: return "Woolf";
  }
  return "Manual";
}

// ---------------------------------------------------------------------------
// Fisher's noncentral hypergeometric distribution of N11 conditional on the
// table margins. All weight computations run in log space with running-max
// normalization so n = 50 tables cannot overflow.

struct CondDist {
  int kmin = 0;
  int kmax = 0;
  std::vector<double> log_coef;  // log C(r1,k) + log C(r0,c1-k), k = kmin..kmax
};

inline CondDist cond_dist(const ContingencyTable2x2& t) {
  const int r1 = static_cast<int>(t.n11 + t.n10);
  const int r0 = static_cast<int>(t.n01 + t.n00);
  const int c1 = static_cast<int>(t.n11 + t.n01);
  const int n = r1 + r0;
  CondDist cd;
  cd.kmin = std::max(0, r1 + c1 - n);
  cd.kmax = std::min(r1, c1);
  cd.log_coef.reserve(static_cast<std::size_t>(cd.kmax - cd.kmin + 1));
  for (int k = cd.kmin; k <= cd.kmax; ++k) {
    cd.log_coef.push_back(log_choose(r1, k) + log_choose(r0, c1 - k));
  }
  return cd;
}

// E_psi[N11] under the conditional distribution; allocation-free since this
// sits inside the root-finding hot loop.
inline double cond_mean(const CondDist& cd, double log_psi) {
  const std::size_t n = cd.log_coef.size();
  double max_term = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double lw = cd.log_coef[i] + static_cast<double>(cd.kmin + static_cast<int>(i)) * log_psi;
    if (lw > max_term) max_term = lw;
  }
  double den = 0.0;
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(cd.kmin + static_cast<int>(i));
    const double w = std::exp(cd.log_coef[i] + k * log_psi - max_term);
    den += w;
    num += w * k;
  }
  return num / den;
}

// P(N11 > n11) + 0.5 P(N11 = n11) under the conditional distribution.
inline double midp_statistic(const CondDist& cd, double log_psi, int n11) {
  const std::size_t n = cd.log_coef.size();
  double max_term = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double lw = cd.log_coef[i] + static_cast<double>(cd.kmin + static_cast<int>(i)) * log_psi;
    if (lw > max_term) max_term = lw;
  }
  double den = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = cd.kmin + static_cast<int>(i);
    const double w = std::exp(cd.log_coef[i] + static_cast<double>(k) * log_psi - max_term);
    den += w;
    if (k > n11) s += w;
    else if (k == n11) s += 0.5 * w;
  }
  return s / den;
}

namespace detail {

struct RootResult {
  bool ok = false;
  double log_psi = 0.0;
  double residual = 0.0;
};

// Bisection on log psi over [-10, 10] for a function increasing in psi.
// Residual tolerance 1e-8, iteration cap 200.
template <typename F>
RootResult solve_log_psi(F&& f) {
  constexpr double residual_tol = 1e-8;
  constexpr int max_iter = 200;
  double lo = -10.0;
  double hi = 10.0;
  double flo = f(lo);
  double fhi = f(hi);
  RootResult r;
  if (flo > 0.0 || fhi < 0.0) return r;  // no bracket inside [e^-10, e^10]
  double mid = 0.0;
  double fm = 0.0;
  for (int i = 0; i < max_iter; ++i) {
    mid = 0.5 * (lo + hi);
    fm = f(mid);
    if (std::abs(fm) < 1e-10) break;
    if (fm < 0.0) lo = mid;
    else hi = mid;
  }
  r.log_psi = mid;
  r.residual = std::abs(fm);
  r.ok = r.residual <= residual_tol;
  return r;
}

}  // namespace detail

// Conditional maximum-likelihood OR: psi solving E_psi[N11 | margins] = n11.
// Undefined when n11 sits on the boundary of its conditional support, which
// covers every table with a sampling zero.
inline RunOutcome fisher_cmle(const ContingencyTable2x2& t) {
  const CondDist cd = cond_dist(t);
  const int n11 = static_cast<int>(t.n11);
  if (cd.kmin == cd.kmax) {
    return RunOutcome::failed(FailureCause::Calculation,
                              "degenerate conditional support (zero margin)");
  }
  if (n11 == cd.kmin || n11 == cd.kmax) {
    return RunOutcome::failed(FailureCause::Calculation,
                              "n11 at conditional support boundary");
  }
  const auto r = detail::solve_log_psi(
      [&](double lp) { return cond_mean(cd, lp) - static_cast<double>(n11); });
  if (!r.ok) {
    return RunOutcome::failed(FailureCause::Calculation, "root bracketing exhausted");
  }
  return RunOutcome::success(std::exp(r.log_psi));
}

// Median-unbiased OR from the mid-p equality
// P_psi(N11 > n11) + 0.5 P_psi(N11 = n11) = 0.5.
inline RunOutcome midp_or(const ContingencyTable2x2& t) {
  const CondDist cd = cond_dist(t);
  const int n11 = static_cast<int>(t.n11);
  if (cd.kmin == cd.kmax) {
    return RunOutcome::failed(FailureCause::Calculation,
                              "degenerate conditional support (zero margin)");
  }
  if (n11 == cd.kmin || n11 == cd.kmax) {
    return RunOutcome::failed(FailureCause::Calculation,
                              "n11 at conditional support boundary");
  }
  const auto r = detail::solve_log_psi(
      [&](double lp) { return midp_statistic(cd, lp, n11) - 0.5; });
  if (!r.ok) {
    return RunOutcome::failed(FailureCause::Calculation, "root bracketing exhausted");
  }
  return RunOutcome::success(std::exp(r.log_psi));
}

// Point estimate per estimator. Failure conditions:
//   Manual - any zero cell makes the cross-product 0, infinite, or 0/0.
//   Small  - Jewell adjustment handles zeros in n10/n01 only; a zero in
//            n11/n00 still gives 0, which is unusable on the log scale.
//   Fisher, Midp - boundary of the conditional support.
//   Woolf  - never fails (Haldane-corrected cross-product).
inline RunOutcome estimate_or(OrEstimator estimator, const ContingencyTable2x2& t) {
  switch (estimator) {
    case OrEstimator::Manual: {
      const bool zero_num = t.n11 == 0 || t.n00 == 0;
      const bool zero_den = t.n10 == 0 || t.n01 == 0;
      if (zero_num && zero_den) {
        return RunOutcome::failed(FailureCause::Calculation, "raw estimate 0/0");
      }
      if (zero_den) {
        return RunOutcome::failed(FailureCause::Calculation,
                                  "raw estimate inf (zero cell in denominator)");
      }
      if (zero_num) {
        return RunOutcome::failed(FailureCause::Calculation,
                                  "raw estimate 0 (zero cell in numerator)");
      }
      return RunOutcome::success(
          (static_cast<double>(t.n11) * static_cast<double>(t.n00)) /
          (static_cast<double>(t.n10) * static_cast<double>(t.n01)));
    }
    case OrEstimator::Woolf: {
      const CorrectedTable2x2 c = haldane_correct(t);
      return RunOutcome::success((c.c11 * c.c00) / (c.c10 * c.c01));
    }
    case OrEstimator::Small: {
      const double num = static_cast<double>(t.n11) * static_cast<double>(t.n00);
      if (num == 0.0) {
        return RunOutcome::failed(FailureCause::Calculation,
                                  "raw estimate 0 (n11*n00 = 0)");
      }
      return RunOutcome::success(num / (static_cast<double>(t.n10 + 1) *
                                        static_cast<double>(t.n01 + 1)));
    }
    case OrEstimator::Fisher:
      return fisher_cmle(t);
    case OrEstimator::Midp:
      return midp_or(t);
  }
  return RunOutcome::failed(FailureCause::Calculation, "unknown estimator");
}

// ---------------------------------------------------------------------------
// Study configuration and execution.

inline std::vector<OrScenario> default_or_scenarios(double p0 = 0.5,
                                                    std::size_t n_rep = 100000) {
  std::vector<OrScenario> out;
  for (double px : {0.25, 0.5}) {
    for (double tor : {2.0, 3.0, 4.0, 5.0}) {
      OrScenario sc;
      sc.true_or = tor;
      sc.p_x = px;
      sc.p0 = p0;
      sc.n_rep = n_rep;
      out.push_back(sc);
    }
  }
  return out;
}

// Fallback map of the study: Manual falls back to the corrected cross-product
// only; Fisher and Midp may fall back to it or to Small or Woolf. Together
// with bare Small and Woolf this enumerates nine evaluated pipelines.
inline std::map<MethodId, std::vector<MethodId>> default_or_fallbacks() {
  return {{"Manual", {"Haldane"}},
          {"Fisher", {"Haldane", "Small", "Woolf"}},
          {"Midp", {"Haldane", "Small", "Woolf"}}};
}

inline std::vector<MethodId> or_base_methods() {
  return {"Manual", "Fisher", "Midp", "Small", "Woolf"};
}

// Evaluator for a method id in the study universe; "Haldane" is the
// corrected cross-product used as a fallback stage.
inline RunOutcome evaluate_or_method(const MethodId& id, const ContingencyTable2x2& t) {
  if (id == "Manual") return estimate_or(OrEstimator::Manual, t);
  if (id == "Fisher") return estimate_or(OrEstimator::Fisher, t);
  if (id == "Midp") return estimate_or(OrEstimator::Midp, t);
  if (id == "Small") return estimate_or(OrEstimator::Small, t);
  if (id == "Woolf") return estimate_or(OrEstimator::Woolf, t);
  if (id == "Haldane") {
    const CorrectedTable2x2 c = haldane_correct(t);
    return RunOutcome::success((c.c11 * c.c00) / (c.c10 * c.c01));
  }
  raise(Errc::unknown_method, "unknown OR method '" + id + "'");
}

struct OrStudyConfig {
  std::vector<OrScenario> scenarios = default_or_scenarios();
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  bool signed_ranks = false;  // rank by signed log bias instead of |log bias|
  std::size_t max_fallbacks = 1;
  std::vector<MethodId> base_methods = or_base_methods();
  std::map<MethodId, std::vector<MethodId>> fallback_map = default_or_fallbacks();
  CellSink sink;  // optional per-cell stream

  void validate() const {
    require(!scenarios.empty(), Errc::config, "no scenarios configured");
    for (const auto& sc : scenarios) sc.validate();
    require(workers >= 1, Errc::config, "workers must be >= 1");
    require(!base_methods.empty(), Errc::config, "no base methods configured");
  }
};

struct OrScenarioResult {
  OrScenario scenario;
  double zero_proportion = 0.0;
  double zero_mc_se = 0.0;
  std::map<MethodId, AggregateValue> bias_single;    // per estimator
  std::map<MethodId, AggregateValue> bias_all;       // shared joint success set
  std::map<MethodId, double> failure_prop;           // per estimator
  std::map<MethodId, int> ranks_single;
  std::map<MethodId, int> ranks_all;
  std::map<MethodId, AggregateValue> bias_pipeline;  // unconditional per pipeline
  std::map<MethodId, double> pipeline_failure_prop;
  std::map<MethodId, int> ranks_pipeline;
  std::vector<MethodId> unranked;  // undefined aggregates excluded from ranks
  RankDivergence divergence;       // discard-single vs discard-all
  std::map<MethodId, BoxColumn> box;  // log-deviation distribution per estimator
  std::size_t n_used_all = 0;
  std::uint64_t grid_digest = 0;      // canonical (timing-stripped) grid json
  std::size_t grid_bytes = 0;
  std::uint64_t pipeline_digest = 0;
  std::size_t pipeline_bytes = 0;
};

struct OrStudyResult {
  std::vector<OrScenarioResult> scenarios;
  std::vector<Pipeline> pipelines;  // full disclosed list
  std::vector<std::string> divergent_scenarios;
  MeasureSpec rank_measure;
};

namespace detail {

// Ranks over the defined subset; undefined entries are reported, not ranked.
inline std::pair<std::map<MethodId, int>, std::vector<MethodId>> rank_defined(
    const std::map<MethodId, AggregateValue>& values, const MeasureSpec& measure) {
  std::map<MethodId, AggregateValue> defined;
  std::vector<MethodId> excluded;
  for (const auto& [m, a] : values) {
    if (a.defined()) defined.emplace(m, a);
    else excluded.push_back(m);
  }
  std::map<MethodId, int> ranks;
  if (!defined.empty()) ranks = rank_methods(defined, measure);
  return {std::move(ranks), std::move(excluded)};
}

}  // namespace detail

inline OrStudyResult run_or_study(const OrStudyConfig& config) {
  config.validate();
  OrStudyResult result;
  result.rank_measure =
      MeasureSpec{"log_bias", config.signed_ranks ? Direction::LowerBetter
                                                  : Direction::LowerAbsBetter};
  result.pipelines = expand_pipelines(std::span<const MethodId>(config.base_methods),
                                      config.fallback_map, config.max_fallbacks);

  // Method universe for the grid: the bases plus every fallback stage.
  std::vector<MethodId> universe = config.base_methods;
  for (const auto& p : result.pipelines) {
    for (const auto& s : p.stages) {
      if (std::find(universe.begin(), universe.end(), s) == universe.end()) {
        universe.push_back(s);
      }
    }
  }

  for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
    const OrScenario& sc = config.scenarios[si];
    OrScenarioResult sr;
    sr.scenario = sc;

    // Data generation is seeded per repetition, independent of methods, so
    // all estimators see the same tables.
    std::vector<GridDataset<ContingencyTable2x2>> datasets;
    datasets.reserve(sc.n_rep);
    std::size_t zero_count = 0;
    for (std::size_t i = 0; i < sc.n_rep; ++i) {
      Rng rng(derive_seed(config.master_seed, 0xDA7AULL, si, i));
      ContingencyTable2x2 t = simulate_2x2(sc, rng);
      if (has_sampling_zero(t)) ++zero_count;
      datasets.push_back({std::to_string(i + 1), t});
    }
    sr.zero_proportion = static_cast<double>(zero_count) / static_cast<double>(sc.n_rep);
    sr.zero_mc_se = std::sqrt(sr.zero_proportion * (1.0 - sr.zero_proportion) /
                              static_cast<double>(sc.n_rep));

    std::vector<GridMethod<ContingencyTable2x2>> methods;
    for (const auto& id : universe) {
      methods.push_back({id, [id](const ContingencyTable2x2& t, Rng&, CellContext&) {
                           const RunOutcome o = evaluate_or_method(id, t);
                           // Re-raise failures so the engine records the detail text.
                           if (!o.is_success()) throw std::runtime_error(o.failure->detail);
                           return *o.value;
                         }});
    }
    RunConfig rc;
    rc.master_seed = derive_seed(config.master_seed, 0x621DULL, si);
    rc.workers = config.workers;
    MeasureSpec grid_measure{"or_estimate", Direction::CloserToTarget, sc.true_or};
    const ResultTable pure =
        run_grid(methods, datasets, rc, config.sink, grid_measure);

    // Pipelines evaluated from the pure grid: identical semantics to running
    // the fallback chain live, since stage outcomes are deterministic per cell.
    Evaluator memo = [&pure](const MethodId& m, const DatasetId& d) -> RunOutcome {
      return pure.cell(m, d);
    };
    std::vector<CellEntry> pipe_entries;
    pipe_entries.reserve(result.pipelines.size() * datasets.size());
    std::vector<MethodId> pipe_ids;
    for (const auto& p : result.pipelines) pipe_ids.push_back(p.label);
    for (const auto& p : result.pipelines) {
      for (const auto& d : datasets) {
        PipelineOutcome po = run_pipeline(p, memo, d.id);
        pipe_entries.push_back({p.label, d.id, std::move(po.outcome)});
      }
    }
    std::vector<DatasetId> dataset_ids;
    for (const auto& d : datasets) dataset_ids.push_back(d.id);
    ResultTable pipe_table =
        build_table(pipe_ids, dataset_ids, pipe_entries, grid_measure);

    // Log-scale bias as the summary statistic.
    const double truth = sc.true_or;
    SummaryFn log_bias_stat = [truth](std::span<const double> vals) {
      return log_bias(vals, truth);
    };

    const std::span<const MethodId> bases(config.base_methods);
    sr.bias_all = aggregate_discard_all(pure, bases, log_bias_stat);
    for (const auto& m : config.base_methods) {
      sr.bias_single[m] = aggregate_discard_single(pure, m, log_bias_stat);
      sr.failure_prop[m] = failure_proportion(pure, m).overall;
      if (sr.bias_all.count(m)) sr.n_used_all = sr.bias_all.at(m).n_used;
    }
    for (const auto& p : result.pipelines) {
      sr.bias_pipeline[p.label] = aggregate_unconditional(pipe_table, p.label, log_bias_stat);
      sr.pipeline_failure_prop[p.label] = failure_proportion(pipe_table, p.label).overall;
    }

    auto [rs, ex_s] = detail::rank_defined(sr.bias_single, result.rank_measure);
    auto [ra, ex_a] = detail::rank_defined(sr.bias_all, result.rank_measure);
    auto [rp, ex_p] = detail::rank_defined(sr.bias_pipeline, result.rank_measure);
    sr.ranks_single = std::move(rs);
    sr.ranks_all = std::move(ra);
    sr.ranks_pipeline = std::move(rp);
    sr.unranked = std::move(ex_p);
    sr.unranked.insert(sr.unranked.end(), ex_s.begin(), ex_s.end());
    sr.unranked.insert(sr.unranked.end(), ex_a.begin(), ex_a.end());

    // Divergence over methods ranked under both bases.
    std::map<MethodId, int> common_s;
    std::map<MethodId, int> common_a;
    for (const auto& [m, r] : sr.ranks_single) {
      auto it = sr.ranks_all.find(m);
      if (it != sr.ranks_all.end()) {
        common_s[m] = r;
        common_a[m] = it->second;
      }
    }
    if (!common_s.empty()) {
      sr.divergence =
          emit_rank_divergence(common_s, common_a, "discard_single", "discard_all");
      if (sr.divergence.max_abs_shift >= 1) {
        result.divergent_scenarios.push_back(sc.label());
      }
    }

    // Box columns of log deviations per estimator, failures shown alongside.
    for (const auto& m : config.base_methods) {
      const std::size_t mi = pure.method_index(m);
      std::vector<double> devs;
      std::size_t fails = 0;
      for (const RunOutcome& o : pure.row(mi)) {
        if (o.is_success()) devs.push_back(std::log(*o.value) - std::log(truth));
        else ++fails;
      }
      sr.box[m] = BoxColumn{m, box_stats(devs), fails};
    }

    // Canonical digests of the timing-stripped grids; determinism evidence
    // without persisting the full per-cell payloads.
    const std::string pure_json = table_to_json(strip_timing(pure)).dump();
    sr.grid_digest = digest64(pure_json);
    sr.grid_bytes = pure_json.size();
    const std::string pipe_json = table_to_json(strip_timing(pipe_table)).dump();
    sr.pipeline_digest = digest64(pipe_json);
    sr.pipeline_bytes = pipe_json.size();

    result.scenarios.push_back(std::move(sr));
  }
  return result;
}

}  // namespace failbench
