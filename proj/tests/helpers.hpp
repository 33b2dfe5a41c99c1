#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// implement the defining equations directly (grid search, pair counting,
// naive summation) and stay independent of the library's solution paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "failbench/core.hpp"
#include "failbench/rng.hpp"
#include "failbench/study_or.hpp"

namespace fbtest {

using namespace failbench;

// Fictive simulation study: estimates of a quantity whose true value is 4.
// Method 1 fails on repetition 3, Method 3 on repetition 4.
inline ResultTable table_1a() {
  std::vector<CellEntry> entries = {
      {"Method 1", "1", RunOutcome::success(3.89)},
      {"Method 1", "2", RunOutcome::success(3.78)},
      {"Method 1", "3", RunOutcome::failed(FailureCause::Calculation, "non-convergence")},
      {"Method 1", "4", RunOutcome::success(3.75)},
      {"Method 2", "1", RunOutcome::success(4.23)},
      {"Method 2", "2", RunOutcome::success(4.13)},
      {"Method 2", "3", RunOutcome::success(3.69)},
      {"Method 2", "4", RunOutcome::success(4.24)},
      {"Method 3", "1", RunOutcome::success(4.08)},
      {"Method 3", "2", RunOutcome::success(4.11)},
      {"Method 3", "3", RunOutcome::success(4.23)},
      {"Method 3", "4", RunOutcome::failed(FailureCause::Calculation, "non-convergence")},
  };
  return build_table({"Method 1", "Method 2", "Method 3"}, {"1", "2", "3", "4"}, entries,
                     MeasureSpec{"estimate", Direction::CloserToTarget, 4.0});
}

// Fictive benchmark study: accuracies on four data sets, same failure pattern.
inline ResultTable table_1b() {
  std::vector<CellEntry> entries = {
      {"Method 1", "1", RunOutcome::success(0.85)},
      {"Method 1", "2", RunOutcome::success(0.90)},
      {"Method 1", "3", RunOutcome::failed(FailureCause::Calculation, "not applicable")},
      {"Method 1", "4", RunOutcome::success(0.78)},
      {"Method 2", "1", RunOutcome::success(0.88)},
      {"Method 2", "2", RunOutcome::success(0.91)},
      {"Method 2", "3", RunOutcome::success(0.80)},
      {"Method 2", "4", RunOutcome::success(0.76)},
      {"Method 3", "1", RunOutcome::success(0.87)},
      {"Method 3", "2", RunOutcome::success(0.86)},
      {"Method 3", "3", RunOutcome::success(0.82)},
      {"Method 3", "4", RunOutcome::failed(FailureCause::Memory, "out of memory")},
  };
  return build_table({"Method 1", "Method 2", "Method 3"}, {"1", "2", "3", "4"}, entries,
                     MeasureSpec{"accuracy", Direction::HigherBetter});
}

// Random table generator for property suites: ~20% failure cells, values in
// (0, 1], occasional notes.
inline ResultTable random_table(Rng& rng, std::size_t n_methods = 0, std::size_t n_datasets = 0,
                                double failure_rate = 0.2) {
  if (n_methods == 0) n_methods = 1 + rng.uniform_below(5);
  if (n_datasets == 0) n_datasets = 1 + rng.uniform_below(8);
  std::vector<MethodId> methods;
  std::vector<DatasetId> datasets;
  for (std::size_t m = 0; m < n_methods; ++m) methods.push_back("m" + std::to_string(m + 1));
  for (std::size_t d = 0; d < n_datasets; ++d) datasets.push_back("d" + std::to_string(d + 1));
  std::vector<CellEntry> entries;
  for (const auto& m : methods) {
    for (const auto& d : datasets) {
      RunOutcome o;
      if (rng.uniform01() < failure_rate) {
        const auto kind = static_cast<FailureCause>(rng.uniform_below(3));
        o = RunOutcome::failed(kind, "synthetic failure");
      } else {
        o = RunOutcome::success(0.001 + 0.999 * rng.uniform01());
        if (rng.uniform01() < 0.05) o.note = "warning recorded";
      }
      o.elapsed = Duration{static_cast<std::int64_t>(rng.uniform_below(5'000'000))};
      entries.push_back({m, d, o});
    }
  }
  return build_table(methods, datasets, entries, MeasureSpec{"score", Direction::HigherBetter});
}

// ---------------------------------------------------------------------------
// chi-square survival function via the regularized incomplete gamma
// (series + continued fraction), test-only.

inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lga = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lga);
  }
  // continued fraction for Q, Lentz
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lga) * h;
  return 1.0 - q;
}

inline double chi2_sf(double stat, double df) { return 1.0 - gamma_p(df / 2.0, stat / 2.0); }

// ---------------------------------------------------------------------------
// Brute-force oracles for the conditional OR estimators: evaluate the
// defining statistic over a log-psi grid on [-10, 10] at step 1e-4 and take
// the minimizing psi. Written against the raw definition, no shared code
// with the library solver.

struct OrOracleDist {
  int kmin = 0, kmax = 0;
  std::vector<double> logc;
};

inline OrOracleDist oracle_dist(const ContingencyTable2x2& t) {
  const int r1 = static_cast<int>(t.n11 + t.n10);
  const int r0 = static_cast<int>(t.n01 + t.n00);
  const int c1 = static_cast<int>(t.n11 + t.n01);
  const int n = r1 + r0;
  OrOracleDist d;
  d.kmin = std::max(0, r1 + c1 - n);
  d.kmax = std::min(r1, c1);
  for (int k = d.kmin; k <= d.kmax; ++k) {
    d.logc.push_back(std::lgamma(r1 + 1.0) - std::lgamma(k + 1.0) -
                     std::lgamma(r1 - k + 1.0) + std::lgamma(r0 + 1.0) -
                     std::lgamma(c1 - k + 1.0) - std::lgamma(r0 - (c1 - k) + 1.0));
  }
  return d;
}

inline double oracle_cond_mean(const OrOracleDist& d, double log_psi) {
  double max_term = -1e300;
  std::vector<double> lw(d.logc.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    lw[i] = d.logc[i] + (d.kmin + static_cast<int>(i)) * log_psi;
    max_term = std::max(max_term, lw[i]);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const double w = std::exp(lw[i] - max_term);
    den += w;
    num += w * (d.kmin + static_cast<int>(i));
  }
  return num / den;
}

inline double oracle_midp_stat(const OrOracleDist& d, double log_psi, int n11) {
  double max_term = -1e300;
  std::vector<double> lw(d.logc.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    lw[i] = d.logc[i] + (d.kmin + static_cast<int>(i)) * log_psi;
    max_term = std::max(max_term, lw[i]);
  }
  double above = 0.0, at = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const double w = std::exp(lw[i] - max_term);
    const int k = d.kmin + static_cast<int>(i);
    den += w;
    if (k > n11) above += w;
    if (k == n11) at += w;
  }
  return (above + 0.5 * at) / den;
}

// Grid search minimizing |E_psi[N11] - n11| over log psi in [-10, 10],
// step 1e-4.
inline double oracle_fisher_or(const ContingencyTable2x2& t) {
  const OrOracleDist d = oracle_dist(t);
  const double target = static_cast<double>(t.n11);
  double best_lp = 0.0;
  double best = 1e300;
  for (long i = -100000; i <= 100000; ++i) {
    const double lp = static_cast<double>(i) * 1e-4;
    const double diff = std::abs(oracle_cond_mean(d, lp) - target);
    if (diff < best) {
      best = diff;
      best_lp = lp;
    }
  }
  return std::exp(best_lp);
}

inline double oracle_midp_or(const ContingencyTable2x2& t) {
  const OrOracleDist d = oracle_dist(t);
  double best_lp = 0.0;
  double best = 1e300;
  for (long i = -100000; i <= 100000; ++i) {
    const double lp = static_cast<double>(i) * 1e-4;
    const double diff = std::abs(oracle_midp_stat(d, lp, static_cast<int>(t.n11)) - 0.5);
    if (diff < best) {
      best = diff;
      best_lp = lp;
    }
  }
  return std::exp(best_lp);
}

// AUC by explicit pair counting, the defining form.
inline double oracle_auc(std::span<const double> scores, std::span<const int> labels) {
  double concordant = 0.0, tied = 0.0, total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      total += 1.0;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) tied += 1.0;
    }
  }
  return (concordant + 0.5 * tied) / total;
}

// Random zero-free 2x2 table with the given total.
inline ContingencyTable2x2 random_zero_free_table(Rng& rng, std::uint32_t total = 50) {
  for (;;) {
    // Compositions with all cells >= 1.
    std::uint32_t n11 = 1 + static_cast<std::uint32_t>(rng.uniform_below(total - 3));
    std::uint32_t n10 = 1 + static_cast<std::uint32_t>(rng.uniform_below(total - n11 - 2));
    std::uint32_t n01 = 1 + static_cast<std::uint32_t>(rng.uniform_below(total - n11 - n10 - 1));
    std::uint32_t n00 = total - n11 - n10 - n01;
    if (n00 >= 1) return {n11, n10, n01, n00};
  }
}

}  // namespace fbtest
