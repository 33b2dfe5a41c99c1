#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "failbench/core.hpp"
#include "failbench/rng.hpp"

namespace failbench {

struct RuntimeSubset {
  double fraction = 1.0;  // in (0, 1]
  std::uint64_t selection_seed = 0;
};

struct RunConfig {
  std::uint64_t master_seed = 0;
  std::optional<Duration> budget;  // per-cell wall-clock budget
  unsigned workers = 1;
  std::map<MethodId, RuntimeSubset> runtime_subset;

  void validate() const {
    require(workers >= 1, Errc::config, "workers must be >= 1");
    for (const auto& [m, rs] : runtime_subset) {
      require(rs.fraction > 0.0 && rs.fraction <= 1.0, Errc::config,
              "runtime subset fraction for '" + m + "' must lie in (0,1]");
    }
    if (budget) {
      require(budget->count() > 0, Errc::config, "budget must be positive");
    }
  }
};

// Per-cell seed: fixed mixing of (master_seed, method index, dataset index).
// See rng.hpp; the derivation is part of the replay contract.
inline std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t method_index,
                               std::size_t dataset_index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(method_index),
                     static_cast<std::uint64_t>(dataset_index));
}

namespace detail {

// Thrown by CellContext::checkpoint when the budget has elapsed; converted to
// a Runtime failure by execute_cell, never visible to callers.
struct BudgetExceeded {};

}  // namespace detail

// Handed to every method invocation. Budget enforcement is cooperative:
// long-running methods call checkpoint(); a hard wall-clock check runs at
// cell completion either way.
class CellContext {
 public:
  explicit CellContext(std::optional<Duration> budget)
      : start_(std::chrono::steady_clock::now()), budget_(budget) {}

  void checkpoint() const {
    if (budget_ && elapsed() > *budget_) throw detail::BudgetExceeded{};
  }

  // Attach a note to a successful outcome, e.g. a convergence warning that
  // the study chooses not to treat as failure.
  void annotate(std::string note) { note_ = std::move(note); }

  Duration elapsed() const {
    return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start_);
  }

  const std::string& note() const { return note_; }
  std::optional<Duration> budget() const { return budget_; }

 private:
  std::chrono::steady_clock::time_point start_;
  std::optional<Duration> budget_;
  std::string note_;
};

template <typename D>
struct GridMethod {
  MethodId id;
  // Must be a deterministic function of (dataset, rng seed).
  std::function<double(const D&, Rng&, CellContext&)> fn;
};

template <typename D>
struct GridDataset {
  DatasetId id;
  D data;
};

// Runs one method on one dataset. Never throws for method-level errors:
// every abnormal termination becomes a typed failure cell, with the message
// stored for later interplay analysis.
template <typename D>
RunOutcome execute_cell(const std::function<double(const D&, Rng&, CellContext&)>& fn,
                        const D& dataset, std::uint64_t seed,
                        std::optional<Duration> budget) {
  CellContext ctx(budget);
  Rng rng(seed);
  RunOutcome out;
  try {
    const double v = fn(dataset, rng, ctx);
    const Duration elapsed = ctx.elapsed();
    if (budget && elapsed > *budget) {
      return RunOutcome::failed(FailureCause::Runtime, "budget exceeded at completion",
                                elapsed);
    }
    if (!std::isfinite(v)) {
      // Non-finite estimates are failures by definition; keep the numeric text.
      return RunOutcome::failed(FailureCause::Calculation,
                                "non-finite estimate " + std::to_string(v), elapsed);
    }
    out = RunOutcome::success(v, elapsed);
    out.note = ctx.note();
    return out;
  } catch (const detail::BudgetExceeded&) {
    return RunOutcome::failed(FailureCause::Runtime, "budget exceeded at checkpoint",
                              ctx.elapsed());
  } catch (const std::bad_alloc&) {
    return RunOutcome::failed(FailureCause::Memory, "allocation failure", ctx.elapsed());
  } catch (const std::exception& e) {
    const char* what = e.what();
    return RunOutcome::failed(FailureCause::Calculation,
                              (what != nullptr && *what != '\0') ? what : "unspecified error",
                              ctx.elapsed());
  } catch (...) {
    return RunOutcome::failed(FailureCause::Calculation, "unknown error", ctx.elapsed());
  }
}

// Uniformly random ceil(fraction * n) datasets, drawn from selection_seed
// alone so the choice cannot correlate with observed runtimes.
inline std::vector<DatasetId> select_runtime_subset(std::span<const DatasetId> datasets,
                                                    double fraction,
                                                    std::uint64_t selection_seed) {
  require(!datasets.empty(), Errc::empty_datasets, "runtime subset of no datasets");
  require(fraction > 0.0 && fraction <= 1.0, Errc::config, "fraction must lie in (0,1]");
  const auto n = datasets.size();
  const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(selection_seed, 0x5b5e7ULL));
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(std::min(take, n));
  std::sort(idx.begin(), idx.end());
  std::vector<DatasetId> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(datasets[i]);
  return out;
}

// Runs fn(i) for i in [0, n) on `workers` threads. Exceptions of any worker
// are rethrown on the caller thread.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  threads.reserve(spawn);
  for (unsigned t = 0; t < spawn; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Streaming sink for per-cell results (newline-delimited JSON logs and the
// like). Called as cells complete, serialized by an internal mutex.
using CellSink = std::function<void(const MethodId&, const DatasetId&, const RunOutcome&)>;

// Executes the full grid. Cell (m, d) depends only on (method, dataset,
// derived seed, budget); the worker count changes scheduling, never results.
template <typename D>
ResultTable run_grid(const std::vector<GridMethod<D>>& methods,
                     const std::vector<GridDataset<D>>& datasets, const RunConfig& config,
                     const CellSink& sink = {}, MeasureSpec measure = {}) {
  config.validate();
  require(!methods.empty(), Errc::config, "grid needs at least one method");
  require(!datasets.empty(), Errc::config, "grid needs at least one dataset");

  std::vector<MethodId> method_ids;
  method_ids.reserve(methods.size());
  for (const auto& m : methods) method_ids.push_back(m.id);
  std::vector<DatasetId> dataset_ids;
  dataset_ids.reserve(datasets.size());
  for (const auto& d : datasets) dataset_ids.push_back(d.id);

  const std::size_t nd = dataset_ids.size();
  std::vector<RunOutcome> cells(methods.size() * nd);

  // Cells excluded by design under a runtime subset are never executed.
  std::vector<std::vector<bool>> included(methods.size());
  std::map<MethodId, std::vector<DatasetId>> manifest;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    auto it = config.runtime_subset.find(method_ids[m]);
    if (it == config.runtime_subset.end()) continue;
    const auto chosen =
        select_runtime_subset(dataset_ids, it->second.fraction, it->second.selection_seed);
    std::vector<bool> mask(nd, false);
    for (const auto& d : chosen) {
      // Linear scan is fine: subsets are configured per method, not per cell.
      for (std::size_t j = 0; j < nd; ++j) {
        if (dataset_ids[j] == d) {
          mask[j] = true;
          break;
        }
      }
    }
    included[m] = std::move(mask);
    manifest[method_ids[m]] = chosen;
  }

  std::mutex sink_mutex;
  parallel_for(cells.size(), config.workers, [&](std::size_t i) {
    const std::size_t m = i / nd;
    const std::size_t d = i % nd;
    RunOutcome out;
    if (!included[m].empty() && !included[m][d]) {
      out = RunOutcome::failed(FailureCause::Runtime, "excluded by design");
    } else {
      out = execute_cell<D>(methods[m].fn, datasets[d].data,
                            cell_seed(config.master_seed, m, d), config.budget);
    }
    if (sink) {
      std::lock_guard lock(sink_mutex);
      sink(method_ids[m], dataset_ids[d], out);
    }
    cells[i] = std::move(out);
  });

  ResultTable table(std::move(method_ids), std::move(dataset_ids), std::move(cells),
                    std::move(measure));
  table.set_subset_manifest(std::move(manifest));
  return table;
}

}  // namespace failbench
