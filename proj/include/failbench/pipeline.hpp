#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "failbench/core.hpp"

namespace failbench {

// Ordered method sequence with first-success semantics: run stage 1; on
// failure move to stage 2; and so on. Mirrors how a real user switches
// methods when one fails.
struct Pipeline {
  std::vector<MethodId> stages;
  std::string label;  // "m1/m2/..." notation
};

inline Pipeline make_pipeline(std::vector<MethodId> stages) {
  require(!stages.empty(), Errc::empty_method_list, "pipeline needs at least one stage");
  std::unordered_set<std::string> seen;
  std::string label;
  for (const auto& s : stages) {
    require(!s.empty(), Errc::empty_id, "empty stage id");
    require(seen.insert(s).second, Errc::duplicate_stage,
            "duplicate stage '" + s + "' in pipeline");
    if (!label.empty()) label += '/';
    label += s;
  }
  return Pipeline{std::move(stages), std::move(label)};
}

struct PipelineOutcome {
  RunOutcome outcome;                     // elapsed = sum over attempted stages
  std::optional<std::size_t> resolved_by; // stage index, present iff success
  std::vector<Failure> attempts;          // failures of stages tried before resolution
};

using Evaluator = std::function<RunOutcome(const MethodId&, const DatasetId&)>;

inline PipelineOutcome run_pipeline(const Pipeline& pipeline, const Evaluator& evaluate,
                                    const DatasetId& dataset) {
  PipelineOutcome result;
  Duration total{0};
  for (std::size_t i = 0; i < pipeline.stages.size(); ++i) {
    RunOutcome o = evaluate(pipeline.stages[i], dataset);
    total += o.elapsed;
    if (o.is_success()) {
      result.outcome = std::move(o);
      result.outcome.elapsed = total;
      result.resolved_by = i;
      return result;
    }
    result.attempts.push_back(*o.failure);
  }
  // Exhaustion is data, not an exception: the detail lists every stage's kind.
  std::string detail;
  for (std::size_t i = 0; i < result.attempts.size(); ++i) {
    if (i > 0) detail += "; ";
    detail += pipeline.stages[i] + ": " + failure_cause_name(result.attempts[i].kind);
    if (!result.attempts[i].detail.empty()) detail += " (" + result.attempts[i].detail + ")";
  }
  result.outcome = RunOutcome::failed(FailureCause::PipelineExhausted, detail, total);
  return result;
}

// Enumerates the evaluated pipelines for a study. A base method with no
// declared fallbacks is evaluated bare; a base with fallbacks is evaluated
// once per fallback chain (ordered subsequences of its declared list, length
// up to max_fallbacks). The full list is what the study must disclose.
inline std::vector<Pipeline> expand_pipelines(
    std::span<const MethodId> base_methods,
    const std::map<MethodId, std::vector<MethodId>>& fallback_map,
    std::size_t max_fallbacks) {
  std::vector<Pipeline> out;
  for (const auto& base : base_methods) {
    auto it = fallback_map.find(base);
    if (it == fallback_map.end() || it->second.empty()) {
      out.push_back(make_pipeline({base}));
      continue;
    }
    const auto& fallbacks = it->second;
    std::unordered_set<std::string> seen;
    for (const auto& f : fallbacks) {
      require(f != base, Errc::self_fallback,
              "method '" + base + "' lists itself as fallback");
      require(seen.insert(f).second, Errc::duplicate_stage,
              "duplicate fallback '" + f + "' for '" + base + "'");
    }
    // Ordered subsequences of the declared fallback list, shortest first.
    std::vector<std::vector<std::size_t>> chains;
    std::vector<std::size_t> cur;
    auto grow = [&](auto&& self, std::size_t start) -> void {
      for (std::size_t i = start; i < fallbacks.size(); ++i) {
        cur.push_back(i);
        chains.push_back(cur);
        if (cur.size() < max_fallbacks) self(self, i + 1);
        cur.pop_back();
      }
    };
    if (max_fallbacks > 0) grow(grow, 0);
    std::stable_sort(chains.begin(), chains.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (const auto& chain : chains) {
      std::vector<MethodId> stages{base};
      for (std::size_t i : chain) stages.push_back(fallbacks[i]);
      out.push_back(make_pipeline(std::move(stages)));
    }
  }
  return out;
}

}  // namespace failbench
