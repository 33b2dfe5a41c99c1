#include <catch2/catch_amalgamated.hpp>

#include "failbench/pipeline.hpp"
#include "failbench/study_or.hpp"

#include <map>

using namespace failbench;

namespace {

Evaluator stub_evaluator(std::map<std::pair<MethodId, DatasetId>, RunOutcome> results) {
  return [results = std::move(results)](const MethodId& m, const DatasetId& d) {
    return results.at({m, d});
  };
}

}  // namespace

TEST_CASE("first success wins", "[pipeline]") {
  const Pipeline p = make_pipeline({"Midp", "Small"});
  CHECK(p.label == "Midp/Small");
  auto eval = stub_evaluator({
      {{"Midp", "d"}, RunOutcome::failed(FailureCause::Calculation, "sampling zero")},
      {{"Small", "d"}, RunOutcome::success(2.3)},
  });
  const PipelineOutcome out = run_pipeline(p, eval, "d");
  REQUIRE(out.outcome.is_success());
  CHECK(*out.outcome.value == 2.3);
  REQUIRE(out.resolved_by.has_value());
  CHECK(*out.resolved_by == 1);
  CHECK(out.attempts.size() == 1);
  CHECK(out.attempts[0].kind == FailureCause::Calculation);
}

TEST_CASE("singleton pipeline equals the raw outcome", "[pipeline]") {
  const Pipeline p = make_pipeline({"A"});
  auto eval = stub_evaluator({{{"A", "d"}, RunOutcome::success(0.7)}});
  const PipelineOutcome out = run_pipeline(p, eval, "d");
  CHECK(*out.outcome.value == 0.7);
  CHECK(*out.resolved_by == 0);
  CHECK(out.attempts.empty());
}

TEST_CASE("exhaustion records every attempt", "[pipeline]") {
  const Pipeline p = make_pipeline({"A", "B"});
  auto eval = stub_evaluator({
      {{"A", "d"}, RunOutcome::failed(FailureCause::Calculation, "x")},
      {{"B", "d"}, RunOutcome::failed(FailureCause::Memory, "y")},
  });
  const PipelineOutcome out = run_pipeline(p, eval, "d");
  REQUIRE_FALSE(out.outcome.is_success());
  CHECK(out.outcome.failure->kind == FailureCause::PipelineExhausted);
  CHECK(out.attempts.size() == 2);
  CHECK(out.outcome.failure->detail.find("A: calculation") != std::string::npos);
  CHECK(out.outcome.failure->detail.find("B: memory") != std::string::npos);
  CHECK_FALSE(out.resolved_by.has_value());
}

TEST_CASE("pipeline elapsed sums the attempted stages", "[pipeline]") {
  const Pipeline p = make_pipeline({"A", "B"});
  RunOutcome fail = RunOutcome::failed(FailureCause::Calculation, "x", Duration{1000});
  RunOutcome ok = RunOutcome::success(1.0, Duration{2000});
  auto eval = stub_evaluator({{{"A", "d"}, fail}, {{"B", "d"}, ok}});
  const PipelineOutcome out = run_pipeline(p, eval, "d");
  CHECK(out.outcome.elapsed == Duration{3000});
}

TEST_CASE("study fallback map expands to nine pipelines", "[pipeline]") {
  const auto pipelines =
      expand_pipelines(std::span<const MethodId>(or_base_methods()), default_or_fallbacks(), 1);
  REQUIRE(pipelines.size() == 9);
  std::vector<std::string> labels;
  for (const auto& p : pipelines) labels.push_back(p.label);
  const std::vector<std::string> expected{
      "Manual/Haldane", "Fisher/Haldane", "Fisher/Small", "Fisher/Woolf",
      "Midp/Haldane",   "Midp/Small",     "Midp/Woolf",   "Small",
      "Woolf"};
  CHECK(labels == expected);
}

TEST_CASE("empty fallback map yields bare base methods", "[pipeline]") {
  const std::vector<MethodId> bases{"a", "b"};
  const auto pipelines = expand_pipelines(std::span<const MethodId>(bases), {}, 2);
  REQUIRE(pipelines.size() == 2);
  CHECK(pipelines[0].label == "a");
  CHECK(pipelines[1].label == "b");
}

TEST_CASE("self fallback is rejected", "[pipeline]") {
  const std::vector<MethodId> bases{"Manual"};
  std::map<MethodId, std::vector<MethodId>> bad{{"Manual", {"Manual"}}};
  try {
    expand_pipelines(std::span<const MethodId>(bases), bad, 1);
    FAIL("expected self_fallback");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::self_fallback);
  }
  std::map<MethodId, std::vector<MethodId>> dup{{"Manual", {"x", "x"}}};
  try {
    expand_pipelines(std::span<const MethodId>(bases), dup, 2);
    FAIL("expected duplicate_stage");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_stage);
  }
}

TEST_CASE("deeper chains preserve declaration order", "[pipeline]") {
  const std::vector<MethodId> bases{"F"};
  std::map<MethodId, std::vector<MethodId>> fm{{"F", {"a", "b", "c"}}};
  const auto pipelines = expand_pipelines(std::span<const MethodId>(bases), fm, 2);
  std::vector<std::string> labels;
  for (const auto& p : pipelines) labels.push_back(p.label);
  const std::vector<std::string> expected{"F/a",   "F/b",   "F/c",
                                          "F/a/b", "F/a/c", "F/b/c"};
  CHECK(labels == expected);
}
