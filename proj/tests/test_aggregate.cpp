#include <catch2/catch_amalgamated.hpp>

#include "failbench/aggregate.hpp"
#include "failbench/rng.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace failbench;

TEST_CASE("unconditional aggregate is undefined in the presence of failure", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();
  const auto m2 = aggregate_unconditional(t, "Method 2");
  REQUIRE(m2.defined());
  CHECK(*m2.value == Catch::Approx(0.8375).margin(1e-12));
  CHECK(m2.n_used == 4);
  CHECK(m2.basis.kind == BasisKind::Unconditional);

  const auto m1 = aggregate_unconditional(t, "Method 1");
  CHECK_FALSE(m1.defined());
  CHECK_FALSE(aggregate_unconditional(t, "Method 3").defined());
  CHECK_THROWS_AS(aggregate_unconditional(t, "nope"), Error);
}

TEST_CASE("bias summary on the simulation fixture", "[aggregate]") {
  const ResultTable t = fbtest::table_1a();
  SummaryFn bias_stat = [](std::span<const double> xs) { return bias(xs, 4.0); };
  const auto m2 = aggregate_unconditional(t, "Method 2", bias_stat);
  REQUIRE(m2.defined());
  CHECK(*m2.value == Catch::Approx(0.0725).margin(1e-12));
}

TEST_CASE("discard-single aggregates", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();
  const auto m1 = aggregate_discard_single(t, "Method 1");
  REQUIRE(m1.defined());
  CHECK(*m1.value == Catch::Approx((0.85 + 0.90 + 0.78) / 3.0).margin(1e-12));
  CHECK(m1.n_used == 3);

  // discard of nothing equals unconditional exactly
  const auto m2s = aggregate_discard_single(t, "Method 2");
  const auto m2u = aggregate_unconditional(t, "Method 2");
  CHECK(*m2s.value == *m2u.value);

  // total failure: undefined
  std::vector<CellEntry> entries = {
      {"a", "1", RunOutcome::failed(FailureCause::Calculation, "synthetic")},
      {"a", "2", RunOutcome::failed(FailureCause::Calculation, "synthetic")}};
  const ResultTable dead = build_table({"a"}, {"1", "2"}, entries);
  CHECK_FALSE(aggregate_discard_single(dead, "a").defined());
}

TEST_CASE("discard-all aggregates share the joint success set", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();
  const std::vector<MethodId> all{"Method 1", "Method 2", "Method 3"};
  const auto res = aggregate_discard_all(t, all);
  CHECK(*res.at("Method 1").value == Catch::Approx(0.875).margin(1e-12));
  CHECK(*res.at("Method 2").value == Catch::Approx(0.895).margin(1e-12));
  CHECK(*res.at("Method 3").value == Catch::Approx(0.865).margin(1e-12));
  for (const auto& [m, a] : res) {
    CHECK(a.n_used == 2);
    CHECK(a.basis.kind == BasisKind::DiscardAll);
  }
  CHECK_THROWS_AS(aggregate_discard_all(t, std::vector<MethodId>{}), Error);
}

TEST_CASE("conditional equality with different unconditional values", "[aggregate]") {
  // 10 repetitions; A fails on the last two; both methods average 0.09 on
  // A's success set while B averages 0.14 over all repetitions.
  std::vector<CellEntry> entries;
  std::vector<DatasetId> reps;
  for (int i = 1; i <= 10; ++i) {
    const DatasetId d = std::to_string(i);
    reps.push_back(d);
    if (i <= 8) {
      entries.push_back({"A", d, RunOutcome::success(0.09)});
      entries.push_back({"B", d, RunOutcome::success(0.09)});
    } else {
      entries.push_back({"A", d, RunOutcome::failed(FailureCause::Calculation, "separation")});
      entries.push_back({"B", d, RunOutcome::success(0.34)});
    }
  }
  const ResultTable t = build_table({"A", "B"}, reps, entries);

  // brute-force check of the constructed fixture
  double b_sum = 0.0;
  for (int i = 0; i < 10; ++i) b_sum += i < 8 ? 0.09 : 0.34;
  REQUIRE(b_sum / 10.0 == Catch::Approx(0.14).margin(1e-12));

  const std::vector<MethodId> ab{"A", "B"};
  const auto cond = aggregate_discard_all(t, ab);
  CHECK(*cond.at("A").value == Catch::Approx(0.09).margin(1e-12));
  CHECK(*cond.at("B").value == Catch::Approx(0.09).margin(1e-12));
  CHECK(*aggregate_unconditional(t, "B").value == Catch::Approx(0.14).margin(1e-12));
  CHECK_FALSE(aggregate_unconditional(t, "A").defined());
}

TEST_CASE("imputation policies", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();

  SECTION("worst value substitutes directly") {
    const ResultTable imp = impute(t, ImputationPolicy::worst_value(0.5));
    CHECK(*imp.cell("Method 1", "3").value == 0.5);
    CHECK(*imp.cell("Method 3", "4").value == 0.5);
    CHECK(imp.cell("Method 1", "3").imputed);
    CHECK(imp.imputed_policy().has_value());
    // successful cells untouched, bitwise
    CHECK(*imp.cell("Method 2", "3").value == *t.cell("Method 2", "3").value);
    CHECK_FALSE(imp.cell("Method 2", "3").imputed);
  }

  SECTION("cross-method mean uses the dataset's successes") {
    const ResultTable imp = impute(t, ImputationPolicy::cross_method_mean());
    CHECK(*imp.cell("Method 1", "3").value == Catch::Approx(0.81).margin(1e-12));
  }

  SECTION("threshold rule imputes worst above the cutoff") {
    // Method 1 fails 1/4 = 0.25 > 0.2
    const ResultTable imp = impute(t, ImputationPolicy::threshold_rule(0.2, 0.5));
    CHECK(*imp.cell("Method 1", "3").value == 0.5);
    // below the cutoff the method's own mean is used
    const ResultTable imp2 = impute(t, ImputationPolicy::threshold_rule(0.3, 0.5));
    CHECK(*imp2.cell("Method 1", "3").value ==
          Catch::Approx((0.85 + 0.90 + 0.78) / 3.0).margin(1e-12));
  }

  SECTION("no donor raises") {
    std::vector<CellEntry> entries = {
        {"a", "1", RunOutcome::failed(FailureCause::Calculation, "synthetic")},
        {"b", "1", RunOutcome::failed(FailureCause::Calculation, "synthetic")}};
    const ResultTable dead = build_table({"a", "b"}, {"1"}, entries);
    try {
      impute(dead, ImputationPolicy::cross_method_mean());
      FAIL("expected no_donor");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::no_donor);
    }
  }
}

TEST_CASE("failure proportions", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();
  const auto fp1 = failure_proportion(t, "Method 1");
  CHECK(fp1.overall == Catch::Approx(0.25).margin(1e-15));
  CHECK(fp1.by_kind.at(FailureCause::Calculation) == Catch::Approx(0.25));
  const auto fp2 = failure_proportion(t, "Method 2");
  CHECK(fp2.overall == 0.0);
  CHECK(fp2.by_kind.empty());
  const auto fp3 = failure_proportion(t, "Method 3");
  CHECK(fp3.by_kind.at(FailureCause::Memory) == Catch::Approx(0.25));
}

TEST_CASE("competition ranking", "[aggregate]") {
  const Basis b{BasisKind::DiscardSingle, {}};
  const MeasureSpec lower_abs{"bias", Direction::LowerAbsBetter};

  std::map<MethodId, AggregateValue> v{{"A", AggregateValue::of(0.09, 8, b)},
                                       {"B", AggregateValue::of(0.14, 10, b)}};
  auto r = rank_methods(v, lower_abs);
  CHECK(r.at("A") == 1);
  CHECK(r.at("B") == 2);

  std::map<MethodId, AggregateValue> tie{{"A", AggregateValue::of(0.3, 4, b)},
                                         {"B", AggregateValue::of(0.3, 4, b)}};
  r = rank_methods(tie, lower_abs);
  CHECK(r.at("A") == 1);
  CHECK(r.at("B") == 1);

  const MeasureSpec higher{"accuracy", Direction::HigherBetter};
  std::map<MethodId, AggregateValue> acc{{"A", AggregateValue::of(0.875, 2, b)},
                                         {"B", AggregateValue::of(0.895, 2, b)},
                                         {"C", AggregateValue::of(0.865, 2, b)}};
  r = rank_methods(acc, higher);
  CHECK(r.at("B") == 1);
  CHECK(r.at("A") == 2);
  CHECK(r.at("C") == 3);

  std::map<MethodId, AggregateValue> bad{{"A", AggregateValue::undefined(b)}};
  try {
    rank_methods(bad, higher);
    FAIL("expected undefined_input");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::undefined_input);
  }
}

TEST_CASE("tie gaps follow competition counting", "[aggregate]") {
  const Basis b{BasisKind::Unconditional, {}};
  std::map<MethodId, AggregateValue> v{{"A", AggregateValue::of(1.0, 1, b)},
                                       {"B", AggregateValue::of(1.0, 1, b)},
                                       {"C", AggregateValue::of(0.5, 1, b)}};
  const auto r = rank_methods(v, MeasureSpec{"x", Direction::HigherBetter});
  CHECK(r.at("A") == 1);
  CHECK(r.at("B") == 1);
  CHECK(r.at("C") == 3);
}

TEST_CASE("bias and log bias", "[aggregate]") {
  std::vector<double> est{4.23, 4.13, 3.69, 4.24};
  CHECK(bias(est, 4.0) == Catch::Approx(0.0725).margin(1e-12));
  std::vector<double> flat{4.0, 4.0};
  CHECK(bias(flat, 4.0) == 0.0);
  std::vector<double> geo{2.0, 8.0};
  CHECK(log_bias(geo, 4.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(bias(std::vector<double>{}, 1.0), Error);
  std::vector<double> neg{1.0, -1.0};
  try {
    log_bias(neg, 4.0);
    FAIL("expected non_positive_estimate");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_positive_estimate);
  }
}

TEST_CASE("empirical coverage handlings", "[aggregate]") {
  std::vector<CoverageVerdict> verdicts;
  for (int i = 0; i < 1000; ++i) {
    CoverageVerdict v;
    v.defined = i >= 300;
    v.covers = v.defined && (i - 300) < 378;
    verdicts.push_back(v);
  }
  CHECK(empirical_coverage(verdicts, CoverageHandling::DiscardUndefined) ==
        Catch::Approx(0.54).margin(1e-12));
  CHECK(empirical_coverage(verdicts, CoverageHandling::CountAsNonCover) ==
        Catch::Approx(0.378).margin(1e-12));

  std::vector<CoverageVerdict> all_cover(10, CoverageVerdict{true, true});
  CHECK(empirical_coverage(all_cover, CoverageHandling::DiscardUndefined) == 1.0);
  CHECK(empirical_coverage(all_cover, CoverageHandling::CountAsNonCover) == 1.0);

  std::vector<CoverageVerdict> none_defined(5, CoverageVerdict{false, false});
  try {
    empirical_coverage(none_defined, CoverageHandling::DiscardUndefined);
    FAIL("expected all_undefined");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::all_undefined);
  }
  CHECK(empirical_coverage(none_defined, CoverageHandling::CountAsNonCover) == 0.0);
}

TEST_CASE("aggregate report serialization", "[aggregate]") {
  const ResultTable t = fbtest::table_1b();
  std::vector<AggregateReportRow> rows;
  rows.push_back({"Method 1", Basis{BasisKind::Unconditional, {}}, "accuracy",
                  aggregate_unconditional(t, "Method 1"),
                  failure_proportion(t, "Method 1").overall});
  rows.push_back({"Method 2", Basis{BasisKind::DiscardSingle, {}}, "accuracy",
                  aggregate_discard_single(t, "Method 2"),
                  failure_proportion(t, "Method 2").overall});
  const std::string csv = aggregate_report_csv(rows);
  CHECK(csv.find("method,basis,measure,value_or_UNDEFINED,n_used,failure_proportion") !=
        std::string::npos);
  CHECK(csv.find("UNDEFINED") != std::string::npos);
  CHECK(csv.find("0.8375") != std::string::npos);
  const auto j = aggregate_report_json(rows);
  CHECK(j[0]["value"].is_null());
  CHECK(j[1]["value"].get<double>() == Catch::Approx(0.8375));
}
