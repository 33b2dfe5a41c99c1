#include <catch2/catch_amalgamated.hpp>

#include "failbench/study_ci.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace failbench;

TEST_CASE("auc on hand-checked rankings", "[study_ci]") {
  std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
  std::vector<int> labels{1, 1, 0, 0};
  CHECK(auc(perfect, labels) == 1.0);

  std::vector<double> constant{0.5, 0.5, 0.5, 0.5};
  CHECK(auc(constant, labels) == 0.5);

  // brute-force pair count: 2 concordant of 4 pairs
  std::vector<double> mixed{0.9, 0.2, 0.8, 0.1};
  std::vector<int> mixed_labels{1, 0, 0, 1};
  CHECK(auc(mixed, mixed_labels) == 0.5);
  CHECK(fbtest::oracle_auc(mixed, mixed_labels) == 0.5);

  std::vector<int> single(4, 1);
  try {
    auc(perfect, single);
    FAIL("expected single_class");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::single_class);
  }
}

TEST_CASE("auc agrees with pair-counting oracle on random inputs", "[study_ci][property]") {
  Rng rng(derive_seed(0xA0C, 1));
  for (int c = 0; c < 500; ++c) {
    const std::size_t n = 2 + rng.uniform_below(40);
    std::vector<double> scores;
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid of scores forces plenty of ties
      scores.push_back(std::floor(rng.uniform01() * 5.0) / 5.0);
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
      has0 |= labels.back() == 0;
      has1 |= labels.back() == 1;
    }
    if (!has0 || !has1) continue;
    REQUIRE(auc(scores, labels) ==
            Catch::Approx(fbtest::oracle_auc(scores, labels)).margin(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms", "[study_ci][property]") {
  Rng rng(derive_seed(0xA0C, 2));
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 4 + rng.uniform_below(30);
    std::vector<double> scores;
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(rng.uniform01() * 2.0 - 1.0);
      labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
      has0 |= labels.back() == 0;
      has1 |= labels.back() == 1;
    }
    if (!has0 || !has1) continue;
    std::vector<double> transformed;
    for (double s : scores) transformed.push_back(std::exp(2.0 * s) + 3.0);
    REQUIRE(auc(scores, labels) == auc(transformed, labels));
  }
}

TEST_CASE("stump fits separable data and collapses on single-class data", "[study_ci]") {
  ClassifData sep;
  for (int i = 0; i < 20; ++i) {
    sep.z.push_back(i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i);
    sep.y.push_back(i < 10 ? 0 : 1);
  }
  const StumpModel m = fit_stump(sep, 0.01);
  REQUIRE(m.is_split);
  CHECK(m.score_left == 0.0);
  CHECK(m.score_right == 1.0);
  CHECK(m.threshold > -1.0);
  CHECK(m.threshold < 1.0);

  ClassifData mono;
  for (int i = 0; i < 10; ++i) {
    mono.z.push_back(i);
    mono.y.push_back(1);
  }
  const StumpModel constant = fit_stump(mono, 0.01);
  CHECK_FALSE(constant.is_split);
  CHECK(constant.predict(0.0) == 1.0);

  CHECK_THROWS_AS(fit_stump(ClassifData{}, 0.01), Error);
}

TEST_CASE("noise data yields constant stumps at a nonzero rate", "[study_ci][slow]") {
  // the study's failure-rate knob: n = 80, tau = 0.01, beta = 0
  int constants = 0;
  for (int i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(0x57F, i));
    const ClassifData data = generate_classif_data(0.0, 80, rng);
    if (!fit_stump(data, 0.01).is_split) ++constants;
  }
  CHECK(constants > 0);
  CHECK(constants < 1000);
}

TEST_CASE("generated data matches its design", "[study_ci][slow]") {
  Rng rng(derive_seed(0xD6EA, 1));
  const ClassifData flat = generate_classif_data(0.0, 10000, rng);
  double prevalence = 0.0;
  for (int y : flat.y) prevalence += y;
  prevalence /= static_cast<double>(flat.size());
  CHECK(prevalence == Catch::Approx(0.5).margin(3.0 * 0.005));

  // strong signal: AUC of the raw score on a large sample
  const ClassifData strong = generate_classif_data(5.0, 100000, rng);
  CHECK(auc(strong.z, strong.y) > 0.9);

  Rng rng2(3);
  CHECK(generate_classif_data(1.0, 2, rng2).size() == 2);
}

TEST_CASE("ci_interval closed forms", "[study_ci]") {
  // 15 estimates with mean 0.8 and sample variance 0.0009
  std::vector<double> estimates;
  for (int i = 0; i < 7; ++i) estimates.push_back(0.8 + 0.03);
  for (int i = 0; i < 7; ++i) estimates.push_back(0.8 - 0.03);
  estimates.push_back(0.8);
  REQUIRE(mean(estimates) == Catch::Approx(0.8).margin(1e-15));
  REQUIRE(sample_variance(estimates) == Catch::Approx(0.0009).margin(1e-18));

  CiSpec corrected{15, 0.8, 0.95, 0.25};
  const CiOutcome c = ci_interval(estimates, corrected, CiSemantics::Repaired);
  REQUIRE(c.ok());
  const double half_c = 0.5 * (c.interval->upper - c.interval->lower);
  CHECK(half_c == Catch::Approx(0.036209).margin(1e-5));
  CHECK(c.interval->lower == Catch::Approx(0.763791).margin(1e-5));
  CHECK(c.interval->upper == Catch::Approx(0.836209).margin(1e-5));

  CiSpec naive{15, 0.8, 0.95, 0.0};
  const CiOutcome n = ci_interval(estimates, naive, CiSemantics::Legacy);
  REQUIRE(n.ok());
  const double half_n = 0.5 * (n.interval->upper - n.interval->lower);
  CHECK(half_n == Catch::Approx(0.016614).margin(1e-5));
}

TEST_CASE("zero variance: legacy fails, repaired returns zero width", "[study_ci]") {
  std::vector<double> same(15, 0.7);
  CiSpec spec{15, 0.8, 0.95, 0.0};
  const CiOutcome legacy = ci_interval(same, spec, CiSemantics::Legacy);
  REQUIRE_FALSE(legacy.ok());
  CHECK(legacy.failure->kind == FailureCause::Calculation);
  CHECK(legacy.failure->detail.find("zero variance") != std::string::npos);

  const CiOutcome repaired = ci_interval(same, spec, CiSemantics::Repaired);
  REQUIRE(repaired.ok());
  CHECK(repaired.interval->lower == 0.7);
  CHECK(repaired.interval->upper == 0.7);
  CHECK(repaired.interval->zero_width());
  CHECK(repaired.interval->covers(0.7));
  CHECK_FALSE(repaired.interval->covers(0.70000001));
}

TEST_CASE("legacy and repaired agree whenever variance is positive",
          "[study_ci][property]") {
  Rng rng(derive_seed(0xC1, 9));
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> estimates;
    for (int i = 0; i < 15; ++i) estimates.push_back(rng.uniform01());
    CiSpec spec{15, 0.8, 0.95, 0.1};
    const CiOutcome a = ci_interval(estimates, spec, CiSemantics::Legacy);
    const CiOutcome b = ci_interval(estimates, spec, CiSemantics::Repaired);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    REQUIRE(a.interval->lower == b.interval->lower);
    REQUIRE(a.interval->upper == b.interval->upper);
  }
}

TEST_CASE("interval equivariance under shift and scale", "[study_ci][property]") {
  Rng rng(derive_seed(0xC1, 10));
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> estimates;
    for (int i = 0; i < 15; ++i) estimates.push_back(rng.uniform01());
    const double delta = rng.uniform01() * 2.0 - 1.0;
    const double scale = 0.1 + 2.0 * rng.uniform01();
    CiSpec spec{15, 0.8, 0.95, 0.25};
    const CiOutcome base = ci_interval(estimates, spec, CiSemantics::Repaired);
    std::vector<double> shifted;
    std::vector<double> scaled;
    for (double e : estimates) {
      shifted.push_back(e + delta);
      scaled.push_back(e * scale);
    }
    const CiOutcome sh = ci_interval(shifted, spec, CiSemantics::Repaired);
    const CiOutcome sc = ci_interval(scaled, spec, CiSemantics::Repaired);
    REQUIRE(sh.interval->lower == Catch::Approx(base.interval->lower + delta).margin(1e-9));
    REQUIRE(sh.interval->upper == Catch::Approx(base.interval->upper + delta).margin(1e-9));
    const double half_base = 0.5 * (base.interval->upper - base.interval->lower);
    const double half_scaled = 0.5 * (sc.interval->upper - sc.interval->lower);
    REQUIRE(half_scaled == Catch::Approx(half_base * scale).margin(1e-9));
  }
}

TEST_CASE("corrected interval strictly contains the naive one", "[study_ci][property]") {
  Rng rng(derive_seed(0xC1, 11));
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> estimates;
    for (int i = 0; i < 15; ++i) estimates.push_back(rng.uniform01());
    CiSpec naive{15, 0.8, 0.95, 0.0};
    CiSpec corrected{15, 0.8, 0.95, 0.25};
    const CiOutcome n = ci_interval(estimates, naive, CiSemantics::Repaired);
    const CiOutcome k = ci_interval(estimates, corrected, CiSemantics::Repaired);
    REQUIRE(k.interval->lower < n.interval->lower);
    REQUIRE(k.interval->upper > n.interval->upper);
  }
}

TEST_CASE("subsampling is deterministic and sized correctly", "[study_ci]") {
  Rng rng_data(derive_seed(0x5AB, 1));
  const ClassifData data = generate_classif_data(0.5, 100, rng_data);
  Rng a(42);
  Rng b(42);
  const auto ea = subsample_auc_estimates(data, 15, 0.8, 0.01, a);
  const auto eb = subsample_auc_estimates(data, 15, 0.8, 0.01, b);
  CHECK(ea.size() == 15);
  CHECK(ea == eb);
  for (double v : ea) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("single-class training data exhausts the fold retries", "[study_ci]") {
  ClassifData one_class;
  Rng rng_z(4);
  for (int i = 0; i < 50; ++i) {
    one_class.z.push_back(rng_z.normal());
    one_class.y.push_back(1);
  }
  Rng rng(9);
  try {
    subsample_auc_estimates(one_class, 15, 0.8, 0.01, rng);
    FAIL("expected degenerate_folds");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_folds);
  }
}

TEST_CASE("forced no-split gives all estimates exactly 0.5", "[study_ci]") {
  Rng rng_data(derive_seed(0x5AB, 2));
  const ClassifData data = generate_classif_data(0.0, 100, rng_data);
  Rng rng(7);
  // a huge impurity threshold forbids splitting entirely
  const auto estimates = subsample_auc_estimates(data, 15, 0.8, 0.9, rng);
  for (double v : estimates) CHECK(v == 0.5);
  CHECK(sample_variance(estimates) == 0.0);
}

TEST_CASE("small ci study satisfies the structural relations", "[study_ci][slow]") {
  CiStudyConfig cfg;
  cfg.n_iter = 200;
  cfg.master_seed = 5;
  cfg.workers = 2;
  const CiStudyResult res = run_ci_study(cfg);
  REQUIRE(res.records.size() == 200);

  // discard-single and discard-all coincide exactly: only N fails
  CHECK(res.coverage_n.discard_single == res.coverage_n.discard_all);
  // count-as-noncover can only lower coverage
  CHECK(res.coverage_n.count_noncover <= res.coverage_n.discard_single);
  // C dominates N under every handling
  CHECK(res.coverage_c.discard_single >= res.coverage_n.discard_single);
  CHECK(res.coverage_c.discard_all >= res.coverage_n.discard_all);
  CHECK(res.coverage_c.count_noncover >= res.coverage_n.count_noncover);
  CHECK(res.coverage_c.zero_width >= res.coverage_n.zero_width);
  // failure proportion equals the share of zero-variance iterations
  std::size_t zero_var = 0;
  for (const auto& rec : res.records) {
    if (sample_variance(rec.auc_estimates) == 0.0) ++zero_var;
  }
  CHECK(res.failure_prop_n ==
        Catch::Approx(static_cast<double>(zero_var) / 200.0).margin(1e-12));
  // covers_N implies covers_C on defined iterations
  for (const auto& rec : res.records) {
    if (rec.covers_n.defined && rec.covers_n.covers) CHECK(rec.covers_c.covers);
  }
}

TEST_CASE("ci study determinism across worker counts", "[study_ci][slow]") {
  CiStudyConfig cfg;
  cfg.n_iter = 100;
  cfg.master_seed = 99;
  cfg.workers = 1;
  const CiStudyResult a = run_ci_study(cfg);
  cfg.workers = 4;
  const CiStudyResult b = run_ci_study(cfg);
  CHECK(a.table_digest == b.table_digest);
  CHECK(a.coverage_n.discard_single == b.coverage_n.discard_single);
}
