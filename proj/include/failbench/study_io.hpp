#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "failbench/config.hpp"
#include "failbench/report.hpp"
#include "failbench/study_ci.hpp"
#include "failbench/study_or.hpp"

namespace failbench {

// ---------------------------------------------------------------------------
// Odds-ratio study outputs: per-scenario summary CSVs, rank figure, boxplots,
// and a JSON manifest with the canonical grid digests.

inline void write_or_study_outputs(const OrStudyResult& result, const OrStudyConfig& config,
                                   const std::filesystem::path& out_dir,
                                   const ReproStamp& stamp) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  auto agg_cell = [](const AggregateValue& a) {
    return a.defined() ? format_double(*a.value) : std::string("UNDEFINED");
  };

  {
    std::ostringstream os;
    os << "scenario,n_obs,true_or,p_x,p0,n_rep,zero_proportion,mc_se\n";
    for (const auto& sr : result.scenarios) {
      const auto& sc = sr.scenario;
      os << sc.label() << ',' << sc.n_obs << ',' << format_double(sc.true_or) << ','
         << format_double(sc.p_x) << ',' << format_double(sc.p0) << ',' << sc.n_rep << ','
         << format_double(sr.zero_proportion) << ',' << format_double(sr.zero_mc_se) << '\n';
    }
    os << stamp.csv_comment() << '\n';
    write_text_file(out_dir / "zero_proportions.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "scenario,method,basis,log_bias_or_UNDEFINED,n_used,failure_proportion\n";
    for (const auto& sr : result.scenarios) {
      for (const auto& [m, a] : sr.bias_single) {
        os << sr.scenario.label() << ',' << csv_escape(m) << ",discard_single,"
           << agg_cell(a) << ',' << a.n_used << ','
           << format_double(sr.failure_prop.at(m)) << '\n';
      }
      for (const auto& [m, a] : sr.bias_all) {
        os << sr.scenario.label() << ',' << csv_escape(m) << ",discard_all," << agg_cell(a)
           << ',' << a.n_used << ',' << format_double(sr.failure_prop.at(m)) << '\n';
      }
    }
    os << stamp.csv_comment() << '\n';
    write_text_file(out_dir / "bias_estimators.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "scenario,pipeline,log_bias_or_UNDEFINED,n_used,failure_proportion\n";
    for (const auto& sr : result.scenarios) {
      for (const auto& [p, a] : sr.bias_pipeline) {
        os << sr.scenario.label() << ',' << csv_escape(p) << ',' << agg_cell(a) << ','
           << a.n_used << ',' << format_double(sr.pipeline_failure_prop.at(p)) << '\n';
      }
    }
    os << stamp.csv_comment() << '\n';
    write_text_file(out_dir / "bias_pipelines.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "scenario,comparison,method,rank\n";
    for (const auto& sr : result.scenarios) {
      for (const auto& [m, r] : sr.ranks_single) {
        os << sr.scenario.label() << ",discard_single," << csv_escape(m) << ',' << r << '\n';
      }
      for (const auto& [m, r] : sr.ranks_all) {
        os << sr.scenario.label() << ",discard_all," << csv_escape(m) << ',' << r << '\n';
      }
      for (const auto& [m, r] : sr.ranks_pipeline) {
        os << sr.scenario.label() << ",pipeline," << csv_escape(m) << ',' << r << '\n';
      }
    }
    os << stamp.csv_comment() << '\n';
    write_text_file(out_dir / "ranks.csv", os.str());
  }

  {
    std::vector<RankDivergence> divs;
    std::vector<std::string> labels;
    for (const auto& sr : result.scenarios) {
      divs.push_back(sr.divergence);
      labels.push_back(sr.scenario.label());
    }
    write_text_file(out_dir / "divergence.csv", rank_divergence_csv(divs, labels, stamp));
  }

  // Panel A: estimator ranks, discard-single next to discard-all per
  // scenario. Panel B: pipeline ranks per scenario.
  {
    RankPanel a;
    a.title = "Estimator ranks by |log bias|: discard-single (S) vs discard-all (A)";
    RankPanel b;
    b.title = "Pipeline ranks by |log bias| (unconditional)";
    for (const auto& sr : result.scenarios) {
      a.columns.push_back(sr.scenario.label() + " S");
      a.columns.push_back(sr.scenario.label() + " A");
      b.columns.push_back(sr.scenario.label());
    }
    auto rank_or_zero = [](const std::map<MethodId, int>& ranks, const MethodId& m) {
      auto it = ranks.find(m);
      return it == ranks.end() ? 0 : it->second;
    };
    for (const auto& m : config.base_methods) {
      std::vector<int> series;
      for (const auto& sr : result.scenarios) {
        series.push_back(rank_or_zero(sr.ranks_single, m));
        series.push_back(rank_or_zero(sr.ranks_all, m));
      }
      a.series[m] = std::move(series);
    }
    for (const auto& p : result.pipelines) {
      std::vector<int> series;
      for (const auto& sr : result.scenarios) {
        series.push_back(rank_or_zero(sr.ranks_pipeline, p.label));
      }
      b.series[p.label] = std::move(series);
    }
    write_text_file(out_dir / "or_ranks.svg", render_rank_figure(a, b, stamp.desc_text()));
  }

  for (const auto& sr : result.scenarios) {
    std::vector<BoxColumn> cols;
    for (const auto& m : config.base_methods) {
      auto it = sr.box.find(m);
      if (it != sr.box.end()) cols.push_back(it->second);
    }
    MeasureSpec box_measure{"log deviation", Direction::LowerAbsBetter};
    write_text_file(out_dir / ("or_box_" + sr.scenario.label() + ".svg"),
                    render_box_figure("Log deviation from truth, " + sr.scenario.label(),
                                      cols, box_measure, 0.05, stamp.desc_text()));
  }

  {
    nlohmann::json man;
    man["study"] = "or";
    man["p0"] = config.scenarios.empty() ? 0.3 : config.scenarios.front().p0;
    man["n_rep"] = config.scenarios.empty() ? 0 : config.scenarios.front().n_rep;
    man["master_seed"] = config.master_seed;
    man["workers"] = config.workers;
    man["signed_ranks"] = config.signed_ranks;
    man["rank_direction"] = direction_name(result.rank_measure.direction);
    nlohmann::json pipes = nlohmann::json::array();
    for (const auto& p : result.pipelines) pipes.push_back(p.label);
    man["pipelines"] = pipes;
    man["divergent_scenarios"] = result.divergent_scenarios;
    nlohmann::json scs = nlohmann::json::array();
    for (const auto& sr : result.scenarios) {
      nlohmann::json s;
      s["label"] = sr.scenario.label();
      s["true_or"] = sr.scenario.true_or;
      s["p_x"] = sr.scenario.p_x;
      s["p0"] = sr.scenario.p0;
      s["zero_proportion"] = sr.zero_proportion;
      s["n_used_discard_all"] = sr.n_used_all;
      s["grid_digest"] = hex64(sr.grid_digest);
      s["grid_bytes"] = sr.grid_bytes;
      s["pipeline_digest"] = hex64(sr.pipeline_digest);
      s["pipeline_bytes"] = sr.pipeline_bytes;
      if (!sr.unranked.empty()) s["unranked"] = sr.unranked;
      scs.push_back(std::move(s));
    }
    man["scenarios"] = std::move(scs);
    nlohmann::json st;
    if (stamp.seed) st["seed"] = *stamp.seed;
    st["config_digest"] = stamp.config_digest;
    st["version"] = stamp.version;
    man["stamp"] = std::move(st);
    write_text_file(out_dir / "manifest.json", man.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// CI study outputs: Table-5-shaped coverage CSV, per-iteration NDJSON record
// log, coverage bar figure, manifest.

inline nlohmann::json ci_record_to_json(std::size_t iter, const CiIterationRecord& rec) {
  nlohmann::json j;
  j["iter"] = iter + 1;
  j["true_auc"] = rec.true_auc;
  j["auc_estimates"] = rec.auc_estimates;
  auto interval_json = [](const CiOutcome& o) {
    nlohmann::json v;
    if (o.ok()) {
      v["lower"] = o.interval->lower;
      v["upper"] = o.interval->upper;
      v["zero_width"] = o.interval->zero_width();
    } else {
      v["failure"] = {{"kind", failure_cause_name(o.failure->kind)},
                      {"detail", o.failure->detail}};
    }
    return v;
  };
  j["interval_n"] = interval_json(rec.interval_n);
  j["interval_c"] = interval_json(rec.interval_c);
  j["interval_n_repaired"] = {{"lower", rec.interval_n_repaired.lower},
                              {"upper", rec.interval_n_repaired.upper},
                              {"zero_width", rec.interval_n_repaired.zero_width()}};
  j["covers"] = {{"n", rec.covers_n.defined ? nlohmann::json(rec.covers_n.covers)
                                            : nlohmann::json(nullptr)},
                 {"c", rec.covers_c.covers},
                 {"n_zero_width", rec.covers_n_repaired.covers}};
  return j;
}

inline void write_ci_study_outputs(const CiStudyResult& result, const CiStudyConfig& config,
                                   const std::filesystem::path& out_dir,
                                   const ReproStamp& stamp) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ostringstream os;
    os << "method,discard_single,discard_all,count_as_noncover,zero_width,"
          "failure_proportion\n";
    auto row = [&](const std::string& m, const CiCoverageRow& r, double fp) {
      os << m << ',' << format_double(r.discard_single) << ',' << format_double(r.discard_all)
         << ',' << format_double(r.count_noncover) << ',' << format_double(r.zero_width)
         << ',' << format_double(fp) << '\n';
    };
    row("N", result.coverage_n, result.failure_prop_n);
    row("C", result.coverage_c, 0.0);
    os << stamp.csv_comment() << '\n';
    write_text_file(out_dir / "coverage.csv", os.str());
  }

  {
    std::ostringstream os;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      os << ci_record_to_json(i, result.records[i]).dump() << '\n';
    }
    write_text_file(out_dir / "records.ndjson", os.str());
  }

  {
    std::vector<BarGroup> groups;
    groups.push_back({"discard single (N)",
                      {{"N", result.coverage_n.discard_single},
                       {"C", result.coverage_c.discard_single}}});
    groups.push_back({"discard all",
                      {{"N", result.coverage_n.discard_all},
                       {"C", result.coverage_c.discard_all}}});
    groups.push_back({"count as non-cover",
                      {{"N", result.coverage_n.count_noncover},
                       {"C", result.coverage_c.count_noncover}}});
    groups.push_back({"zero-width repair",
                      {{"N", result.coverage_n.zero_width},
                       {"C", result.coverage_c.zero_width}}});
    write_text_file(out_dir / "ci_coverage.svg",
                    render_bar_figure("Empirical coverage by handling", groups,
                                      config.spec.level, stamp.desc_text()));
  }

  {
    nlohmann::json man;
    man["study"] = "ci";
    man["n_iter"] = config.n_iter;
    man["n_total"] = config.n_total;
    man["beta"] = config.beta;
    man["min_impurity_decrease"] = config.min_impurity_decrease;
    man["k"] = config.spec.k;
    man["level"] = config.spec.level;
    man["c_corrected"] = config.c_corrected;
    man["master_seed"] = config.master_seed;
    man["failure_proportion_n"] = result.failure_prop_n;
    man["n_defined_n"] = result.n_defined_n;
    man["coverage"] = {
        {"N",
         {{"discard_single", result.coverage_n.discard_single},
          {"discard_all", result.coverage_n.discard_all},
          {"count_as_noncover", result.coverage_n.count_noncover},
          {"zero_width", result.coverage_n.zero_width}}},
        {"C",
         {{"discard_single", result.coverage_c.discard_single},
          {"discard_all", result.coverage_c.discard_all},
          {"count_as_noncover", result.coverage_c.count_noncover},
          {"zero_width", result.coverage_c.zero_width}}}};
    man["verdict_table_digest"] = hex64(result.table_digest);
    nlohmann::json st;
    if (stamp.seed) st["seed"] = *stamp.seed;
    st["config_digest"] = stamp.config_digest;
    st["version"] = stamp.version;
    man["stamp"] = std::move(st);
    write_text_file(out_dir / "manifest.json", man.dump(2) + "\n");
  }
}

}  // namespace failbench
