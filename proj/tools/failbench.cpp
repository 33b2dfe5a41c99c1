// failbench command line: grid execution, aggregation, reporting, and the two
// built-in comparison studies. Exit codes: 0 success, 2 configuration errors,
// 3 data errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "failbench/aggregate.hpp"
#include "failbench/config.hpp"
#include "failbench/core.hpp"
#include "failbench/engine.hpp"
#include "failbench/report.hpp"
#include "failbench/study_ci.hpp"
#include "failbench/study_io.hpp"
#include "failbench/study_or.hpp"
#include "failbench/version.hpp"

namespace fb = failbench;
namespace fs = std::filesystem;

namespace {

struct RunOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double budget_ms = 0.0;
  std::vector<std::string> runtime_subsets;
  std::string cell_log;
};

fb::RuntimeSubset parse_subset_spec(const std::string& spec, fb::MethodId& method_out) {
  // method=NAME,fraction=F,seed=S
  fb::RuntimeSubset rs;
  bool have_method = false, have_fraction = false;
  for (const auto& part : fb::split_list(spec, ',')) {
    const auto eq = part.find('=');
    fb::require(eq != std::string::npos, fb::Errc::config,
                "bad --runtime-subset entry '" + part + "'");
    const std::string key = fb::trim(part.substr(0, eq));
    const std::string val = fb::trim(part.substr(eq + 1));
    if (key == "method") {
      method_out = val;
      have_method = true;
    } else if (key == "fraction") {
      rs.fraction = fb::parse_double(val);
      have_fraction = true;
    } else if (key == "seed") {
      rs.selection_seed = std::stoull(val);
    } else {
      fb::raise(fb::Errc::config, "unknown --runtime-subset key '" + key + "'");
    }
  }
  fb::require(have_method && have_fraction, fb::Errc::config,
              "--runtime-subset needs method=...,fraction=...");
  return rs;
}

// Streams one NDJSON line per completed cell.
class CellLogger {
 public:
  explicit CellLogger(const fs::path& path) : out_(path, std::ios::binary) {
    fb::require(out_.good(), fb::Errc::config, "cannot write '" + path.string() + "'");
  }

  fb::CellSink sink() {
    return [this](const fb::MethodId& m, const fb::DatasetId& d, const fb::RunOutcome& o) {
      out_ << fb::outcome_to_json(m, d, o).dump() << '\n';
    };
  }

 private:
  std::ofstream out_;
};

// Built-in demo methods over a scalar payload; exercise every failure kind.
std::vector<fb::GridMethod<double>> demo_methods(const fb::ConfigMap& cfg) {
  const int flaky_every = cfg.count("flaky_every") ? std::stoi(cfg.at("flaky_every")) : 3;
  const double slow_ms = cfg.count("slow_ms") ? fb::parse_double(cfg.at("slow_ms")) : 25.0;
  std::vector<fb::GridMethod<double>> methods;
  methods.push_back({"steady", [](const double& x, fb::Rng&, fb::CellContext&) { return x; }});
  methods.push_back({"noisy", [](const double& x, fb::Rng& rng, fb::CellContext&) {
                       return x + 0.01 * rng.normal();
                     }});
  methods.push_back(
      {"flaky", [flaky_every](const double& x, fb::Rng&, fb::CellContext&) -> double {
         const auto i = static_cast<long long>(x * 100.0 + 0.5);
         if (flaky_every > 0 && i % flaky_every == 0) {
           throw std::runtime_error("synthetic calculation failure");
         }
         return x;
       }});
  methods.push_back({"slow", [slow_ms](const double& x, fb::Rng&, fb::CellContext& ctx) {
                       const auto until = std::chrono::steady_clock::now() +
                                          std::chrono::microseconds(
                                              static_cast<long long>(slow_ms * 1000.0));
                       while (std::chrono::steady_clock::now() < until) {
                         ctx.checkpoint();
                         std::this_thread::sleep_for(std::chrono::microseconds(200));
                       }
                       return x;
                     }});
  methods.push_back({"hungry", [](const double& x, fb::Rng&, fb::CellContext&) -> double {
                       const auto i = static_cast<long long>(x * 100.0 + 0.5);
                       if (i % 5 == 0) throw std::bad_alloc{};
                       return x;
                     }});
  methods.push_back({"warned", [](const double& x, fb::Rng&, fb::CellContext& ctx) {
                       const auto i = static_cast<long long>(x * 100.0 + 0.5);
                       if (i % 4 == 0) {
                         ctx.annotate("did not converge; returning last iterate");
                       }
                       return x;
                     }});
  return methods;
}

int cmd_run(const RunOptions& opt) {
  const fb::ConfigMap cfg = fb::parse_config(fb::read_text_file(opt.config_path));
  const std::string kind = cfg.count("kind") ? cfg.at("kind") : "demo";
  const std::size_t reps = cfg.count("reps") ? std::stoull(cfg.at("reps")) : 20;

  fb::RunConfig rc;
  rc.master_seed = opt.seed;
  rc.workers = opt.workers;
  if (opt.budget_ms > 0.0) rc.budget = fb::elapsed_from_ms(opt.budget_ms);
  for (const auto& spec : opt.runtime_subsets) {
    fb::MethodId method;
    const fb::RuntimeSubset rs = parse_subset_spec(spec, method);
    rc.runtime_subset[method] = rs;
  }

  const fs::path out_dir(opt.out_dir);
  fs::create_directories(out_dir);
  const fs::path log_path =
      opt.cell_log.empty() ? out_dir / "cells.ndjson" : fs::path(opt.cell_log);
  CellLogger logger(log_path);

  fb::ResultTable table;
  if (kind == "demo") {
    std::vector<fb::GridDataset<double>> datasets;
    for (std::size_t i = 1; i <= reps; ++i) {
      datasets.push_back({std::to_string(i), static_cast<double>(i) / 100.0});
    }
    auto methods = demo_methods(cfg);
    if (cfg.count("methods")) {
      const auto wanted = fb::split_list(cfg.at("methods"));
      std::vector<fb::GridMethod<double>> filtered;
      for (const auto& w : wanted) {
        bool found = false;
        for (auto& m : methods) {
          if (m.id == w) {
            filtered.push_back(m);
            found = true;
            break;
          }
        }
        fb::require(found, fb::Errc::config, "unknown demo method '" + w + "'");
      }
      methods = std::move(filtered);
    }
    table = fb::run_grid(methods, datasets, rc, logger.sink(),
                         fb::MeasureSpec{"value", fb::Direction::HigherBetter});
  } else if (kind == "or") {
    fb::OrScenario sc;
    if (cfg.count("n_obs")) sc.n_obs = std::stoull(cfg.at("n_obs"));
    if (cfg.count("true_or")) sc.true_or = fb::parse_double(cfg.at("true_or"));
    if (cfg.count("p_x")) sc.p_x = fb::parse_double(cfg.at("p_x"));
    if (cfg.count("p0")) sc.p0 = fb::parse_double(cfg.at("p0"));
    sc.n_rep = reps;
    sc.validate();
    std::vector<fb::MethodId> method_ids = {"Manual", "Fisher", "Midp",
                                            "Small",  "Woolf",  "Haldane"};
    if (cfg.count("methods")) method_ids = fb::split_list(cfg.at("methods"));
    std::vector<fb::GridMethod<fb::ContingencyTable2x2>> methods;
    for (const auto& id : method_ids) {
      methods.push_back(
          {id, [id](const fb::ContingencyTable2x2& t, fb::Rng&, fb::CellContext&) {
             const fb::RunOutcome o = fb::evaluate_or_method(id, t);
             if (!o.is_success()) throw std::runtime_error(o.failure->detail);
             return *o.value;
           }});
    }
    std::vector<fb::GridDataset<fb::ContingencyTable2x2>> datasets;
    for (std::size_t i = 0; i < reps; ++i) {
      fb::Rng rng(fb::derive_seed(opt.seed, 0xDA7AULL, 0, i));
      datasets.push_back({std::to_string(i + 1), fb::simulate_2x2(sc, rng)});
    }
    table = fb::run_grid(methods, datasets, rc, logger.sink(),
                         fb::MeasureSpec{"or_estimate", fb::Direction::CloserToTarget,
                                         sc.true_or});
  } else {
    fb::raise(fb::Errc::config, "unknown grid kind '" + kind + "'");
  }

  const fb::ReproStamp stamp{opt.seed, fb::config_digest(cfg)};
  fb::write_text_file(out_dir / "table.json", fb::table_to_json(table).dump(2) + "\n");
  fb::write_text_file(out_dir / "table.csv", fb::table_to_csv(table));
  nlohmann::json man;
  man["kind"] = kind;
  man["reps"] = reps;
  man["workers"] = opt.workers;
  man["canonical_digest"] =
      fb::hex64(fb::digest64(fb::table_to_json(fb::strip_timing(table)).dump()));
  nlohmann::json st;
  st["seed"] = opt.seed;
  st["config_digest"] = stamp.config_digest;
  st["version"] = stamp.version;
  man["stamp"] = std::move(st);
  fb::write_text_file(out_dir / "manifest.json", man.dump(2) + "\n");
  std::cout << "wrote " << (out_dir / "table.json").string() << " ("
            << table.n_methods() << " methods x " << table.n_datasets() << " datasets)\n";
  return 0;
}

fb::ResultTable load_table(const std::string& path) {
  const std::string text = fb::read_text_file(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return fb::table_from_csv(text);
  }
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  fb::require(!j.is_discarded(), fb::Errc::parse, "invalid json in '" + path + "'");
  return fb::table_from_json(j);
}

int cmd_aggregate(const std::string& table_path, const std::string& out_dir,
                  const std::string& impute_spec) {
  const fb::ResultTable table = load_table(table_path);
  const fs::path out(out_dir);
  fs::create_directories(out);
  fb::ReproStamp stamp;
  stamp.config_digest = fb::hex64(fb::digest64(table_path + "|" + impute_spec));

  std::vector<fb::AggregateReportRow> rows;
  const auto all = fb::aggregate_discard_all(
      table, std::span<const fb::MethodId>(table.methods()));
  for (const auto& m : table.methods()) {
    const double fp = fb::failure_proportion(table, m).overall;
    rows.push_back({m, fb::Basis{fb::BasisKind::Unconditional, {}}, table.measure().name,
                    fb::aggregate_unconditional(table, m), fp});
    rows.push_back({m, fb::Basis{fb::BasisKind::DiscardSingle, {}}, table.measure().name,
                    fb::aggregate_discard_single(table, m), fp});
    rows.push_back({m, fb::Basis{fb::BasisKind::DiscardAll, {}}, table.measure().name,
                    all.at(m), fp});
  }

  if (!impute_spec.empty()) {
    fb::ImputationPolicy policy;
    const auto parts = fb::split_list(impute_spec, ':');
    fb::require(!parts.empty(), fb::Errc::config, "empty --impute spec");
    if (parts[0] == "worst") {
      fb::require(parts.size() == 2, fb::Errc::config, "--impute worst:<value>");
      policy = fb::ImputationPolicy::worst_value(fb::parse_double(parts[1]));
    } else if (parts[0] == "method_mean") {
      policy = fb::ImputationPolicy::mean_of_method_remaining();
    } else if (parts[0] == "cross_mean") {
      policy = fb::ImputationPolicy::cross_method_mean();
    } else if (parts[0] == "threshold") {
      fb::require(parts.size() == 3, fb::Errc::config,
                  "--impute threshold:<fraction>:<worst>");
      policy = fb::ImputationPolicy::threshold_rule(fb::parse_double(parts[1]),
                                                    fb::parse_double(parts[2]));
    } else {
      fb::raise(fb::Errc::config, "unknown imputation policy '" + parts[0] + "'");
    }
    const fb::ResultTable imputed = fb::impute(table, policy);
    fb::write_text_file(out / "imputed_table.json",
                        fb::table_to_json(imputed).dump(2) + "\n");
    fb::write_text_file(out / "imputed_table.csv", fb::table_to_csv(imputed));
    for (const auto& m : imputed.methods()) {
      auto a = fb::aggregate_unconditional(imputed, m);
      a.basis = fb::Basis{fb::BasisKind::Imputed, policy.label()};
      rows.push_back({m, a.basis, imputed.measure().name, a,
                      fb::failure_proportion(table, m).overall});
    }
  }

  std::string csv = fb::aggregate_report_csv(rows);
  csv += stamp.csv_comment() + "\n";
  fb::write_text_file(out / "aggregates.csv", csv);
  nlohmann::json j;
  j["rows"] = fb::aggregate_report_json(rows);
  j["stamp"] = {{"config_digest", stamp.config_digest}, {"version", stamp.version}};
  fb::write_text_file(out / "aggregates.json", j.dump(2) + "\n");
  std::cout << "wrote " << (out / "aggregates.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::string& table_path, const std::string& out_dir,
               const std::string& annotations_path, double challenging_threshold) {
  const fb::ResultTable table = load_table(table_path);
  const fs::path out(out_dir);
  fs::create_directories(out);
  fb::ReproStamp stamp;
  stamp.config_digest = fb::hex64(fb::digest64(table_path));

  std::vector<fb::FailureAnnotation> annotations;
  if (!annotations_path.empty()) {
    nlohmann::json j = nlohmann::json::parse(fb::read_text_file(annotations_path),
                                             nullptr, false);
    fb::require(!j.is_discarded(), fb::Errc::parse, "invalid annotations json");
    for (const auto& a : j) {
      fb::FailureAnnotation fa;
      fa.method = a.at("method").get<std::string>();
      fa.datasets = a.value("datasets", std::vector<std::string>{});
      fa.narrative = a.value("narrative", std::string{});
      annotations.push_back(std::move(fa));
    }
  }

  const fb::ThreefoldReport rep = fb::emit_threefold(table);
  fb::write_text_file(out / "threefold.csv", fb::threefold_to_csv(rep, stamp));
  fb::write_text_file(out / "threefold.json",
                      fb::threefold_to_json(rep, stamp).dump(2) + "\n");
  const fb::FailureSummary sum =
      fb::emit_failure_summary(table, annotations, challenging_threshold);
  fb::write_text_file(out / "failure_summary.json",
                      fb::failure_summary_to_json(sum, stamp).dump(2) + "\n");

  std::vector<fb::BoxColumn> cols;
  for (std::size_t m = 0; m < table.n_methods(); ++m) {
    std::vector<double> vals;
    std::size_t fails = 0;
    for (const fb::RunOutcome& o : table.row(m)) {
      if (o.is_success()) vals.push_back(*o.value);
      else ++fails;
    }
    cols.push_back({table.methods()[m], fb::box_stats(vals), fails});
  }
  fb::write_text_file(out / "box.svg",
                      fb::render_box_figure("Performance by method", cols, table.measure(),
                                            0.05, stamp.desc_text()));
  std::cout << "wrote " << (out / "threefold.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"failure-aware comparison-study harness"};
  app.set_version_flag("--version", std::string(fb::version));
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "execute a configured method x dataset grid");
  run->add_option("--config", run_opt.config_path, "grid config file (key = value)")
      ->required();
  run->add_option("--seed", run_opt.seed, "master seed");
  run->add_option("--out", run_opt.out_dir, "output directory");
  run->add_option("--workers", run_opt.workers, "parallel workers");
  run->add_option("--budget-ms", run_opt.budget_ms, "per-cell wall clock budget (ms)");
  run->add_option("--runtime-subset", run_opt.runtime_subsets,
                  "method=NAME,fraction=F,seed=S (repeatable)");
  run->add_option("--cell-log", run_opt.cell_log, "ndjson per-cell log path");

  // aggregate ----------------------------------------------------------
  std::string agg_table, agg_out = "out", agg_impute;
  auto* agg = app.add_subcommand("aggregate", "aggregate a stored result table");
  agg->add_option("--table", agg_table, "result table (json or csv)")->required();
  agg->add_option("--out", agg_out, "output directory");
  agg->add_option("--impute", agg_impute,
                  "worst:<v> | method_mean | cross_mean | threshold:<f>:<v>");
  agg->set_config("--config");

  // report ---------------------------------------------------------------
  std::string rep_table, rep_out = "out", rep_annotations;
  double rep_threshold = 0.5;
  auto* rep = app.add_subcommand("report", "three-fold report and failure summary");
  rep->add_option("--table", rep_table, "result table (json or csv)")->required();
  rep->add_option("--out", rep_out, "output directory");
  rep->add_option("--annotations", rep_annotations, "failure annotations json");
  rep->add_option("--challenging-threshold", rep_threshold,
                  "method-failure fraction marking a dataset as challenging");
  rep->set_config("--config");

  // study ----------------------------------------------------------------
  auto* study = app.add_subcommand("study", "run a built-in comparison study");
  study->require_subcommand(1);

  std::string or_scenarios_path, or_out = "out", or_cell_log;
  double or_p0 = 0.5;
  std::size_t or_reps = 100000;
  std::uint64_t or_seed = 0;
  unsigned or_workers = 1;
  bool or_quick = false, or_signed = false;
  auto* study_or_cmd = study->add_subcommand("or", "odds-ratio estimation study");
  study_or_cmd->add_option("--scenarios", or_scenarios_path,
                           "scenario config (true_or / p_x lists)");
  study_or_cmd->add_option("--p0", or_p0, "baseline outcome probability");
  study_or_cmd->add_option("--reps", or_reps, "repetitions per scenario");
  study_or_cmd->add_option("--seed", or_seed, "master seed");
  study_or_cmd->add_option("--out", or_out, "output directory");
  study_or_cmd->add_option("--workers", or_workers, "parallel workers");
  study_or_cmd->add_flag("--quick", or_quick, "10000 repetitions per scenario");
  study_or_cmd->add_flag("--signed-ranks", or_signed,
                         "rank by signed log bias instead of |log bias|");
  study_or_cmd->add_option("--cell-log", or_cell_log, "ndjson per-cell log path");
  study_or_cmd->set_config("--config");

  std::string ci_out = "out";
  std::size_t ci_iters = 1000, ci_n = 500;
  double ci_beta = 0.3, ci_tau = 0.04, ci_level = 0.95, ci_c = 0.25;
  int ci_k = 15;
  std::uint64_t ci_seed = 0;
  unsigned ci_workers = 1;
  auto* study_ci_cmd = study->add_subcommand("ci", "generalization-AUC CI coverage study");
  study_ci_cmd->add_option("--iters", ci_iters, "iterations");
  study_ci_cmd->add_option("--beta", ci_beta, "signal strength of the data generator");
  study_ci_cmd->add_option("--tau", ci_tau, "minimum impurity decrease for a split");
  study_ci_cmd->add_option("--n", ci_n, "population size per iteration");
  study_ci_cmd->add_option("--k", ci_k, "subsampling repetitions");
  study_ci_cmd->add_option("--level", ci_level, "confidence level");
  study_ci_cmd->add_option("--c", ci_c, "correction term of method C");
  study_ci_cmd->add_option("--seed", ci_seed, "master seed");
  study_ci_cmd->add_option("--out", ci_out, "output directory");
  study_ci_cmd->add_option("--workers", ci_workers, "parallel workers");
  study_ci_cmd->set_config("--config");

  try {
    app.parse(argc, argv);

    if (*run) return cmd_run(run_opt);
    if (*agg) return cmd_aggregate(agg_table, agg_out, agg_impute);
    if (*rep) return cmd_report(rep_table, rep_out, rep_annotations, rep_threshold);
    if (*study_or_cmd) {
      fb::OrStudyConfig cfg;
      cfg.master_seed = or_seed;
      cfg.workers = or_workers;
      cfg.signed_ranks = or_signed;
      std::unique_ptr<CellLogger> or_logger;
      if (!or_cell_log.empty()) {
        or_logger = std::make_unique<CellLogger>(or_cell_log);
        cfg.sink = or_logger->sink();
      }
      const std::size_t reps = or_quick ? 10000 : or_reps;
      if (!or_scenarios_path.empty()) {
        const fb::ConfigMap sc_cfg = fb::parse_config(fb::read_text_file(or_scenarios_path));
        std::vector<double> ors{2, 3, 4, 5};
        std::vector<double> pxs{0.25, 0.5};
        if (sc_cfg.count("true_or")) {
          ors.clear();
          for (const auto& s : fb::split_list(sc_cfg.at("true_or")))
            ors.push_back(fb::parse_double(s));
        }
        if (sc_cfg.count("p_x")) {
          pxs.clear();
          for (const auto& s : fb::split_list(sc_cfg.at("p_x")))
            pxs.push_back(fb::parse_double(s));
        }
        const std::size_t n_obs =
            sc_cfg.count("n_obs") ? std::stoull(sc_cfg.at("n_obs")) : 50;
        cfg.scenarios.clear();
        for (double px : pxs) {
          for (double tor : ors) {
            fb::OrScenario sc;
            sc.n_obs = n_obs;
            sc.true_or = tor;
            sc.p_x = px;
            sc.p0 = or_p0;
            sc.n_rep = reps;
            cfg.scenarios.push_back(sc);
          }
        }
      } else {
        cfg.scenarios = fb::default_or_scenarios(or_p0, reps);
      }
      const fb::OrStudyResult result = fb::run_or_study(cfg);
      fb::ConfigMap echo{{"study", "or"},
                         {"p0", fb::format_double(or_p0)},
                         {"reps", std::to_string(reps)},
                         {"seed", std::to_string(or_seed)}};
      fb::ReproStamp stamp{or_seed, fb::config_digest(echo)};
      fb::write_or_study_outputs(result, cfg, or_out, stamp);
      std::cout << "wrote " << (fs::path(or_out) / "manifest.json").string() << "\n";
      return 0;
    }
    if (*study_ci_cmd) {
      fb::CiStudyConfig cfg;
      cfg.n_iter = ci_iters;
      cfg.n_total = ci_n;
      cfg.beta = ci_beta;
      cfg.min_impurity_decrease = ci_tau;
      cfg.spec.k = ci_k;
      cfg.spec.level = ci_level;
      cfg.c_corrected = ci_c;
      cfg.master_seed = ci_seed;
      cfg.workers = ci_workers;
      const fb::CiStudyResult result = fb::run_ci_study(cfg);
      fb::ConfigMap echo{{"study", "ci"},
                         {"iters", std::to_string(ci_iters)},
                         {"beta", fb::format_double(ci_beta)},
                         {"tau", fb::format_double(ci_tau)},
                         {"n", std::to_string(ci_n)},
                         {"seed", std::to_string(ci_seed)}};
      fb::ReproStamp stamp{ci_seed, fb::config_digest(echo)};
      fb::write_ci_study_outputs(result, cfg, ci_out, stamp);
      std::cout << "wrote " << (fs::path(ci_out) / "coverage.csv").string() << "\n";
      return 0;
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    app.exit(e);
    return 2;
  } catch (const fb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_config() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
