#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "failbench/aggregate.hpp"
#include "failbench/config.hpp"
#include "failbench/core.hpp"
#include "failbench/stats.hpp"
#include "failbench/svg.hpp"

namespace failbench {

// Fixed footer for every aggregate-despite-failure report.
inline constexpr std::string_view threefold_caveat =
    "Aggregates computed in the presence of method failure describe conditional "
    "performance only; they do not measure unconditional performance.";

// ---------------------------------------------------------------------------
// Three-fold report: discard-single aggregates, discard-all aggregates, and
// failure proportions, always together so no single basis drives the story.

struct ThreefoldEntry {
  AggregateValue discard_single;
  AggregateValue discard_all;
  FailureProportion failure;
};

struct ThreefoldReport {
  std::vector<MethodId> methods;
  std::map<MethodId, ThreefoldEntry> entries;
  std::string measure_name;
  std::string caveat{threefold_caveat};
  bool joint_empty = false;  // no dataset survived every method
};

// Inputs must be raw execution tables; imputed tables are refused so an
// imputation policy can never leak into this report unlabeled.
inline ThreefoldReport emit_threefold(const ResultTable& table,
                                      const SummaryFn& stat = mean_summary()) {
  require(!table.imputed_policy().has_value(), Errc::imputed_table,
          "threefold report requires a raw (non-imputed) table");
  ThreefoldReport rep;
  rep.methods = table.methods();
  rep.measure_name = table.measure().name;
  const auto all =
      aggregate_discard_all(table, std::span<const MethodId>(table.methods()), stat);
  for (const auto& m : table.methods()) {
    ThreefoldEntry e;
    e.discard_single = aggregate_discard_single(table, m, stat);
    e.discard_all = all.at(m);
    e.failure = failure_proportion(table, m);
    rep.entries[m] = e;
  }
  rep.joint_empty = joint_success_set(table, std::span<const MethodId>(table.methods())).empty();
  return rep;
}

inline constexpr std::string_view threefold_joint_empty_note =
    "no dataset survived every method; discard-all entries are undefined";

inline std::string threefold_to_csv(const ThreefoldReport& rep,
                                    const ReproStamp& stamp = {}) {
  std::ostringstream os;
  os << "method,measure,discard_single,discard_single_n,discard_all,discard_all_n,"
        "failure_overall,failure_calculation,failure_memory,failure_runtime,"
        "failure_pipeline_exhausted\n";
  auto cell = [](const AggregateValue& a) {
    return a.defined() ? format_double(*a.value) : std::string("UNDEFINED");
  };
  auto kind = [](const FailureProportion& fp, FailureCause c) {
    auto it = fp.by_kind.find(c);
    return format_double(it == fp.by_kind.end() ? 0.0 : it->second);
  };
  for (const auto& m : rep.methods) {
    const auto& e = rep.entries.at(m);
    os << csv_escape(m) << ',' << csv_escape(rep.measure_name) << ',' << cell(e.discard_single)
       << ',' << e.discard_single.n_used << ',' << cell(e.discard_all) << ','
       << e.discard_all.n_used << ',' << format_double(e.failure.overall) << ','
       << kind(e.failure, FailureCause::Calculation) << ','
       << kind(e.failure, FailureCause::Memory) << ','
       << kind(e.failure, FailureCause::Runtime) << ','
       << kind(e.failure, FailureCause::PipelineExhausted) << '\n';
  }
  os << "# note: " << rep.caveat << '\n';
  if (rep.joint_empty) os << "# note: " << threefold_joint_empty_note << '\n';
  os << stamp.csv_comment() << '\n';
  return os.str();
}

inline ThreefoldReport threefold_from_csv(const std::string& text) {
  const auto records = csv_parse_records(text);
  require(!records.empty(), Errc::parse, "empty threefold csv");
  ThreefoldReport rep;
  rep.caveat.clear();
  auto agg = [](const std::string& v, const std::string& n, BasisKind kind) {
    AggregateValue a;
    a.basis = Basis{kind, {}};
    a.n_used = static_cast<std::size_t>(parse_double(n));
    if (v != "UNDEFINED") a.value = parse_double(v);
    return a;
  };
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() >= 1 && f[0].rfind("# note: ", 0) == 0) {
      std::string joined = f[0];
      for (std::size_t i = 1; i < f.size(); ++i) joined += "," + f[i];
      const std::string note = joined.substr(8);
      if (note == threefold_joint_empty_note) rep.joint_empty = true;
      else rep.caveat = note;
      continue;
    }
    if (f.size() >= 1 && !f[0].empty() && f[0][0] == '#') continue;
    require(f.size() == 11, Errc::parse, "bad threefold row " + std::to_string(r + 1));
    ThreefoldEntry e;
    e.discard_single = agg(f[2], f[3], BasisKind::DiscardSingle);
    e.discard_all = agg(f[4], f[5], BasisKind::DiscardAll);
    e.failure.overall = parse_double(f[6]);
    auto put = [&](FailureCause c, const std::string& v) {
      const double p = parse_double(v);
      if (p != 0.0) e.failure.by_kind[c] = p;
    };
    put(FailureCause::Calculation, f[7]);
    put(FailureCause::Memory, f[8]);
    put(FailureCause::Runtime, f[9]);
    put(FailureCause::PipelineExhausted, f[10]);
    rep.measure_name = f[1];
    rep.methods.push_back(f[0]);
    rep.entries[f[0]] = e;
  }
  return rep;
}

inline nlohmann::json threefold_to_json(const ThreefoldReport& rep,
                                        const ReproStamp& stamp = {}) {
  nlohmann::json j;
  j["measure"] = rep.measure_name;
  j["caveat"] = rep.caveat;
  if (rep.joint_empty) j["joint_empty"] = true;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : rep.methods) {
    const auto& e = rep.entries.at(m);
    nlohmann::json row;
    row["method"] = m;
    auto agg = [](const AggregateValue& a) {
      nlohmann::json v;
      v["value"] = a.defined() ? nlohmann::json(*a.value) : nlohmann::json(nullptr);
      v["n_used"] = a.n_used;
      return v;
    };
    row["discard_single"] = agg(e.discard_single);
    row["discard_all"] = agg(e.discard_all);
    nlohmann::json fp;
    fp["overall"] = e.failure.overall;
    for (const auto& [k, v] : e.failure.by_kind) fp[std::string(failure_cause_name(k))] = v;
    row["failure_proportion"] = fp;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  nlohmann::json st;
  if (stamp.seed) st["seed"] = *stamp.seed;
  st["config_digest"] = stamp.config_digest;
  st["version"] = stamp.version;
  j["stamp"] = std::move(st);
  return j;
}

inline ThreefoldReport threefold_from_json(const nlohmann::json& j) {
  try {
    ThreefoldReport rep;
    rep.measure_name = j.at("measure").get<std::string>();
    rep.caveat = j.at("caveat").get<std::string>();
    rep.joint_empty = j.value("joint_empty", false);
    for (const auto& row : j.at("rows")) {
      const MethodId m = row.at("method").get<std::string>();
      ThreefoldEntry e;
      auto agg = [](const nlohmann::json& v, BasisKind kind) {
        AggregateValue a;
        a.basis = Basis{kind, {}};
        a.n_used = v.at("n_used").get<std::size_t>();
        if (!v.at("value").is_null()) a.value = v.at("value").get<double>();
        return a;
      };
      e.discard_single = agg(row.at("discard_single"), BasisKind::DiscardSingle);
      e.discard_all = agg(row.at("discard_all"), BasisKind::DiscardAll);
      for (const auto& [k, v] : row.at("failure_proportion").items()) {
        if (k == "overall") e.failure.overall = v.get<double>();
        else e.failure.by_kind[failure_cause_from_name(k)] = v.get<double>();
      }
      rep.methods.push_back(m);
      rep.entries[m] = std::move(e);
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::parse, std::string("bad threefold json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Failure summary: counts by kind, affected datasets, elapsed distribution,
// optional human narratives on the method-data interplay, and the list of
// datasets that defeated at least `challenging_threshold` of the methods.

struct FailureAnnotation {
  MethodId method;
  std::vector<DatasetId> datasets;
  std::string narrative;
};

struct MethodFailureSummary {
  std::map<FailureCause, std::size_t> counts;
  std::vector<DatasetId> affected;
  std::vector<std::string> details;      // captured messages (auto facts)
  std::vector<std::string> narratives;   // human-written interplay notes
  double elapsed_ms_min = 0.0;
  double elapsed_ms_median = 0.0;
  double elapsed_ms_max = 0.0;
};

struct FailureSummary {
  std::map<MethodId, MethodFailureSummary> per_method;
  std::vector<DatasetId> challenging;  // failed by >= threshold of methods
  double challenging_threshold = 0.5;
};

inline FailureSummary emit_failure_summary(const ResultTable& table,
                                           std::span<const FailureAnnotation> annotations = {},
                                           double challenging_threshold = 0.5) {
  FailureSummary sum;
  sum.challenging_threshold = challenging_threshold;
  std::vector<std::size_t> dataset_fail_count(table.n_datasets(), 0);
  for (std::size_t m = 0; m < table.n_methods(); ++m) {
    MethodFailureSummary ms;
    std::vector<double> elapsed;
    for (std::size_t d = 0; d < table.n_datasets(); ++d) {
      const RunOutcome& o = table.cell(m, d);
      elapsed.push_back(elapsed_to_ms(o.elapsed));
      if (!o.is_success()) {
        ++ms.counts[o.failure->kind];
        ms.affected.push_back(table.datasets()[d]);
        if (!o.failure->detail.empty()) ms.details.push_back(o.failure->detail);
        ++dataset_fail_count[d];
      }
    }
    if (!elapsed.empty()) {
      ms.elapsed_ms_min = *std::min_element(elapsed.begin(), elapsed.end());
      ms.elapsed_ms_max = *std::max_element(elapsed.begin(), elapsed.end());
      ms.elapsed_ms_median = quantile(elapsed, 0.5);
    }
    sum.per_method[table.methods()[m]] = std::move(ms);
  }
  for (const auto& a : annotations) {
    auto it = sum.per_method.find(a.method);
    require(it != sum.per_method.end(), Errc::dangling_annotation,
            "annotation for unknown method '" + a.method + "'");
    for (const auto& d : a.datasets) {
      const bool known = std::find(it->second.affected.begin(), it->second.affected.end(),
                                   d) != it->second.affected.end();
      require(known, Errc::dangling_annotation,
              "annotation for '" + a.method + "' references dataset '" + d +
                  "' without a failure");
    }
    it->second.narratives.push_back(a.narrative);
  }
  const double n_methods = static_cast<double>(table.n_methods());
  for (std::size_t d = 0; d < table.n_datasets(); ++d) {
    if (static_cast<double>(dataset_fail_count[d]) >= challenging_threshold * n_methods &&
        dataset_fail_count[d] > 0) {
      sum.challenging.push_back(table.datasets()[d]);
    }
  }
  return sum;
}

inline nlohmann::json failure_summary_to_json(const FailureSummary& sum,
                                              const ReproStamp& stamp = {}) {
  nlohmann::json j;
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [m, ms] : sum.per_method) {
    nlohmann::json built;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [k, c] : ms.counts) counts[std::string(failure_cause_name(k))] = c;
    built["counts"] = counts;
    built["affected_datasets"] = ms.affected;
    built["details"] = ms.details;
    built["narratives"] = ms.narratives;
    built["elapsed_ms"] = {{"min", ms.elapsed_ms_min},
                           {"median", ms.elapsed_ms_median},
                           {"max", ms.elapsed_ms_max}};
    methods[m] = std::move(built);
  }
  j["methods"] = std::move(methods);
  j["challenging_datasets"] = sum.challenging;
  j["challenging_threshold"] = sum.challenging_threshold;
  nlohmann::json st;
  if (stamp.seed) st["seed"] = *stamp.seed;
  st["config_digest"] = stamp.config_digest;
  st["version"] = stamp.version;
  j["stamp"] = std::move(st);
  return j;
}

// ---------------------------------------------------------------------------
// Rank divergence between two rankings of the same methods.

struct RankDivergenceRow {
  MethodId method;
  int rank_a = 0;
  int rank_b = 0;
  int shift = 0;  // rank_b - rank_a
  bool best_flip = false;
  bool worst_flip = false;
};

struct RankDivergence {
  std::string label_a;
  std::string label_b;
  std::vector<RankDivergenceRow> rows;  // ordered by method id
  int max_abs_shift = 0;
};

inline RankDivergence emit_rank_divergence(const std::map<MethodId, int>& ranks_a,
                                           const std::map<MethodId, int>& ranks_b,
                                           const std::string& label_a,
                                           const std::string& label_b) {
  require(ranks_a.size() == ranks_b.size(), Errc::method_mismatch,
          "rankings cover different method sets");
  for (const auto& [m, r] : ranks_a) {
    require(ranks_b.count(m) == 1, Errc::method_mismatch,
            "method '" + m + "' missing from second ranking");
  }
  auto worst = [](const std::map<MethodId, int>& r) {
    int w = 0;
    for (const auto& [m, v] : r) w = std::max(w, v);
    return w;
  };
  const int worst_a = worst(ranks_a);
  const int worst_b = worst(ranks_b);
  RankDivergence out;
  out.label_a = label_a;
  out.label_b = label_b;
  for (const auto& [m, ra] : ranks_a) {
    const int rb = ranks_b.at(m);
    RankDivergenceRow row;
    row.method = m;
    row.rank_a = ra;
    row.rank_b = rb;
    row.shift = rb - ra;
    row.best_flip = (ra == 1) != (rb == 1);
    row.worst_flip = (ra == worst_a) != (rb == worst_b);
    out.max_abs_shift = std::max(out.max_abs_shift, std::abs(row.shift));
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string rank_divergence_csv(std::span<const RankDivergence> divs,
                                       std::span<const std::string> context_labels,
                                       const ReproStamp& stamp = {}) {
  std::ostringstream os;
  os << "context,method,rank_a,rank_b,abs_shift,best_flip,worst_flip\n";
  for (std::size_t i = 0; i < divs.size(); ++i) {
    const std::string ctx = i < context_labels.size() ? context_labels[i] : std::to_string(i);
    for (const auto& r : divs[i].rows) {
      os << csv_escape(ctx) << ',' << csv_escape(r.method) << ',' << r.rank_a << ','
         << r.rank_b << ',' << std::abs(r.shift) << ',' << (r.best_flip ? 1 : 0) << ','
         << (r.worst_flip ? 1 : 0) << '\n';
    }
  }
  os << stamp.csv_comment() << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Figures.

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

inline BoxStats box_stats(const std::vector<double>& values) {
  BoxStats b;
  if (values.empty()) return b;
  b.n = values.size();
  b.min = quantile(values, 0.0);
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  b.max = quantile(values, 1.0);
  return b;
}

// One rank panel: columns are contexts (e.g. scenarios), each holding the
// ranks of all series; series are connected across contexts.
struct RankPanel {
  std::string title;
  std::vector<std::string> columns;                      // context labels
  std::map<std::string, std::vector<int>> series;        // method -> rank per column (0 = absent)
};

inline void render_rank_panel(SvgWriter& svg, const RankPanel& panel, double x0, double y0,
                              double width, double height) {
  static const char* palette[] = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#e67e22",
                                  "#16a085", "#7f8c8d", "#d35400", "#2c3e50"};
  svg.open_group("panel");
  svg.text(x0, y0 - 8, panel.title, 13, "start");
  const std::size_t ncol = panel.columns.size();
  if (ncol == 0) {
    svg.close_group();
    return;
  }
  int max_rank = 1;
  for (const auto& [m, ranks] : panel.series) {
    for (int r : ranks) max_rank = std::max(max_rank, r);
  }
  const double col_w = width / static_cast<double>(ncol);
  const double legend_h = 14.0 * static_cast<double>(panel.series.size());
  const double plot_h = std::max(40.0, height - legend_h - 30.0);
  auto rank_y = [&](int rank) {
    if (max_rank == 1) return y0 + plot_h / 2.0;
    return y0 + 10.0 + (static_cast<double>(rank - 1) / static_cast<double>(max_rank - 1)) *
                           (plot_h - 20.0);
  };
  for (std::size_t c = 0; c < ncol; ++c) {
    const double cx = x0 + col_w * (static_cast<double>(c) + 0.5);
    svg.open_group("scenario-col");
    svg.line(cx, y0 + 4, cx, y0 + plot_h - 4, "#dddddd");
    svg.text(cx, y0 + plot_h + 12, panel.columns[c], 10, "middle");
    svg.close_group();
  }
  std::size_t si = 0;
  for (const auto& [method, ranks] : panel.series) {
    const std::string color = palette[si % (sizeof(palette) / sizeof(palette[0]))];
    double prev_x = 0.0, prev_y = 0.0;
    bool has_prev = false;
    for (std::size_t c = 0; c < ncol && c < ranks.size(); ++c) {
      if (ranks[c] <= 0) {
        has_prev = false;
        continue;
      }
      const double cx = x0 + col_w * (static_cast<double>(c) + 0.5);
      const double cy = rank_y(ranks[c]);
      if (has_prev) svg.line(prev_x, prev_y, cx, cy, color, 1.5);
      svg.circle(cx, cy, 3.0, color);
      prev_x = cx;
      prev_y = cy;
      has_prev = true;
    }
    svg.text(x0, y0 + plot_h + 26 + 14.0 * static_cast<double>(si), method, 10, "start", color);
    ++si;
  }
  svg.close_group();
}

// Two stacked rank panels (e.g. discard comparison and pipeline comparison).
inline std::string render_rank_figure(const RankPanel& top, const RankPanel& bottom,
                                      const std::string& desc = "") {
  const double width = 960;
  const double panel_h = 280;
  SvgWriter svg(width, 2 * panel_h + 60);
  svg.set_desc(desc);
  render_rank_panel(svg, top, 40, 30, width - 80, panel_h - 20);
  render_rank_panel(svg, bottom, 40, panel_h + 50, width - 80, panel_h - 20);
  return svg.finish();
}

// Grouped bar chart; one group per label, one bar per series entry.
struct BarGroup {
  std::string label;
  std::vector<std::pair<std::string, double>> bars;  // (series, value in [0, 1])
};

inline std::string render_bar_figure(const std::string& title,
                                     std::span<const BarGroup> groups, double reference = -1,
                                     const std::string& desc = "") {
  static const char* palette[] = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad"};
  const double width = 760;
  const double height = 360;
  const double x0 = 60, y0 = 50, plot_w = width - 100, plot_h = height - 120;
  SvgWriter svg(width, height);
  svg.set_desc(desc);
  svg.text(x0, 28, title, 14);
  svg.line(x0, y0 + plot_h, x0 + plot_w, y0 + plot_h, "#222");
  svg.line(x0, y0, x0, y0 + plot_h, "#222");
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = static_cast<double>(tick) / 4.0;
    const double y = y0 + plot_h * (1.0 - frac);
    svg.line(x0 - 4, y, x0, y, "#222");
    svg.text(x0 - 8, y + 4, format_double(frac), 10, "end");
  }
  const std::size_t ng = groups.size();
  if (ng > 0) {
    const double group_w = plot_w / static_cast<double>(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      svg.open_group("handling-group");
      const double gx = x0 + group_w * static_cast<double>(g);
      const std::size_t nb = groups[g].bars.size();
      const double bar_w = group_w * 0.7 / static_cast<double>(std::max<std::size_t>(nb, 1));
      for (std::size_t b = 0; b < nb; ++b) {
        const double v = std::clamp(groups[g].bars[b].second, 0.0, 1.0);
        const double bx = gx + group_w * 0.15 + bar_w * static_cast<double>(b);
        svg.rect(bx, y0 + plot_h * (1.0 - v), bar_w * 0.9, plot_h * v,
                 palette[b % (sizeof(palette) / sizeof(palette[0]))]);
        svg.text(bx + bar_w * 0.45, y0 + plot_h * (1.0 - v) - 4,
                 format_double(std::round(v * 100.0) / 100.0), 9, "middle");
      }
      svg.text(gx + group_w / 2.0, y0 + plot_h + 16, groups[g].label, 10, "middle");
      svg.close_group();
    }
    // series legend from the first group
    for (std::size_t b = 0; b < groups[0].bars.size(); ++b) {
      const double lx = x0 + 120.0 * static_cast<double>(b);
      svg.rect(lx, height - 34, 10, 10, palette[b % 4]);
      svg.text(lx + 14, height - 25, groups[0].bars[b].first, 10);
    }
  }
  if (reference >= 0.0 && reference <= 1.0) {
    const double y = y0 + plot_h * (1.0 - reference);
    svg.line(x0, y, x0 + plot_w, y, "#999999", 1.0);
  }
  return svg.finish();
}

// Box figure with failures drawn as contrast-colored scatters beyond the
// value range (offset = failure_offset_frac of the range, above for
// lower-is-better measures, below for higher-is-better).
struct BoxColumn {
  std::string label;
  BoxStats box;
  std::size_t n_failures = 0;
};

inline std::string render_box_figure(const std::string& title,
                                     std::span<const BoxColumn> columns,
                                     const MeasureSpec& measure,
                                     double failure_offset_frac = 0.05,
                                     const std::string& desc = "") {
  const double width = 720;
  const double height = 380;
  const double x0 = 60, y0 = 50, plot_w = width - 100, plot_h = height - 120;
  SvgWriter svg(width, height);
  svg.set_desc(desc);
  svg.text(x0, 28, title, 14);
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& c : columns) {
    if (c.box.n == 0) continue;
    if (!any) {
      lo = c.box.min;
      hi = c.box.max;
      any = true;
    } else {
      lo = std::min(lo, c.box.min);
      hi = std::max(hi, c.box.max);
    }
  }
  if (!any) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi == lo) {
    hi += 0.5;
    lo -= 0.5;
  }
  const bool failures_above = measure.direction != Direction::HigherBetter;
  const double range = hi - lo;
  const double margin = range * (failure_offset_frac + 0.05);
  const double axis_lo = lo - (failures_above ? 0.0 : margin) - range * 0.02;
  const double axis_hi = hi + (failures_above ? margin : 0.0) + range * 0.02;
  auto ty = [&](double v) {
    return y0 + plot_h * (1.0 - (v - axis_lo) / (axis_hi - axis_lo));
  };
  svg.line(x0, y0, x0, y0 + plot_h, "#222");
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = axis_lo + (axis_hi - axis_lo) * static_cast<double>(tick) / 4.0;
    svg.line(x0 - 4, ty(v), x0, ty(v), "#222");
    svg.text(x0 - 8, ty(v) + 4, format_double(std::round(v * 1000.0) / 1000.0), 9, "end");
  }
  const std::size_t nc = columns.size();
  const double col_w = plot_w / static_cast<double>(std::max<std::size_t>(nc, 1));
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& c = columns[i];
    const double cx = x0 + col_w * (static_cast<double>(i) + 0.5);
    svg.open_group("box-col");
    if (c.box.n > 0) {
      const double bw = col_w * 0.4;
      svg.line(cx, ty(c.box.min), cx, ty(c.box.q1), "#555");
      svg.line(cx, ty(c.box.q3), cx, ty(c.box.max), "#555");
      svg.rect(cx - bw / 2, ty(c.box.q3), bw, ty(c.box.q1) - ty(c.box.q3), "#cfe3f0", "#1b6ca8");
      svg.line(cx - bw / 2, ty(c.box.median), cx + bw / 2, ty(c.box.median), "#1b6ca8", 2.0);
    }
    if (c.n_failures > 0) {
      const double fy = failures_above ? ty(hi + margin) : ty(lo - margin);
      svg.open_group("failure-scatter");
      const std::size_t dots = std::min<std::size_t>(c.n_failures, 12);
      for (std::size_t k = 0; k < dots; ++k) {
        const double off = (static_cast<double>(k) - static_cast<double>(dots - 1) / 2.0) * 6.0;
        svg.circle(cx + off, fy, 2.5, "#c0392b");
      }
      svg.text(cx, fy - 6, std::to_string(c.n_failures) + " failed", 9, "middle", "#c0392b");
      svg.close_group();
    }
    svg.text(cx, y0 + plot_h + 14, c.label, 10, "middle");
    svg.close_group();
  }
  return svg.finish();
}

}  // namespace failbench
