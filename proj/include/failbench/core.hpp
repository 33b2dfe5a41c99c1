#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "failbench/error.hpp"
#include "failbench/measure.hpp"

namespace failbench {

using MethodId = std::string;
using DatasetId = std::string;
using Duration = std::chrono::nanoseconds;

// Why a method produced no usable value. PipelineExhausted marks a fallback
// chain whose every stage failed.
enum class FailureCause {
  Calculation,
  Memory,
  Runtime,
  PipelineExhausted,
};

inline std::string failure_cause_name(FailureCause c) {
  switch (c) {
    case FailureCause::Calculation: return "calculation";
    case FailureCause::Memory: return "memory";
    case FailureCause::Runtime: return "runtime";
    case FailureCause::PipelineExhausted: return "pipeline_exhausted";
  }
  return "calculation";
}

inline FailureCause failure_cause_from_name(const std::string& s) {
  if (s == "calculation") return FailureCause::Calculation;
  if (s == "memory") return FailureCause::Memory;
  if (s == "runtime") return FailureCause::Runtime;
  if (s == "pipeline_exhausted") return FailureCause::PipelineExhausted;
  raise(Errc::parse, "unknown failure kind '" + s + "'");
}

struct Failure {
  FailureCause kind = FailureCause::Calculation;
  std::string detail;  // may be empty for Runtime budget exceedance

  bool operator==(const Failure&) const = default;
};

// One method-on-dataset result: either a finite value or a typed failure,
// never both, never neither. Absence of a result is itself a result.
struct RunOutcome {
  std::optional<double> value;
  std::optional<Failure> failure;
  Duration elapsed{0};
  bool imputed = false;  // provenance flag set by imputation policies
  std::string note;      // annotation, e.g. a warning that was not treated as failure

  bool is_success() const { return value.has_value(); }

  static RunOutcome success(double v, Duration elapsed = Duration{0}) {
    require(std::isfinite(v), Errc::non_finite_value,
            "success value must be finite, got " + std::to_string(v));
    RunOutcome o;
    o.value = v;
    o.elapsed = elapsed;
    return o;
  }

  static RunOutcome failed(FailureCause kind, std::string detail,
                           Duration elapsed = Duration{0}) {
    // Only a runtime budget exceedance is self-explanatory; every other kind
    // must carry the captured message.
    require(kind == FailureCause::Runtime || !detail.empty(), Errc::missing_detail,
            "failure of kind " + std::string(failure_cause_name(kind)) +
                " needs a detail message");
    RunOutcome o;
    o.failure = Failure{kind, std::move(detail)};
    o.elapsed = elapsed;
    return o;
  }
};

struct CellEntry {
  MethodId method;
  DatasetId dataset;
  RunOutcome outcome;
};

// Complete method x dataset grid. Every pair has exactly one cell; failures
// are stored, not dropped. Immutable after construction.
class ResultTable {
 public:
  ResultTable() = default;

  ResultTable(std::vector<MethodId> methods, std::vector<DatasetId> datasets,
              std::vector<RunOutcome> cells, MeasureSpec measure = {})
      : methods_(std::move(methods)),
        datasets_(std::move(datasets)),
        cells_(std::move(cells)),
        measure_(std::move(measure)) {
    require(cells_.size() == methods_.size() * datasets_.size(), Errc::missing_cell,
            "cell count does not match grid size");
    index_ids();
  }

  const std::vector<MethodId>& methods() const { return methods_; }
  const std::vector<DatasetId>& datasets() const { return datasets_; }
  const MeasureSpec& measure() const { return measure_; }

  std::size_t n_methods() const { return methods_.size(); }
  std::size_t n_datasets() const { return datasets_.size(); }

  std::size_t method_index(const MethodId& m) const {
    auto it = method_index_.find(m);
    require(it != method_index_.end(), Errc::unknown_method, "unknown method '" + m + "'");
    return it->second;
  }

  std::size_t dataset_index(const DatasetId& d) const {
    auto it = dataset_index_.find(d);
    require(it != dataset_index_.end(), Errc::unknown_dataset, "unknown dataset '" + d + "'");
    return it->second;
  }

  bool has_method(const MethodId& m) const { return method_index_.count(m) > 0; }

  const RunOutcome& cell(std::size_t m, std::size_t d) const {
    return cells_[m * datasets_.size() + d];
  }

  const RunOutcome& cell(const MethodId& m, const DatasetId& d) const {
    return cell(method_index(m), dataset_index(d));
  }

  std::span<const RunOutcome> row(std::size_t m) const {
    return {cells_.data() + m * datasets_.size(), datasets_.size()};
  }

  // Imputed tables carry the policy that filled them; reports that must not
  // consume imputed values check this field.
  const std::optional<std::string>& imputed_policy() const { return imputed_policy_; }
  void set_imputed_policy(std::string policy) { imputed_policy_ = std::move(policy); }

  // Per-method list of datasets actually executed under a runtime subset.
  const std::map<MethodId, std::vector<DatasetId>>& subset_manifest() const {
    return subset_manifest_;
  }
  void set_subset_manifest(std::map<MethodId, std::vector<DatasetId>> m) {
    subset_manifest_ = std::move(m);
  }

 private:
  void index_ids() {
    method_index_.reserve(methods_.size());
    for (std::size_t i = 0; i < methods_.size(); ++i) {
      require(!methods_[i].empty(), Errc::empty_id, "empty method id");
      require(method_index_.emplace(methods_[i], i).second, Errc::duplicate_id,
              "duplicate method id '" + methods_[i] + "'");
    }
    dataset_index_.reserve(datasets_.size());
    for (std::size_t i = 0; i < datasets_.size(); ++i) {
      require(!datasets_[i].empty(), Errc::empty_id, "empty dataset id");
      require(dataset_index_.emplace(datasets_[i], i).second, Errc::duplicate_id,
              "duplicate dataset id '" + datasets_[i] + "'");
    }
  }

  std::vector<MethodId> methods_;
  std::vector<DatasetId> datasets_;
  std::vector<RunOutcome> cells_;  // row-major, methods x datasets
  MeasureSpec measure_;
  std::optional<std::string> imputed_policy_;
  std::map<MethodId, std::vector<DatasetId>> subset_manifest_;
  std::unordered_map<std::string, std::size_t> method_index_;
  std::unordered_map<std::string, std::size_t> dataset_index_;
};

// Validating constructor: rejects holes, duplicates, and ids outside the grid.
inline ResultTable build_table(std::vector<MethodId> methods, std::vector<DatasetId> datasets,
                               const std::vector<CellEntry>& entries, MeasureSpec measure = {}) {
  // Index first so bad ids in entries are reported against the declared grid.
  std::unordered_map<std::string, std::size_t> mi;
  std::unordered_map<std::string, std::size_t> di;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    require(!methods[i].empty(), Errc::empty_id, "empty method id");
    require(mi.emplace(methods[i], i).second, Errc::duplicate_id,
            "duplicate method id '" + methods[i] + "'");
  }
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    require(!datasets[i].empty(), Errc::empty_id, "empty dataset id");
    require(di.emplace(datasets[i], i).second, Errc::duplicate_id,
            "duplicate dataset id '" + datasets[i] + "'");
  }

  std::vector<RunOutcome> cells(methods.size() * datasets.size());
  std::vector<bool> seen(cells.size(), false);
  for (const auto& e : entries) {
    auto m = mi.find(e.method);
    require(m != mi.end(), Errc::unknown_method, "entry for unknown method '" + e.method + "'");
    auto d = di.find(e.dataset);
    require(d != di.end(), Errc::unknown_dataset,
            "entry for unknown dataset '" + e.dataset + "'");
    const std::size_t idx = m->second * datasets.size() + d->second;
    require(!seen[idx], Errc::duplicate_cell,
            "duplicate cell (" + e.method + ", " + e.dataset + ")");
    if (e.outcome.is_success()) {
      require(std::isfinite(*e.outcome.value), Errc::non_finite_value,
              "non-finite value in cell (" + e.method + ", " + e.dataset + ")");
    }
    cells[idx] = e.outcome;
    seen[idx] = true;
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      require(seen[m * datasets.size() + d], Errc::missing_cell,
              "missing cell (" + methods[m] + ", " + datasets[d] + ")");
    }
  }
  return ResultTable(std::move(methods), std::move(datasets), std::move(cells),
                     std::move(measure));
}

// Datasets on which `method` produced a value, in table order.
inline std::vector<DatasetId> success_set(const ResultTable& table, const MethodId& method) {
  const std::size_t m = table.method_index(method);
  std::vector<DatasetId> out;
  for (std::size_t d = 0; d < table.n_datasets(); ++d) {
    if (table.cell(m, d).is_success()) out.push_back(table.datasets()[d]);
  }
  return out;
}

// Intersection of success sets: datasets where none of `methods` failed.
inline std::vector<DatasetId> joint_success_set(const ResultTable& table,
                                                std::span<const MethodId> methods) {
  require(!methods.empty(), Errc::empty_method_list, "joint success set of no methods");
  std::vector<std::size_t> idx;
  idx.reserve(methods.size());
  for (const auto& m : methods) idx.push_back(table.method_index(m));
  std::vector<DatasetId> out;
  for (std::size_t d = 0; d < table.n_datasets(); ++d) {
    bool all = true;
    for (std::size_t m : idx) {
      if (!table.cell(m, d).is_success()) {
        all = false;
        break;
      }
    }
    if (all) out.push_back(table.datasets()[d]);
  }
  return out;
}

// Copy with all elapsed times zeroed; canonical form for byte-comparable
// outputs (wall-clock timing is the one nondeterministic cell field).
inline ResultTable strip_timing(const ResultTable& table) {
  std::vector<RunOutcome> cells;
  cells.reserve(table.n_methods() * table.n_datasets());
  for (std::size_t m = 0; m < table.n_methods(); ++m) {
    for (std::size_t d = 0; d < table.n_datasets(); ++d) {
      RunOutcome o = table.cell(m, d);
      o.elapsed = Duration{0};
      cells.push_back(std::move(o));
    }
  }
  ResultTable out(table.methods(), table.datasets(), std::move(cells), table.measure());
  if (table.imputed_policy()) out.set_imputed_policy(*table.imputed_policy());
  out.set_subset_manifest(table.subset_manifest());
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. JSON numbers round-trip at full binary precision (nlohmann
// emits shortest representations); CSV numbers use std::to_chars shortest.

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size(), Errc::parse,
          "bad numeric field '" + s + "'");
  return v;
}

inline double elapsed_to_ms(Duration d) {
  return static_cast<double>(d.count()) / 1e6;
}

inline Duration elapsed_from_ms(double ms) {
  return Duration{static_cast<std::int64_t>(std::llround(ms * 1e6))};
}

inline nlohmann::json outcome_to_json(const MethodId& m, const DatasetId& d,
                                      const RunOutcome& o) {
  nlohmann::json cell;
  cell["method"] = m;
  cell["dataset"] = d;
  if (o.is_success()) {
    cell["value"] = *o.value;
  } else {
    cell["failure"] = {{"kind", failure_cause_name(o.failure->kind)},
                       {"detail", o.failure->detail}};
  }
  cell["elapsed_ms"] = elapsed_to_ms(o.elapsed);
  if (o.imputed) cell["imputed"] = true;
  if (!o.note.empty()) cell["note"] = o.note;
  return cell;
}

inline nlohmann::json table_to_json(const ResultTable& table) {
  nlohmann::json j;
  j["schema"] = "failbench.result_table/1";
  j["methods"] = table.methods();
  j["datasets"] = table.datasets();
  nlohmann::json measure;
  measure["name"] = table.measure().name;
  measure["direction"] = direction_name(table.measure().direction);
  if (table.measure().direction == Direction::CloserToTarget) {
    measure["target"] = table.measure().target;
  }
  j["measure"] = measure;
  if (table.imputed_policy()) j["imputed_policy"] = *table.imputed_policy();
  if (!table.subset_manifest().empty()) {
    nlohmann::json man = nlohmann::json::object();
    for (const auto& [m, ds] : table.subset_manifest()) man[m] = ds;
    j["runtime_subset_manifest"] = man;
  }
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t m = 0; m < table.n_methods(); ++m) {
    for (std::size_t d = 0; d < table.n_datasets(); ++d) {
      cells.push_back(
          outcome_to_json(table.methods()[m], table.datasets()[d], table.cell(m, d)));
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

inline ResultTable table_from_json(const nlohmann::json& j) {
  try {
    MeasureSpec measure;
    if (j.contains("measure")) {
      measure.name = j.at("measure").at("name").get<std::string>();
      measure.direction = direction_from_name(j.at("measure").at("direction").get<std::string>());
      if (j.at("measure").contains("target")) {
        measure.target = j.at("measure").at("target").get<double>();
      }
    }
    std::vector<CellEntry> entries;
    for (const auto& cell : j.at("cells")) {
      CellEntry e;
      e.method = cell.at("method").get<std::string>();
      e.dataset = cell.at("dataset").get<std::string>();
      if (cell.contains("value")) {
        e.outcome = RunOutcome::success(cell.at("value").get<double>());
      } else {
        const auto& f = cell.at("failure");
        e.outcome = RunOutcome::failed(
            failure_cause_from_name(f.at("kind").get<std::string>()),
            f.value("detail", std::string{}));
      }
      e.outcome.elapsed = elapsed_from_ms(cell.value("elapsed_ms", 0.0));
      e.outcome.imputed = cell.value("imputed", false);
      e.outcome.note = cell.value("note", std::string{});
      entries.push_back(std::move(e));
    }
    ResultTable out = build_table(j.at("methods").get<std::vector<std::string>>(),
                                  j.at("datasets").get<std::vector<std::string>>(), entries,
                                  measure);
    if (j.contains("imputed_policy")) {
      out.set_imputed_policy(j.at("imputed_policy").get<std::string>());
    }
    if (j.contains("runtime_subset_manifest")) {
      std::map<MethodId, std::vector<DatasetId>> man;
      for (const auto& [k, v] : j.at("runtime_subset_manifest").items()) {
        man[k] = v.get<std::vector<std::string>>();
      }
      out.set_subset_manifest(std::move(man));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::parse, std::string("bad result table json: ") + e.what());
  }
}

// RFC 4180 quoting for fields that may contain separators or quotes.
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Full RFC 4180 record parse: quoted fields may span lines.
inline std::vector<std::vector<std::string>> csv_parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool row_started = false;
  auto end_field = [&] {
    fields.push_back(std::move(cur));
    cur.clear();
  };
  auto end_record = [&] {
    if (!row_started && fields.empty()) return;
    end_field();
    records.push_back(std::move(fields));
    fields.clear();
    row_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; row_started = true; break;
      case ',': end_field(); row_started = true; break;
      case '\r': break;
      case '\n': end_record(); break;
      default: cur += c; row_started = true;
    }
  }
  if (row_started || !cur.empty() || !fields.empty()) end_record();
  return records;
}

// Flat one-row-per-cell CSV. Failure cells have an empty value column and a
// populated kind column.
inline std::string table_to_csv(const ResultTable& table) {
  std::ostringstream os;
  os << "method,dataset,value,failure_kind,failure_detail,elapsed_ms,imputed,note\n";
  for (std::size_t m = 0; m < table.n_methods(); ++m) {
    for (std::size_t d = 0; d < table.n_datasets(); ++d) {
      const RunOutcome& o = table.cell(m, d);
      os << csv_escape(table.methods()[m]) << ',' << csv_escape(table.datasets()[d]) << ',';
      if (o.is_success()) {
        os << format_double(*o.value) << ",,";
      } else {
        os << ',' << failure_cause_name(o.failure->kind) << ','
           << csv_escape(o.failure->detail);
      }
      os << ',' << format_double(elapsed_to_ms(o.elapsed)) << ',' << (o.imputed ? 1 : 0)
         << ',' << csv_escape(o.note) << '\n';
    }
  }
  if (table.imputed_policy()) {
    os << "# imputed_policy: " << *table.imputed_policy() << '\n';
  }
  return os.str();
}

inline ResultTable table_from_csv(const std::string& text, MeasureSpec measure = {}) {
  const auto records = csv_parse_records(text);
  require(!records.empty(), Errc::parse, "empty csv");
  std::vector<CellEntry> entries;
  std::vector<MethodId> methods;
  std::vector<DatasetId> datasets;
  std::unordered_set<std::string> seen_m;
  std::unordered_set<std::string> seen_d;
  std::optional<std::string> imputed_policy;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r];
    if (!f.empty() && f[0].rfind("# imputed_policy: ", 0) == 0) {
      std::string joined = f[0];
      for (std::size_t i = 1; i < f.size(); ++i) joined += "," + f[i];
      imputed_policy = joined.substr(18);
      continue;
    }
    if (f.size() == 1 && (f[0].empty() || f[0][0] == '#')) continue;
    require(f.size() == 8, Errc::parse, "bad csv row " + std::to_string(r + 1));
    CellEntry e;
    e.method = f[0];
    e.dataset = f[1];
    if (!f[2].empty()) {
      e.outcome = RunOutcome::success(parse_double(f[2]));
    } else {
      e.outcome = RunOutcome::failed(failure_cause_from_name(f[3]), f[4]);
    }
    e.outcome.elapsed = elapsed_from_ms(parse_double(f[5]));
    e.outcome.imputed = f[6] == "1";
    e.outcome.note = f[7];
    if (seen_m.insert(e.method).second) methods.push_back(e.method);
    if (seen_d.insert(e.dataset).second) datasets.push_back(e.dataset);
    entries.push_back(std::move(e));
  }
  ResultTable out =
      build_table(std::move(methods), std::move(datasets), entries, std::move(measure));
  if (imputed_policy) out.set_imputed_policy(*imputed_policy);
  return out;
}

}  // namespace failbench
