#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace failbench {

// Error codes for every rejectable condition in the library. The CLI maps
// config errors to exit code 2 and everything else to exit code 3.
enum class Errc {
  config,
  parse,
  // core
  missing_cell,
  duplicate_cell,
  non_finite_value,
  unknown_method,
  unknown_dataset,
  duplicate_id,
  empty_id,
  missing_detail,
  // aggregate
  empty_method_list,
  no_donor,
  undefined_input,
  empty_input,
  non_positive_estimate,
  all_undefined,
  imputed_table,
  // pipeline
  self_fallback,
  duplicate_stage,
  // engine
  empty_datasets,
  // study_ci
  empty_train,
  single_class,
  degenerate_folds,
  // report
  method_mismatch,
  dangling_annotation,
};

inline constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::config: return "config";
    case Errc::parse: return "parse";
    case Errc::missing_cell: return "missing_cell";
    case Errc::duplicate_cell: return "duplicate_cell";
    case Errc::non_finite_value: return "non_finite_value";
    case Errc::unknown_method: return "unknown_method";
    case Errc::unknown_dataset: return "unknown_dataset";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::empty_id: return "empty_id";
    case Errc::missing_detail: return "missing_detail";
    case Errc::empty_method_list: return "empty_method_list";
    case Errc::no_donor: return "no_donor";
    case Errc::undefined_input: return "undefined_input";
    case Errc::empty_input: return "empty_input";
    case Errc::non_positive_estimate: return "non_positive_estimate";
    case Errc::all_undefined: return "all_undefined";
    case Errc::imputed_table: return "imputed_table";
    case Errc::self_fallback: return "self_fallback";
    case Errc::duplicate_stage: return "duplicate_stage";
    case Errc::empty_datasets: return "empty_datasets";
    case Errc::empty_train: return "empty_train";
    case Errc::single_class: return "single_class";
    case Errc::degenerate_folds: return "degenerate_folds";
    case Errc::method_mismatch: return "method_mismatch";
    case Errc::dangling_annotation: return "dangling_annotation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  bool is_config() const noexcept { return code_ == Errc::config; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) raise(code, what);
}

}  // namespace failbench
