#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tagweave {

using index_t = std::ptrdiff_t;

// Error categories surfaced by the CLI as `ERROR <code>: message`.
enum class errc {
  config,
  io,
  parse,
  vocabulary,
  empty_dataset,
  split_infeasible,
  param,
  shape,
  domain,
  divergence,
  conflict,
  undefined_ci,
  internal,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::config: return "config";
    case errc::io: return "io";
    case errc::parse: return "parse";
    case errc::vocabulary: return "vocabulary";
    case errc::empty_dataset: return "empty-dataset";
    case errc::split_infeasible: return "split-infeasible";
    case errc::param: return "param";
    case errc::shape: return "shape";
    case errc::domain: return "domain";
    case errc::divergence: return "divergence";
    case errc::conflict: return "conflict";
    case errc::undefined_ci: return "undefined-ci";
    case errc::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

// Non-fatal findings (album inconsistencies, dropped tags, zero vectors...)
// are appended here when the caller provides a sink, otherwise discarded.
using WarningList = std::vector<std::string>;

inline void warn(WarningList* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace tagweave
