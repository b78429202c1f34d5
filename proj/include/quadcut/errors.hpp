#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quadcut {

// Every failure the library signals deliberately carries one of these codes,
// so callers (the CLI in particular) can map errors onto exit statuses
// without matching on message text.
enum class errc {
  syntax,              // input text does not parse
  ill_formed,          // parses but violates the language rules
  sort_violation,      // irrational value where a rational was required
  unbound_variable,
  division_by_zero,
  invalid_config,
  resource_limit,      // disjunct budget exhausted during elimination
  dimension_limit,
  empty_cut,
  unbounded_cut,
  not_downward_closed,
  has_maximum,
  invalid_epsilon,
  not_in_base,
  invalid_cell,
  not_open,
  internal,            // a decided invariant failed; always a bug
};

struct Error : std::runtime_error {
  errc code;
  Error(errc c, const std::string& m) : std::runtime_error(m), code(c) {}
};

struct SyntaxError : Error {
  std::size_t pos;  // byte offset into the source text
  SyntaxError(std::size_t p, const std::string& m)
      : Error(errc::syntax, m + " (at position " + std::to_string(p) + ")"), pos(p) {}
};

struct IllFormed : Error { explicit IllFormed(const std::string& m) : Error(errc::ill_formed, m) {} };
struct SortViolation : Error { explicit SortViolation(const std::string& m) : Error(errc::sort_violation, m) {} };
struct UnboundVariable : Error { explicit UnboundVariable(const std::string& m) : Error(errc::unbound_variable, m) {} };
struct DivisionByZero : Error { explicit DivisionByZero(const std::string& m) : Error(errc::division_by_zero, m) {} };
struct InvalidConfig : Error { explicit InvalidConfig(const std::string& m) : Error(errc::invalid_config, m) {} };
struct ResourceLimit : Error { explicit ResourceLimit(const std::string& m) : Error(errc::resource_limit, m) {} };
struct DimensionLimit : Error { explicit DimensionLimit(const std::string& m) : Error(errc::dimension_limit, m) {} };
struct EmptyCut : Error { explicit EmptyCut(const std::string& m) : Error(errc::empty_cut, m) {} };
struct UnboundedCut : Error { explicit UnboundedCut(const std::string& m) : Error(errc::unbounded_cut, m) {} };
struct NotDownwardClosed : Error { explicit NotDownwardClosed(const std::string& m) : Error(errc::not_downward_closed, m) {} };
struct HasMaximum : Error { explicit HasMaximum(const std::string& m) : Error(errc::has_maximum, m) {} };
struct InvalidEpsilon : Error { explicit InvalidEpsilon(const std::string& m) : Error(errc::invalid_epsilon, m) {} };
struct NotInBase : Error { explicit NotInBase(const std::string& m) : Error(errc::not_in_base, m) {} };
struct InvalidCell : Error { explicit InvalidCell(const std::string& m) : Error(errc::invalid_cell, m) {} };
struct NotOpen : Error { explicit NotOpen(const std::string& m) : Error(errc::not_open, m) {} };
struct InternalError : Error { explicit InternalError(const std::string& m) : Error(errc::internal, m) {} };

}  // namespace quadcut
