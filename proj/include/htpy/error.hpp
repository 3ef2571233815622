#pragma once

#include <stdexcept>
#include <string>

namespace htpy {

// Parameter outside the domain where a distribution or process is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed caller input (shapes, grids, unsupported combinations).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal sampler invariant failed; indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

template <class Error = DomainError>
inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

}  // namespace detail
}  // namespace htpy
