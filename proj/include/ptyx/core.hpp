#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptyx {

using Code = std::uint64_t;

enum class Cmp { LT = -1, EQ = 0, GT = 1 };

inline Cmp flip(Cmp c) {
  return c == Cmp::LT ? Cmp::GT : c == Cmp::GT ? Cmp::LT : Cmp::EQ;
}

inline const char* to_string(Cmp c) {
  return c == Cmp::LT ? "LT" : c == Cmp::GT ? "GT" : "EQ";
}

template <class T>
Cmp cmp3(const T& a, const T& b) {
  return a < b ? Cmp::LT : b < a ? Cmp::GT : Cmp::EQ;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownElement : Error {
  explicit UnknownElement(Code c)
      : Error("unknown element code " + std::to_string(c)) {}
};

struct BudgetExhausted : Error {
  using Error::Error;
};

struct PatternInconsistency : Error {
  using Error::Error;
};

struct DomainMismatch : Error {
  using Error::Error;
};

struct StructureMismatch : Error {
  using Error::Error;
};

struct StreamExhausted : Error {
  using Error::Error;
};

// Raised by the expression parsers; carries the token and the production.
struct ParseError : Error {
  std::string token, production, message;
  ParseError(std::string tok, std::string prod, const std::string& msg)
      : Error(msg + " at '" + tok + "' in <" + prod + ">"),
        token(std::move(tok)), production(std::move(prod)), message(msg) {}
};

// Tri-state result of a semi-decision.
enum class Search { Found, None, Exhausted };

inline const char* to_string(Search s) {
  return s == Search::Found ? "found" : s == Search::None ? "none" : "budget-exhausted";
}

// Work counter shared by the bounded searches.
struct Budget {
  std::uint64_t limit;
  std::uint64_t used = 0;
  explicit Budget(std::uint64_t l) : limit(l) {}
  bool spend(std::uint64_t n = 1) {
    used += n;
    return used <= limit;
  }
  bool exhausted() const { return used > limit; }
};

}  // namespace ptyx
