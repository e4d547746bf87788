#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "core.hpp"

namespace ptyx {

// Cantor normal form below epsilon_0: terms w^exp * coef, exponents strictly
// decreasing, coefficients positive. Zero is the empty sum.
struct Cnf {
  struct Term;
  std::vector<Term> terms;

  Cnf() = default;
  static Cnf nat(std::uint64_t n);
  static Cnf omega();

  bool is_zero() const { return terms.empty(); }
  bool is_finite() const;
  std::uint64_t to_nat() const;  // requires is_finite()
  bool valid() const;
};

struct Cnf::Term {
  Cnf exp;
  std::uint64_t coef = 1;
};

Cmp compare(const Cnf& a, const Cnf& b);

inline bool operator==(const Cnf& a, const Cnf& b) { return compare(a, b) == Cmp::EQ; }
inline bool operator!=(const Cnf& a, const Cnf& b) { return !(a == b); }
inline bool operator<(const Cnf& a, const Cnf& b) { return compare(a, b) == Cmp::LT; }
inline bool operator<=(const Cnf& a, const Cnf& b) { return compare(a, b) != Cmp::GT; }
inline bool operator>(const Cnf& a, const Cnf& b) { return compare(a, b) == Cmp::GT; }

inline Cmp compare(const Cnf& a, const Cnf& b) {
  std::size_t n = std::min(a.terms.size(), b.terms.size());
  for (std::size_t i = 0; i < n; ++i) {
    Cmp c = compare(a.terms[i].exp, b.terms[i].exp);
    if (c != Cmp::EQ) return c;
    c = cmp3(a.terms[i].coef, b.terms[i].coef);
    if (c != Cmp::EQ) return c;
  }
  return cmp3(a.terms.size(), b.terms.size());
}

inline Cnf Cnf::nat(std::uint64_t n) {
  Cnf r;
  if (n) r.terms.push_back({Cnf{}, n});
  return r;
}

inline Cnf Cnf::omega() {
  Cnf r;
  r.terms.push_back({Cnf::nat(1), 1});
  return r;
}

inline bool Cnf::is_finite() const {
  return terms.empty() || (terms.size() == 1 && terms[0].exp.is_zero());
}

inline std::uint64_t Cnf::to_nat() const {
  if (!is_finite()) throw DomainMismatch("not a natural number");
  return terms.empty() ? 0 : terms[0].coef;
}

inline bool Cnf::valid() const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].coef == 0 || !terms[i].exp.valid()) return false;
    if (i && !(terms[i].exp < terms[i - 1].exp)) return false;
  }
  return true;
}

inline Cnf cnf_add(const Cnf& a, const Cnf& b) {
  if (b.is_zero()) return a;
  const Cnf& e = b.terms[0].exp;
  Cnf r;
  for (const auto& t : a.terms) {
    Cmp c = compare(t.exp, e);
    if (c == Cmp::GT) {
      r.terms.push_back(t);
    } else {
      if (c == Cmp::EQ) {
        r.terms.push_back({e, t.coef + b.terms[0].coef});
        r.terms.insert(r.terms.end(), b.terms.begin() + 1, b.terms.end());
        return r;
      }
      break;
    }
  }
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  return r;
}

inline Cnf cnf_omega_pow(const Cnf& a) {
  Cnf r;
  r.terms.push_back({a, 1});
  return r;
}

inline Cnf cnf_mul(const Cnf& a, const Cnf& b) {
  if (a.is_zero() || b.is_zero()) return Cnf{};
  Cnf r;
  for (const auto& t : b.terms) {
    Cnf part;
    if (t.exp.is_zero()) {
      part = a;
      part.terms[0].coef *= t.coef;
    } else {
      part.terms.push_back({cnf_add(a.terms[0].exp, t.exp), t.coef});
    }
    r = cnf_add(r, part);
  }
  return r;
}

// a^b where a is w^e (coefficient 1) or both are finite.
inline Cnf cnf_pow(const Cnf& a, const Cnf& b) {
  if (b.is_zero()) return Cnf::nat(1);
  if (a.is_zero()) return Cnf{};
  if (a.is_finite() && b.is_finite()) {
    std::uint64_t r = 1, base = a.to_nat();
    for (std::uint64_t i = 0; i < b.to_nat(); ++i) r *= base;
    return Cnf::nat(r);
  }
  if (a.terms.size() == 1 && a.terms[0].coef == 1) return cnf_omega_pow(cnf_mul(a.terms[0].exp, b));
  if (a == Cnf::nat(1)) return a;
  throw DomainMismatch("exponentiation supported only for base w^x or finite operands");
}

// The unique g with a + g = b, for a <= b.
inline Cnf cnf_left_sub(const Cnf& a, const Cnf& b) {
  if (b < a) throw DomainMismatch("left subtraction needs a <= b");
  std::size_t i = 0;
  while (i < a.terms.size() && i < b.terms.size() && a.terms[i].exp == b.terms[i].exp &&
         a.terms[i].coef == b.terms[i].coef)
    ++i;
  Cnf r;
  if (i == a.terms.size()) {
    r.terms.assign(b.terms.begin() + i, b.terms.end());
    return r;
  }
  if (a.terms[i].exp == b.terms[i].exp) {
    r.terms.push_back({b.terms[i].exp, b.terms[i].coef - a.terms[i].coef});
    r.terms.insert(r.terms.end(), b.terms.begin() + i + 1, b.terms.end());
  } else {
    r.terms.assign(b.terms.begin() + i, b.terms.end());
  }
  return r;
}

// Enumeration weight: w(0) = 0, w(sum w^e c) = sum (w(e) + c).
inline std::uint64_t weight(const Cnf& a) {
  std::uint64_t w = 0;
  for (const auto& t : a.terms) w += weight(t.exp) + t.coef;
  return w;
}

std::string to_string(const Cnf& a);

namespace detail {
inline bool cnf_atomic_exp(const Cnf& e) {
  return e.is_finite() || (e.terms.size() == 1 && e.terms[0].coef == 1);
}
}  // namespace detail

inline std::string to_string(const Cnf& a) {
  if (a.is_zero()) return "0";
  std::string s;
  for (std::size_t i = 0; i < a.terms.size(); ++i) {
    const auto& t = a.terms[i];
    if (i) s += "+";
    if (t.exp.is_zero()) {
      s += std::to_string(t.coef);
      continue;
    }
    s += "w";
    if (t.exp != Cnf::nat(1)) {
      std::string e = to_string(t.exp);
      s += detail::cnf_atomic_exp(t.exp) ? "^" + e : "^(" + e + ")";
    }
    if (t.coef > 1) s += "*" + std::to_string(t.coef);
  }
  return s;
}

namespace detail {

struct CnfParser {
  const std::string& s;
  std::size_t p = 0;

  char peek() {
    while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    return p < s.size() ? s[p] : '\0';
  }
  [[noreturn]] void fail(const std::string& prod, const std::string& msg) {
    std::string tok = p < s.size() ? s.substr(p, 1) : "<end>";
    throw ParseError(tok, prod, msg);
  }
  Cnf expr() {
    Cnf r = term();
    while (peek() == '+') {
      ++p;
      r = cnf_add(r, term());
    }
    return r;
  }
  Cnf term() {
    Cnf r = factor();
    while (peek() == '*') {
      ++p;
      r = cnf_mul(r, factor());
    }
    return r;
  }
  Cnf factor() {
    Cnf base = atom();
    if (peek() == '^') {
      ++p;
      Cnf e = factor();
      try {
        return cnf_pow(base, e);
      } catch (const DomainMismatch& ex) {
        fail("cnf-factor", ex.what());
      }
    }
    return base;
  }
  Cnf atom() {
    char c = peek();
    if (c == 'w') {
      ++p;
      return Cnf::omega();
    }
    if (c == '(') {
      ++p;
      Cnf r = expr();
      if (peek() != ')') fail("cnf-atom", "expected ')'");
      ++p;
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::uint64_t v = 0;
      while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) v = v * 10 + (s[p++] - '0');
      return Cnf::nat(v);
    }
    fail("cnf-atom", "expected 'w', a number or '('");
  }
};

}  // namespace detail

inline Cnf parse_cnf(const std::string& s) {
  detail::CnfParser ps{s};
  Cnf r = ps.expr();
  if (ps.peek() != '\0') ps.fail("cnf-expr", "trailing input");
  return r;
}

// All notations below alpha of a given weight, ascending. Memoized.
class CnfCatalog {
 public:
  static const std::vector<Cnf>& below(const Cnf& alpha, std::uint64_t w) {
    static CnfCatalog cat;
    std::lock_guard<std::mutex> lk(cat.mu_);
    return cat.below_locked(alpha, w);
  }

 private:
  std::mutex mu_;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<Cnf>> memo_;

  const std::vector<Cnf>& below_locked(const Cnf& alpha, std::uint64_t w) {
    auto key = std::make_pair(to_string(alpha), w);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::vector<Cnf> out;
    if (!alpha.is_zero()) {
      if (w == 0) {
        out.push_back(Cnf{});
      } else {
        const Cnf& e0 = alpha.terms[0].exp;
        std::uint64_t c0 = alpha.terms[0].coef;
        Cnf rest;
        rest.terms.assign(alpha.terms.begin() + 1, alpha.terms.end());
        Cnf pe0 = cnf_omega_pow(e0);
        std::uint64_t we0 = weight(e0);
        for (std::uint64_t c = 1; c <= w; ++c) {
          // leading exponent strictly below e0
          for (std::uint64_t we = 0; we + c <= w; ++we) {
            std::vector<Cnf> exps = below_locked(e0, we);
            for (const Cnf& e : exps) {
              std::vector<Cnf> tails = below_locked(cnf_omega_pow(e), w - we - c);
              for (const Cnf& t : tails) out.push_back(prepend(e, c, t));
            }
          }
          // leading exponent equal to e0
          if (we0 + c <= w && c <= c0) {
            const Cnf& bound = c < c0 ? pe0 : rest;
            std::vector<Cnf> tails = below_locked(bound, w - we0 - c);
            for (const Cnf& t : tails) out.push_back(prepend(e0, c, t));
          }
        }
        std::sort(out.begin(), out.end());
      }
    }
    return memo_.emplace(key, std::move(out)).first->second;
  }

  static Cnf prepend(const Cnf& e, std::uint64_t c, const Cnf& tail) {
    Cnf r;
    r.terms.push_back({e, c});
    r.terms.insert(r.terms.end(), tail.terms.begin(), tail.terms.end());
    return r;
  }
};

}  // namespace ptyx
