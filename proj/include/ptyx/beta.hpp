#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"
#include "dilator.hpp"
#include "order.hpp"

namespace ptyx::beta {

// ---------------------------------------------------------------------------
// Formulas.

struct Tm {
  bool is_var = false;
  Code c = 0;
  std::string v;
};

inline bool operator==(const Tm& a, const Tm& b) {
  return a.is_var == b.is_var && (a.is_var ? a.v == b.v : a.c == b.c);
}

enum class Op { Lt, Le, Rel, NRel, Not, And, Or, Imp, All, Ex };

struct Fm;
using Formula = std::shared_ptr<const Fm>;

struct Fm {
  Op op;
  std::string name;  // bound variable or relation symbol
  std::vector<Tm> args;
  Formula a, b;
};

using Signature = std::map<std::string, std::size_t>;

inline Formula mk(Op op, Formula a = nullptr, Formula b = nullptr, std::string name = "", std::vector<Tm> args = {}) {
  return std::make_shared<const Fm>(Fm{op, std::move(name), std::move(args), std::move(a), std::move(b)});
}
inline Tm cst(Code c) { return Tm{false, c, {}}; }
inline Tm var(std::string v) { return Tm{true, 0, std::move(v)}; }
inline Formula lt(Tm x, Tm y) { return mk(Op::Lt, nullptr, nullptr, "", {std::move(x), std::move(y)}); }
inline Formula le(Tm x, Tm y) { return mk(Op::Le, nullptr, nullptr, "", {std::move(x), std::move(y)}); }
inline Formula rel(std::string r, std::vector<Tm> args, bool positive = true) {
  return mk(positive ? Op::Rel : Op::NRel, nullptr, nullptr, std::move(r), std::move(args));
}
inline Formula neg(Formula a) { return mk(Op::Not, std::move(a)); }
inline Formula conj(Formula a, Formula b) { return mk(Op::And, std::move(a), std::move(b)); }
inline Formula disj(Formula a, Formula b) { return mk(Op::Or, std::move(a), std::move(b)); }
inline Formula imp(Formula a, Formula b) { return mk(Op::Imp, std::move(a), std::move(b)); }
inline Formula all(std::string x, Formula a) { return mk(Op::All, std::move(a), nullptr, std::move(x)); }
inline Formula ex(std::string x, Formula a) { return mk(Op::Ex, std::move(a), nullptr, std::move(x)); }

inline bool is_literal(const Formula& f) {
  return f->op == Op::Lt || f->op == Op::Le || f->op == Op::Rel || f->op == Op::NRel;
}
inline bool is_quant(const Formula& f) { return f->op == Op::All || f->op == Op::Ex; }

inline bool equal(const Formula& f, const Formula& g) {
  if (f == g) return true;
  if (!f || !g || f->op != g->op || f->name != g->name || !(f->args == g->args)) return false;
  return equal(f->a, g->a) && equal(f->b, g->b);
}

inline std::string to_string(const Tm& t) { return t.is_var ? t.v : "c" + std::to_string(t.c); }

inline std::string to_string(const Formula& f);

namespace detail {
inline std::string operand(const Formula& f) {
  std::string s = to_string(f);
  return is_quant(f) ? "(" + s + ")" : s;
}
}  // namespace detail

inline std::string to_string(const Formula& f) {
  switch (f->op) {
    case Op::Lt: return to_string(f->args[0]) + " < " + to_string(f->args[1]);
    case Op::Le: return to_string(f->args[0]) + " <= " + to_string(f->args[1]);
    case Op::Rel:
    case Op::NRel: {
      std::string s = f->op == Op::NRel ? "~" + f->name + "(" : f->name + "(";
      for (std::size_t i = 0; i < f->args.size(); ++i) s += (i ? "," : "") + to_string(f->args[i]);
      return s + ")";
    }
    case Op::Not: {
      std::string s = to_string(f->a);
      return f->a->op == Op::Rel || f->a->op == Op::Not ? "~" + s : "~(" + s + ")";
    }
    case Op::And: return "(" + detail::operand(f->a) + " & " + detail::operand(f->b) + ")";
    case Op::Or: return "(" + detail::operand(f->a) + " | " + detail::operand(f->b) + ")";
    case Op::Imp: return "(" + detail::operand(f->a) + " -> " + detail::operand(f->b) + ")";
    case Op::All: return "all " + f->name + " . " + to_string(f->a);
    case Op::Ex: return "ex " + f->name + " . " + to_string(f->a);
  }
  return "?";
}

// Substitutes c for free occurrences of x.
inline Formula subst(const Formula& f, const std::string& x, Code c) {
  if (is_literal(f)) {
    bool hit = false;
    std::vector<Tm> args = f->args;
    for (auto& t : args)
      if (t.is_var && t.v == x) {
        t = cst(c);
        hit = true;
      }
    return hit ? mk(f->op, nullptr, nullptr, f->name, std::move(args)) : f;
  }
  if (is_quant(f) && f->name == x) return f;
  Formula a = f->a ? subst(f->a, x, c) : nullptr;
  Formula b = f->b ? subst(f->b, x, c) : nullptr;
  if (a == f->a && b == f->b) return f;
  return mk(f->op, a, b, f->name, f->args);
}

// Renames every constant c_i to c_{f(i)}.
inline Formula relabel(const Formula& g, const std::function<Code(Code)>& f) {
  if (is_literal(g)) {
    std::vector<Tm> args = g->args;
    for (auto& t : args)
      if (!t.is_var) t.c = f(t.c);
    return mk(g->op, nullptr, nullptr, g->name, std::move(args));
  }
  return mk(g->op, g->a ? relabel(g->a, f) : nullptr, g->b ? relabel(g->b, f) : nullptr, g->name, g->args);
}

inline void free_vars(const Formula& f, std::set<std::string>& bound, std::set<std::string>& out) {
  if (is_literal(f)) {
    for (auto& t : f->args)
      if (t.is_var && !bound.count(t.v)) out.insert(t.v);
    return;
  }
  bool added = false;
  if (is_quant(f) && !bound.count(f->name)) {
    bound.insert(f->name);
    added = true;
  }
  if (f->a) free_vars(f->a, bound, out);
  if (f->b) free_vars(f->b, bound, out);
  if (added) bound.erase(f->name);
}
inline std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> b, out;
  free_vars(f, b, out);
  return out;
}
inline bool closed(const Formula& f) { return free_vars(f).empty(); }

inline void constants(const Formula& f, std::set<Code>& out) {
  if (is_literal(f)) {
    for (auto& t : f->args)
      if (!t.is_var) out.insert(t.c);
    return;
  }
  if (f->a) constants(f->a, out);
  if (f->b) constants(f->b, out);
}
inline std::set<Code> constants(const Formula& f) {
  std::set<Code> out;
  constants(f, out);
  return out;
}

inline Formula nnf(const Formula& f, bool negated = false) {
  switch (f->op) {
    case Op::Lt: return negated ? le(f->args[1], f->args[0]) : f;
    case Op::Le: return negated ? lt(f->args[1], f->args[0]) : f;
    case Op::Rel: return negated ? rel(f->name, f->args, false) : f;
    case Op::NRel: return negated ? rel(f->name, f->args, true) : f;
    case Op::Not: return nnf(f->a, !negated);
    case Op::And: return negated ? disj(nnf(f->a, true), nnf(f->b, true)) : conj(nnf(f->a), nnf(f->b));
    case Op::Or: return negated ? conj(nnf(f->a, true), nnf(f->b, true)) : disj(nnf(f->a), nnf(f->b));
    case Op::Imp: return negated ? conj(nnf(f->a), nnf(f->b, true)) : disj(nnf(f->a, true), nnf(f->b));
    case Op::All: return negated ? ex(f->name, nnf(f->a, true)) : all(f->name, nnf(f->a));
    case Op::Ex: return negated ? all(f->name, nnf(f->a, true)) : ex(f->name, nnf(f->a));
  }
  return f;
}

inline std::size_t formula_size(const Formula& f) {
  if (is_literal(f)) return 1;
  return 1 + (f->a ? formula_size(f->a) : 0) + (f->b ? formula_size(f->b) : 0);
}

// ---------------------------------------------------------------------------
// Parser: all x . phi | ex x . phi | -> | '|' | & | ~ | < | <= | R(t,...)

namespace detail {

struct Tok {
  std::string text;
  std::size_t pos;
};

inline std::vector<Tok> lex(const std::string& s) {
  std::vector<Tok> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({s.substr(i, j - i), i});
      i = j;
      continue;
    }
    if (s.compare(i, 2, "->") == 0 || s.compare(i, 2, "<=") == 0) {
      out.push_back({s.substr(i, 2), i});
      i += 2;
      continue;
    }
    if (std::string("()<,.&|~").find(c) != std::string::npos) {
      out.push_back({std::string(1, c), i});
      ++i;
      continue;
    }
    throw ParseError(std::string(1, c), "formula", "unexpected character");
  }
  return out;
}

inline bool is_constant_name(const std::string& s) {
  return s.size() > 1 && s[0] == 'c' &&
         std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct FormulaParser {
  std::vector<Tok> toks;
  const Signature& sig;
  std::size_t p = 0;

  const std::string& peek() const {
    static const std::string end = "<end>";
    return p < toks.size() ? toks[p].text : end;
  }
  [[noreturn]] void fail(const std::string& prod, const std::string& msg) const { throw ParseError(peek(), prod, msg); }
  void expect(const std::string& t, const std::string& prod) {
    if (peek() != t) fail(prod, "expected '" + t + "'");
    ++p;
  }
  bool is_ident(const std::string& t) const {
    return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_') && t != "<end>";
  }

  Formula formula() {
    if (peek() == "all" || peek() == "ex") return quant();
    return implication();
  }
  Formula quant() {
    bool universal = peek() == "all";
    ++p;
    std::string x = peek();
    if (!is_ident(x) || x == "all" || x == "ex" || is_constant_name(x) || sig.count(x)) fail("quantifier", "expected a variable");
    ++p;
    expect(".", "quantifier");
    Formula body = formula();
    return universal ? all(x, body) : ex(x, body);
  }
  Formula implication() {
    Formula l = disjunction();
    if (peek() == "->") {
      ++p;
      Formula r = peek() == "all" || peek() == "ex" ? quant() : implication();
      return imp(l, r);
    }
    return l;
  }
  Formula disjunction() {
    Formula l = conjunction();
    while (peek() == "|") {
      ++p;
      l = disj(l, peek() == "all" || peek() == "ex" ? quant() : conjunction());
    }
    return l;
  }
  Formula conjunction() {
    Formula l = unary();
    while (peek() == "&") {
      ++p;
      l = conj(l, peek() == "all" || peek() == "ex" ? quant() : unary());
    }
    return l;
  }
  Formula unary() {
    const std::string& t = peek();
    if (t == "~") {
      ++p;
      return neg(unary());
    }
    if (t == "all" || t == "ex") return quant();
    if (t == "(") {
      ++p;
      Formula f = formula();
      expect(")", "unary");
      return f;
    }
    return atom();
  }
  Tm term() {
    const std::string& t = peek();
    if (!is_ident(t) || t == "all" || t == "ex") fail("term", "expected a constant or variable");
    ++p;
    if (is_constant_name(t)) return cst(std::stoull(t.substr(1)));
    return var(t);
  }
  Formula atom() {
    const std::string t = peek();
    if (is_ident(t) && p + 1 < toks.size() && toks[p + 1].text == "(" && !is_constant_name(t)) {
      auto it = sig.find(t);
      if (it == sig.end()) fail("atom", "undeclared relation symbol");
      p += 2;
      std::vector<Tm> args{term()};
      while (peek() == ",") {
        ++p;
        args.push_back(term());
      }
      expect(")", "atom");
      if (args.size() != it->second) fail("atom", "wrong arity for " + t);
      return rel(t, args);
    }
    Tm x = term();
    if (peek() == "<") {
      ++p;
      return lt(x, term());
    }
    if (peek() == "<=") {
      ++p;
      return le(x, term());
    }
    fail("atom", "expected '<' or '<='");
  }
};

}  // namespace detail

inline Formula parse_formula(const std::string& s, const Signature& sig = {}) {
  detail::FormulaParser ps{detail::lex(s), sig};
  Formula f = ps.formula();
  if (ps.p != ps.toks.size()) ps.fail("formula", "trailing input");
  return f;
}

// "R:2,S:1"
inline Signature parse_signature(const std::vector<std::string>& decls) {
  Signature sig;
  for (const auto& d : decls) {
    auto c = d.find(':');
    if (c == std::string::npos || c == 0) throw ParseError(d, "rel-decl", "expected NAME:ARITY");
    std::string name = d.substr(0, c);
    std::size_t ar = 0;
    try {
      ar = std::stoul(d.substr(c + 1));
    } catch (...) {
      throw ParseError(d, "rel-decl", "expected NAME:ARITY");
    }
    if (detail::is_constant_name(name) || name == "all" || name == "ex") throw ParseError(name, "rel-decl", "reserved name");
    sig[name] = ar;
  }
  return sig;
}

inline void collect_relations(const Formula& f, Signature& out) {
  if (f->op == Op::Rel || f->op == Op::NRel) out[f->name] = f->args.size();
  if (f->a) collect_relations(f->a, out);
  if (f->b) collect_relations(f->b, out);
}

// ---------------------------------------------------------------------------
// Stage-n structures and truth.

struct BetaStructure {
  std::size_t n = 0;
  std::map<std::string, std::set<std::vector<Code>>> rel;
};

inline std::string to_string(const BetaStructure& m) {
  std::string s = "(" + std::to_string(m.n) + ",<)";
  for (auto& [r, ts] : m.rel) {
    s += " " + r + "={";
    bool first = true;
    for (auto& t : ts) {
      s += first ? "(" : ",(";
      first = false;
      for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + std::to_string(t[i]);
      s += ")";
    }
    s += "}";
  }
  return s;
}

inline bool eval_in_structure(const Formula& f, const BetaStructure& m, std::map<std::string, Code> env = {}) {
  auto val = [&](const Tm& t) -> Code {
    if (!t.is_var) {
      if (t.c >= m.n) throw DomainMismatch("constant c" + std::to_string(t.c) + " outside the stage");
      return t.c;
    }
    auto it = env.find(t.v);
    if (it == env.end()) throw DomainMismatch("free variable " + t.v);
    return it->second;
  };
  switch (f->op) {
    case Op::Lt: return val(f->args[0]) < val(f->args[1]);
    case Op::Le: return val(f->args[0]) <= val(f->args[1]);
    case Op::Rel:
    case Op::NRel: {
      std::vector<Code> t;
      for (auto& a : f->args) t.push_back(val(a));
      auto it = m.rel.find(f->name);
      bool in = it != m.rel.end() && it->second.count(t);
      return f->op == Op::Rel ? in : !in;
    }
    case Op::Not: return !eval_in_structure(f->a, m, env);
    case Op::And: return eval_in_structure(f->a, m, env) && eval_in_structure(f->b, m, env);
    case Op::Or: return eval_in_structure(f->a, m, env) || eval_in_structure(f->b, m, env);
    case Op::Imp: return !eval_in_structure(f->a, m, env) || eval_in_structure(f->b, m, env);
    case Op::All:
    case Op::Ex: {
      bool universal = f->op == Op::All;
      for (Code i = 0; i < m.n; ++i) {
        env[f->name] = i;
        if (eval_in_structure(f->a, m, env) != universal) return !universal;
      }
      return universal;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Sequents. One-sided, read disjunctively. A Group stands for the disjunction
// of its body over all tuples of the stage; a Lits entry lists literal
// instances tagged by the tuple they came from.

struct LitMember {
  std::vector<Code> origin;
  Formula lit;
};

struct Entry {
  enum class Kind { Closed, Group, Lits } kind = Kind::Closed;
  Formula f;
  std::vector<std::string> vars;
  std::vector<LitMember> lits;
};

struct Sequent {
  std::vector<Entry> entries;
  std::size_t cursor = 0;
};

inline bool saturated(const Entry& e) {
  return e.kind == Entry::Kind::Lits || is_literal(e.f);
}

inline std::string to_string(const Entry& e) {
  switch (e.kind) {
    case Entry::Kind::Closed: return to_string(e.f);
    case Entry::Kind::Group: {
      std::string s = "ex ";
      for (std::size_t i = 0; i < e.vars.size(); ++i) s += (i ? "," : "") + e.vars[i];
      return s + " . " + to_string(e.f);
    }
    case Entry::Kind::Lits: {
      std::string s = "[";
      for (std::size_t i = 0; i < e.lits.size(); ++i) s += (i ? " | " : "") + to_string(e.lits[i].lit);
      return s + "]";
    }
  }
  return "?";
}

inline std::string to_string(const Sequent& s) {
  std::string out;
  for (std::size_t i = 0; i < s.entries.size(); ++i) out += (i ? " , " : "") + to_string(s.entries[i]);
  return out.empty() ? "(empty)" : out;
}

// All tuples in n^k, lexicographic.
inline std::vector<std::vector<Code>> tuples(std::size_t n, std::size_t k) {
  std::vector<std::vector<Code>> out;
  std::vector<Code> t(k, 0);
  if (k > 0 && n == 0) return out;
  while (true) {
    out.push_back(t);
    std::size_t i = k;
    while (i > 0 && t[i - 1] + 1 == n) t[--i] = 0;
    if (i == 0) break;
    ++t[i - 1];
  }
  return out;
}

inline std::size_t tuple_index(const std::vector<Code>& t, std::size_t n) {
  std::size_t r = 0;
  for (Code c : t) r = r * n + c;
  return r;
}

inline Formula instantiate(Formula body, const std::vector<std::string>& vars, const std::vector<Code>& t) {
  for (std::size_t j = vars.size(); j-- > 0;) body = subst(body, vars[j], t[j]);
  return body;
}

// Closed literal instances of a sequent at stage n.
inline std::vector<Formula> literal_instances(const Sequent& s, std::size_t n) {
  std::vector<Formula> out;
  for (const auto& e : s.entries) {
    if (e.kind == Entry::Kind::Lits) {
      for (auto& m : e.lits) out.push_back(m.lit);
    } else if (is_literal(e.f)) {
      if (e.kind == Entry::Kind::Closed) out.push_back(e.f);
      else
        for (auto& t : tuples(n, e.vars.size())) out.push_back(instantiate(e.f, e.vars, t));
    }
  }
  return out;
}

inline std::optional<std::string> axiom(const Sequent& s, std::size_t n) {
  std::set<std::pair<std::string, std::vector<Code>>> pos, negs;
  for (const auto& l : literal_instances(s, n)) {
    auto a = l->args;
    if (l->op == Op::Lt && a[0].c < a[1].c) return to_string(l);
    if (l->op == Op::Le && a[0].c <= a[1].c) return to_string(l);
    if (l->op == Op::Rel || l->op == Op::NRel) {
      std::vector<Code> t;
      for (auto& x : a) t.push_back(x.c);
      auto key = std::make_pair(l->name, t);
      if ((l->op == Op::Rel ? negs : pos).count(key)) return "dual pair " + to_string(rel(l->name, a));
      (l->op == Op::Rel ? pos : negs).insert(key);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Premise labels. A Choice resolves the conjunctive structure of a closed
// formula: And picks a side, All picks a constant, Or and Ex carry one kid
// per disjunct (Ex: one per constant of the stage).

struct Choice {
  std::int64_t pick = -1;
  std::vector<Choice> kids;
};

inline bool operator==(const Choice& a, const Choice& b) {
  if (a.pick != b.pick || a.kids.size() != b.kids.size()) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i)
    if (!(a.kids[i] == b.kids[i])) return false;
  return true;
}
inline bool operator!=(const Choice& a, const Choice& b) { return !(a == b); }

inline Cmp compare(const Choice& a, const Choice& b) {
  if (a.pick != b.pick) return cmp3(a.pick, b.pick);
  for (std::size_t i = 0; i < a.kids.size() && i < b.kids.size(); ++i) {
    Cmp c = compare(a.kids[i], b.kids[i]);
    if (c != Cmp::EQ) return c;
  }
  return cmp3(a.kids.size(), b.kids.size());
}
inline bool operator<(const Choice& a, const Choice& b) { return compare(a, b) == Cmp::LT; }

inline std::string to_string(const Choice& c) {
  if (c.kids.empty()) return c.pick < 0 ? "*" : std::to_string(c.pick);
  std::string s = c.pick < 0 ? "" : std::to_string(c.pick);
  s += "(";
  for (std::size_t i = 0; i < c.kids.size(); ++i) s += (i ? " " : "") + to_string(c.kids[i]);
  return s + ")";
}

inline std::vector<Choice> choices(const Formula& m, std::size_t n, std::size_t cap) {
  auto body = [&](Code i) { return subst(m->a, m->name, i); };
  std::vector<Choice> out;
  auto guard = [&]() {
    if (out.size() > cap) throw BudgetExhausted("premise product exceeds " + std::to_string(cap));
  };
  switch (m->op) {
    case Op::Or: {
      auto A = choices(m->a, n, cap), B = choices(m->b, n, cap);
      for (auto& x : A)
        for (auto& y : B) {
          out.push_back(Choice{-1, {x, y}});
          guard();
        }
      return out;
    }
    case Op::And:
      for (auto& x : choices(m->a, n, cap)) out.push_back(Choice{0, {x}});
      for (auto& y : choices(m->b, n, cap)) out.push_back(Choice{1, {y}});
      guard();
      return out;
    case Op::All:
      for (Code i = 0; i < n; ++i)
        for (auto& x : choices(body(i), n, cap)) {
          out.push_back(Choice{static_cast<std::int64_t>(i), {x}});
          guard();
        }
      return out;
    case Op::Ex: {
      out.push_back(Choice{-1, {}});
      for (Code i = 0; i < n; ++i) {
        auto L = choices(body(i), n, cap);
        std::vector<Choice> next;
        for (auto& c : out)
          for (auto& x : L) {
            Choice d = c;
            d.kids.push_back(x);
            next.push_back(std::move(d));
            if (next.size() > cap) throw BudgetExhausted("premise product exceeds " + std::to_string(cap));
          }
        out = std::move(next);
      }
      return out;
    }
    default: return {Choice{}};
  }
}

inline void choice_literals(const Formula& m, const Choice& c, std::vector<Code> origin, std::vector<LitMember>& out) {
  switch (m->op) {
    case Op::Or:
      choice_literals(m->a, c.kids.at(0), origin, out);
      choice_literals(m->b, c.kids.at(1), origin, out);
      return;
    case Op::And: choice_literals(c.pick == 0 ? m->a : m->b, c.kids.at(0), origin, out); return;
    case Op::All: choice_literals(subst(m->a, m->name, c.pick), c.kids.at(0), origin, out); return;
    case Op::Ex:
      for (Code i = 0; i < c.kids.size(); ++i) {
        auto o = origin;
        o.push_back(i);
        choice_literals(subst(m->a, m->name, i), c.kids[i], o, out);
      }
      return;
    default: out.push_back({origin, m});
  }
}

// Default resolution used for tuples outside the range of an embedding.
inline Choice canonical(const Formula& m, std::size_t n, Code o0) {
  switch (m->op) {
    case Op::Or: return Choice{-1, {canonical(m->a, n, o0), canonical(m->b, n, o0)}};
    case Op::And: return Choice{0, {canonical(m->a, n, o0)}};
    case Op::All: return Choice{static_cast<std::int64_t>(o0), {canonical(subst(m->a, m->name, o0), n, o0)}};
    case Op::Ex: {
      Choice c;
      for (Code i = 0; i < n; ++i) c.kids.push_back(canonical(subst(m->a, m->name, i), n, o0));
      return c;
    }
    default: return Choice{};
  }
}

// An order embedding f: n -> m of the standard finite orders.
struct StageMap {
  std::vector<Code> f;
  std::size_t m = 0;

  std::size_t n() const { return f.size(); }
  Code operator()(Code c) const { return f.at(c); }
  std::optional<Code> inverse(Code c) const {
    auto it = std::lower_bound(f.begin(), f.end(), c);
    if (it == f.end() || *it != c) return std::nullopt;
    return static_cast<Code>(it - f.begin());
  }
  bool in_range(const std::vector<Code>& t) const {
    return std::all_of(t.begin(), t.end(), [&](Code c) { return inverse(c).has_value(); });
  }
  std::function<Code(Code)> fn() const {
    return [this](Code c) { return f.at(c); };
  }
  static StageMap identity(std::size_t n) {
    StageMap s{std::vector<Code>(n), n};
    for (std::size_t i = 0; i < n; ++i) s.f[i] = i;
    return s;
  }
  StageMap then(const StageMap& g) const {
    StageMap r{{}, g.m};
    for (Code c : f) r.f.push_back(g(c));
    return r;
  }
};

// mn at stage n, mm = relabel(mn) at stage m.
inline Choice transport(const Formula& mn, const Formula& mm, const Choice& c, const StageMap& f, Code o0) {
  switch (mn->op) {
    case Op::Or:
      return Choice{-1, {transport(mn->a, mm->a, c.kids.at(0), f, o0), transport(mn->b, mm->b, c.kids.at(1), f, o0)}};
    case Op::And:
      return Choice{c.pick, {transport(c.pick == 0 ? mn->a : mn->b, c.pick == 0 ? mm->a : mm->b, c.kids.at(0), f, o0)}};
    case Op::All: {
      Code j = f(static_cast<Code>(c.pick));
      return Choice{static_cast<std::int64_t>(j),
                    {transport(subst(mn->a, mn->name, c.pick), subst(mm->a, mm->name, j), c.kids.at(0), f, o0)}};
    }
    case Op::Ex: {
      Choice r;
      for (Code j = 0; j < f.m; ++j) {
        Formula sm = subst(mm->a, mm->name, j);
        if (auto i = f.inverse(j)) r.kids.push_back(transport(subst(mn->a, mn->name, *i), sm, c.kids.at(*i), f, o0));
        else r.kids.push_back(canonical(sm, f.m, o0));
      }
      return r;
    }
    default: return Choice{};
  }
}

// Candidate preimage of a stage-m choice; confirm with transport.
inline std::optional<Choice> restrict_choice(const Formula& mm, const Choice& c, const StageMap& f) {
  switch (mm->op) {
    case Op::Or: {
      auto a = restrict_choice(mm->a, c.kids.at(0), f), b = restrict_choice(mm->b, c.kids.at(1), f);
      if (!a || !b) return std::nullopt;
      return Choice{-1, {*a, *b}};
    }
    case Op::And: {
      auto a = restrict_choice(c.pick == 0 ? mm->a : mm->b, c.kids.at(0), f);
      if (!a) return std::nullopt;
      return Choice{c.pick, {*a}};
    }
    case Op::All: {
      auto i = f.inverse(static_cast<Code>(c.pick));
      if (!i) return std::nullopt;
      auto a = restrict_choice(subst(mm->a, mm->name, c.pick), c.kids.at(0), f);
      if (!a) return std::nullopt;
      return Choice{static_cast<std::int64_t>(*i), {*a}};
    }
    case Op::Ex: {
      Choice r;
      for (Code i = 0; i < f.n(); ++i) {
        auto a = restrict_choice(subst(mm->a, mm->name, f(i)), c.kids.at(f(i)), f);
        if (!a) return std::nullopt;
        r.kids.push_back(*a);
      }
      return r;
    }
    default: return Choice{};
  }
}

// ---------------------------------------------------------------------------
// Rules. Scheduling is round-robin over entries starting at the cursor;
// every rule is invertible, so a saturated leaf is either an axiom or
// carries a countermodel.

struct Step {
  std::string rule;  // or, ex, and, n-rule, group-or, group-ex, block
  std::size_t principal = 0;
};

inline std::optional<Step> step_of(const Sequent& s) {
  std::size_t k = s.entries.size();
  for (std::size_t d = 0; d < k; ++d) {
    std::size_t i = (s.cursor + d) % k;
    const Entry& e = s.entries[i];
    if (saturated(e)) continue;
    Op op = e.f->op;
    if (e.kind == Entry::Kind::Closed) {
      switch (op) {
        case Op::Or: return Step{"or", i};
        case Op::Ex: return Step{"ex", i};
        case Op::And: return Step{"and", i};
        case Op::All: return Step{"n-rule", i};
        default: break;
      }
    } else {
      switch (op) {
        case Op::Or: return Step{"group-or", i};
        case Op::Ex: return Step{"group-ex", i};
        case Op::And:
        case Op::All: return Step{"block", i};
        default: break;
      }
    }
    throw Error("sequent entry not in negation normal form: " + to_string(e));
  }
  return std::nullopt;
}

inline constexpr std::size_t kPremiseCap = 2000000;

inline std::vector<Choice> premise_labels(const Sequent& s, const Step& st, std::size_t n) {
  const Entry& e = s.entries.at(st.principal);
  if (st.rule == "and") return {Choice{0, {}}, Choice{1, {}}};
  if (st.rule == "n-rule") {
    std::vector<Choice> out;
    for (Code i = 0; i < n; ++i) out.push_back(Choice{static_cast<std::int64_t>(i), {}});
    return out;
  }
  if (st.rule != "block") return {Choice{}};
  std::vector<std::vector<Choice>> per;
  for (auto& t : tuples(n, e.vars.size())) per.push_back(choices(instantiate(e.f, e.vars, t), n, kPremiseCap));
  std::vector<Choice> out{Choice{}};
  for (auto& L : per) {
    std::vector<Choice> next;
    for (auto& c : out)
      for (auto& x : L) {
        Choice d = c;
        d.kids.push_back(x);
        next.push_back(std::move(d));
      }
    if (next.size() > kPremiseCap) throw BudgetExhausted("block rule has too many premises");
    out = std::move(next);
  }
  return out;
}

inline Sequent premise(const Sequent& s, const Step& st, const Choice& l, std::size_t n) {
  Sequent r = s;
  const Entry& e = s.entries.at(st.principal);
  std::size_t added = 1;
  auto replace = [&](std::vector<Entry> es) {
    added = es.size();
    r.entries.erase(r.entries.begin() + st.principal);
    r.entries.insert(r.entries.begin() + st.principal, es.begin(), es.end());
  };
  if (st.rule == "or") replace({Entry{Entry::Kind::Closed, e.f->a, {}, {}}, Entry{Entry::Kind::Closed, e.f->b, {}, {}}});
  else if (st.rule == "ex") replace({Entry{Entry::Kind::Group, e.f->a, {e.f->name}, {}}});
  else if (st.rule == "and") replace({Entry{Entry::Kind::Closed, l.pick == 0 ? e.f->a : e.f->b, {}, {}}});
  else if (st.rule == "n-rule") replace({Entry{Entry::Kind::Closed, subst(e.f->a, e.f->name, l.pick), {}, {}}});
  else if (st.rule == "group-or")
    replace({Entry{Entry::Kind::Group, e.f->a, e.vars, {}}, Entry{Entry::Kind::Group, e.f->b, e.vars, {}}});
  else if (st.rule == "group-ex") {
    auto v = e.vars;
    v.push_back(e.f->name);
    replace({Entry{Entry::Kind::Group, e.f->a, v, {}}});
  } else if (st.rule == "block") {
    Entry lits{Entry::Kind::Lits, nullptr, {}, {}};
    auto ts = tuples(n, e.vars.size());
    if (l.kids.size() != ts.size()) throw StructureMismatch("block label has the wrong number of members");
    for (std::size_t j = 0; j < ts.size(); ++j) choice_literals(instantiate(e.f, e.vars, ts[j]), l.kids[j], ts[j], lits.lits);
    replace({lits});
  } else {
    throw Error("unknown rule " + st.rule);
  }
  r.cursor = r.entries.empty() ? 0 : (st.principal + added) % r.entries.size();
  return r;
}

// Label of P(f) at a node: sn at stage n, sm its image at stage f.m.
inline Choice transport_label(const Sequent& sn, const Sequent& sm, const Step& st, const Choice& l, const StageMap& f) {
  if (st.rule == "n-rule") return Choice{static_cast<std::int64_t>(f(l.pick)), {}};
  if (st.rule != "block") return l;
  const Entry& en = sn.entries.at(st.principal);
  const Entry& em = sm.entries.at(st.principal);
  std::size_t k = en.vars.size();
  Choice r;
  for (auto& t : tuples(f.m, k)) {
    Formula mm = instantiate(em.f, em.vars, t);
    if (f.in_range(t)) {
      std::vector<Code> pre;
      for (Code c : t) pre.push_back(*f.inverse(c));
      r.kids.push_back(transport(instantiate(en.f, en.vars, pre), mm, l.kids.at(tuple_index(pre, f.n())), f, t[0]));
    } else {
      r.kids.push_back(canonical(mm, f.m, t[0]));
    }
  }
  return r;
}

inline std::optional<Choice> restrict_label(const Sequent& sn, const Sequent& sm, const Step& st, const Choice& l,
                                            const StageMap& f) {
  std::optional<Choice> cand;
  if (st.rule == "n-rule") {
    auto i = f.inverse(l.pick);
    if (!i) return std::nullopt;
    cand = Choice{static_cast<std::int64_t>(*i), {}};
  } else if (st.rule != "block") {
    cand = l;
  } else {
    const Entry& em = sm.entries.at(st.principal);
    Choice r;
    for (auto& t : tuples(f.n(), em.vars.size())) {
      std::vector<Code> img;
      for (Code c : t) img.push_back(f(c));
      auto c = restrict_choice(instantiate(em.f, em.vars, img), l.kids.at(tuple_index(img, f.m)), f);
      if (!c) return std::nullopt;
      r.kids.push_back(*c);
    }
    cand = r;
  }
  if (transport_label(sn, sm, st, *cand, f) != l) return std::nullopt;
  return cand;
}

// ---------------------------------------------------------------------------
// Proof trees.

enum class NodeStatus { Inner, Axiom, Open, CutOff };
enum class TreeStatus { Closed, OpenBranch, DepthExhausted };

inline const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Inner: return "inner";
    case NodeStatus::Axiom: return "axiom";
    case NodeStatus::Open: return "open";
    case NodeStatus::CutOff: return "cut-off";
  }
  return "?";
}
inline const char* to_string(TreeStatus s) {
  return s == TreeStatus::Closed ? "closed" : s == TreeStatus::OpenBranch ? "open-branch" : "depth-exhausted";
}

struct ProofNode {
  Sequent seq;
  std::string rule;  // rule tag, or "axiom" / "open" / "cut-off" at leaves
  std::size_t principal = 0;
  std::optional<std::size_t> parent;
  Choice label;  // premise label below the parent's rule
  std::vector<std::size_t> kids;
  NodeStatus status = NodeStatus::Inner;
  std::string note;
  std::size_t depth = 0;
};

struct ProofTree {
  Formula formula;
  Signature sig;
  std::size_t stage = 0;
  std::vector<ProofNode> nodes;  // nodes[0] is the root; preorder
  TreeStatus status = TreeStatus::Closed;
  std::vector<std::size_t> branch;  // root-to-leaf path of the first open leaf

  // Child of v whose label is l.
  std::optional<std::size_t> child(std::size_t v, const Choice& l) const {
    const auto& ks = nodes.at(v).kids;
    auto it = std::lower_bound(ks.begin(), ks.end(), l,
                               [&](std::size_t k, const Choice& x) { return compare(nodes[k].label, x) == Cmp::LT; });
    if (it == ks.end() || nodes[*it].label != l) return std::nullopt;
    return *it;
  }
  std::vector<Choice> path(std::size_t v) const {
    std::vector<Choice> p;
    while (nodes[v].parent) {
      p.push_back(nodes[v].label);
      v = *nodes[v].parent;
    }
    std::reverse(p.begin(), p.end());
    return p;
  }
};

struct SearchLimits {
  std::size_t depth = 1000;
  std::size_t nodes = 2000000;
};

inline Sequent root_sequent(const Formula& phi) { return Sequent{{Entry{Entry::Kind::Closed, nnf(phi), {}, {}}}, 0}; }

inline ProofTree proof_search(const Formula& phi, std::size_t n, SearchLimits lim = {}, Signature sig = {}) {
  if (!closed(phi)) throw DomainMismatch("proof search needs a closed formula");
  for (Code c : constants(phi))
    if (c >= n) throw DomainMismatch("constant c" + std::to_string(c) + " is not available at stage " + std::to_string(n));
  collect_relations(phi, sig);
  ProofTree t;
  t.formula = phi;
  t.sig = sig;
  t.stage = n;
  std::optional<std::size_t> first_open;
  bool cut = false;
  std::function<void(std::size_t)> grow = [&](std::size_t v) {
    auto st = step_of(t.nodes[v].seq);
    if (!st) {
      if (auto ax = axiom(t.nodes[v].seq, n)) {
        t.nodes[v].status = NodeStatus::Axiom;
        t.nodes[v].rule = "axiom";
        t.nodes[v].note = *ax;
      } else {
        t.nodes[v].status = NodeStatus::Open;
        t.nodes[v].rule = "open";
        if (!first_open) first_open = v;
      }
      return;
    }
    if (t.nodes[v].depth >= lim.depth) {
      t.nodes[v].status = NodeStatus::CutOff;
      t.nodes[v].rule = "cut-off";
      cut = true;
      return;
    }
    t.nodes[v].rule = st->rule;
    t.nodes[v].principal = st->principal;
    for (const Choice& l : premise_labels(t.nodes[v].seq, *st, n)) {
      if (t.nodes.size() >= lim.nodes) {
        t.nodes[v].status = NodeStatus::CutOff;
        t.nodes[v].rule = "cut-off";
        cut = true;
        return;
      }
      ProofNode c;
      c.seq = premise(t.nodes[v].seq, *st, l, n);
      c.parent = v;
      c.label = l;
      c.depth = t.nodes[v].depth + 1;
      std::size_t id = t.nodes.size();
      t.nodes.push_back(std::move(c));
      t.nodes[v].kids.push_back(id);
      grow(id);
    }
  };
  ProofNode root;
  root.seq = root_sequent(phi);
  t.nodes.push_back(std::move(root));
  grow(0);
  if (first_open) {
    t.status = TreeStatus::OpenBranch;
    for (std::optional<std::size_t> v = first_open; v; v = t.nodes[*v].parent) t.branch.push_back(*v);
    std::reverse(t.branch.begin(), t.branch.end());
  } else {
    t.status = cut ? TreeStatus::DepthExhausted : TreeStatus::Closed;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Transport along f: n -> m.

struct ProofEmbedding {
  StageMap f;
  std::vector<std::size_t> map;  // node of P(n) -> node of P(m)
};

inline Sequent relabel(const Sequent& s, const StageMap& f) {
  Sequent r = s;
  auto fn = f.fn();
  for (auto& e : r.entries) {
    if (e.f) e.f = relabel(e.f, fn);
    for (auto& m : e.lits) {
      m.lit = relabel(m.lit, fn);
      for (auto& c : m.origin) c = f(c);
    }
  }
  return r;
}

// Image sequent equals the relabeled one, up to literal members whose origin
// leaves the range of f.
inline bool relabel_matches(const Sequent& sn, const Sequent& sm, const StageMap& f) {
  Sequent r = relabel(sn, f);
  if (r.cursor != sm.cursor || r.entries.size() != sm.entries.size()) return false;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const Entry &a = r.entries[i], &b = sm.entries[i];
    if (a.kind != b.kind || a.vars != b.vars) return false;
    if (a.kind != Entry::Kind::Lits) {
      if (!equal(a.f, b.f)) return false;
      continue;
    }
    std::vector<const LitMember*> kept;
    for (auto& m : b.lits)
      if (f.in_range(m.origin)) kept.push_back(&m);
    if (kept.size() != a.lits.size()) return false;
    for (std::size_t j = 0; j < kept.size(); ++j)
      if (kept[j]->origin != a.lits[j].origin || !equal(kept[j]->lit, a.lits[j].lit)) return false;
  }
  return true;
}

inline ProofEmbedding proof_functor(const StageMap& f, const ProofTree& pn, const ProofTree& pm) {
  if (f.n() != pn.stage || f.m != pm.stage) throw StructureMismatch("stage map does not match the trees");
  for (std::size_t i = 1; i < f.f.size(); ++i)
    if (f.f[i] <= f.f[i - 1]) throw DomainMismatch("f must be strictly increasing");
  if (f.m && !f.f.empty() && f.f.back() >= f.m) throw DomainMismatch("f leaves its target");
  if (!equal(relabel(pn.formula, f.fn()), pm.formula))
    throw StructureMismatch("target tree is not the search for the relabeled formula");
  ProofEmbedding e{f, std::vector<std::size_t>(pn.nodes.size())};
  e.map[0] = 0;
  for (std::size_t v = 0; v < pn.nodes.size(); ++v) {
    const auto& a = pn.nodes[v];
    if (a.kids.empty()) continue;
    std::size_t w = e.map[v];
    const auto& b = pm.nodes[w];
    if (b.rule != a.rule || b.principal != a.principal)
      throw StructureMismatch("rule " + a.rule + " at node " + std::to_string(v) + " meets " + b.rule);
    Step st{a.rule, a.principal};
    for (std::size_t k : a.kids) {
      Choice l = transport_label(a.seq, b.seq, st, pn.nodes[k].label, f);
      auto c = pm.child(w, l);
      if (!c) throw StructureMismatch("no premise " + to_string(l) + " below node " + std::to_string(w));
      e.map[k] = *c;
    }
  }
  return e;
}

struct EmbeddingCheck {
  bool predecessor = true, conclusion = true, relabel = true;
  std::string failure;
  bool ok() const { return predecessor && conclusion && relabel; }
};

inline EmbeddingCheck check_embedding(const ProofEmbedding& e, const ProofTree& pn, const ProofTree& pm) {
  EmbeddingCheck r;
  r.conclusion = e.map.at(0) == 0;
  if (!r.conclusion) r.failure = "conclusion not mapped to conclusion";
  for (std::size_t v = 0; v < pn.nodes.size(); ++v) {
    if (auto p = pn.nodes[v].parent) {
      if (pm.nodes[e.map[v]].parent != std::optional<std::size_t>(e.map[*p])) {
        r.predecessor = false;
        if (r.failure.empty()) r.failure = "predecessor not preserved at node " + std::to_string(v);
      }
    }
    if (!relabel_matches(pn.nodes[v].seq, pm.nodes[e.map[v]].seq, e.f)) {
      r.relabel = false;
      if (r.failure.empty()) r.failure = "sequent at node " + std::to_string(v) + " is not a relabeling";
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Checking a tree node by node.

struct AlphaCheck {
  bool ok = true;
  std::string failure;
};

inline AlphaCheck check_alpha_proof(const ProofTree& t) {
  auto fail = [](std::string m) { return AlphaCheck{false, std::move(m)}; };
  std::size_t n = t.stage;
  if (t.nodes.empty()) return fail("empty tree");
  if (t.nodes[0].seq.entries.size() != 1 || !equal(t.nodes[0].seq.entries[0].f, nnf(t.formula)))
    return fail("root sequent is not the formula");
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const auto& nd = t.nodes[v];
    std::string at = " at node " + std::to_string(v);
    for (const auto& e : nd.seq.entries) {
      if (e.kind == Entry::Kind::Lits) {
        for (auto& m : e.lits)
          if (!is_literal(m.lit) || !closed(m.lit)) return fail("non-closed literal" + at);
      } else {
        auto fv = free_vars(e.f);
        for (auto& x : fv)
          if (std::find(e.vars.begin(), e.vars.end(), x) == e.vars.end()) return fail("free variable " + x + at);
      }
      for (Code c : e.f ? constants(e.f) : std::set<Code>{})
        if (c >= n) return fail("constant c" + std::to_string(c) + " outside the stage" + at);
    }
    auto st = step_of(nd.seq);
    if (nd.status == NodeStatus::Axiom) {
      if (!nd.kids.empty()) return fail("axiom with premises" + at);
      if (st) return fail("axiom on an unsaturated sequent" + at);
      if (!axiom(nd.seq, n)) return fail("forged axiom " + nd.note + at);
      continue;
    }
    if (nd.status == NodeStatus::Open) {
      if (st) return fail("open leaf not saturated" + at);
      if (axiom(nd.seq, n)) return fail("open leaf is an axiom" + at);
      continue;
    }
    if (nd.status == NodeStatus::CutOff) continue;
    if (!st) return fail("rule on a saturated sequent" + at);
    if (st->rule != nd.rule || st->principal != nd.principal)
      return fail("rule " + nd.rule + " where " + st->rule + " is due" + at);
    std::vector<Choice> want = premise_labels(nd.seq, *st, n);
    std::size_t j = 0;
    for (const Choice& l : want) {
      if (j >= nd.kids.size() || t.nodes[nd.kids[j]].label != l) {
        std::string name = st->rule == "n-rule" ? "premise \xce\xb9=" + std::to_string(l.pick) : "premise " + to_string(l);
        return fail(nd.rule + at + " is missing " + name);
      }
      const auto& kid = t.nodes[nd.kids[j]];
      Sequent expect = premise(nd.seq, *st, l, n);
      if (to_string(expect) != to_string(kid.seq) || expect.cursor != kid.seq.cursor)
        return fail("premise " + to_string(l) + at + " has the wrong sequent");
      if (kid.parent != std::optional<std::size_t>(v)) return fail("broken parent link" + at);
      ++j;
    }
    if (j != nd.kids.size()) return fail("extra premises" + at);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Countermodels from saturated open leaves.

inline BetaStructure extract_countermodel(const ProofTree& t, std::optional<std::size_t> leaf = std::nullopt) {
  std::size_t v = leaf ? *leaf : (t.branch.empty() ? t.nodes.size() : t.branch.back());
  if (v >= t.nodes.size()) throw Error("no open branch");
  const auto& nd = t.nodes[v];
  if (step_of(nd.seq)) throw Error("branch-not-saturated");
  if (nd.status != NodeStatus::Open) throw Error("leaf is not open");
  BetaStructure m;
  m.n = t.stage;
  for (auto& [r, k] : t.sig) m.rel[r];
  for (const auto& l : literal_instances(nd.seq, t.stage)) {
    if (l->op != Op::NRel) continue;
    std::vector<Code> tu;
    for (auto& a : l->args) tu.push_back(a.c);
    m.rel[l->name].insert(tu);
  }
  return m;
}

// ---------------------------------------------------------------------------
// The proof tree as a pre-dilator: the value at n is the KB order of P(n)
// (label paths, labels compared as Choices), and P(f) acts on paths. Terms
// of arity k are the nodes of P(k) outside the image of every proper face.

// Lazily transports a label path of P(n) along f.
inline std::vector<Choice> transport_path(const Formula& phi, const std::vector<Choice>& path, const StageMap& f) {
  Sequent sn = root_sequent(phi), sm = root_sequent(relabel(phi, f.fn()));
  std::vector<Choice> out;
  for (const Choice& l : path) {
    auto st = step_of(sn);
    auto sm_st = step_of(sm);
    if (!st || !sm_st || st->rule != sm_st->rule || st->principal != sm_st->principal)
      throw StructureMismatch("search trees diverge under relabeling");
    Choice lm = transport_label(sn, sm, *st, l, f);
    sm = premise(sm, *sm_st, lm, f.m);
    sn = premise(sn, *st, l, f.n());
    out.push_back(std::move(lm));
  }
  return out;
}

inline std::optional<std::vector<Choice>> pullback_path(const Formula& phi, const std::vector<Choice>& path,
                                                        const StageMap& f) {
  Sequent sn = root_sequent(phi), sm = root_sequent(relabel(phi, f.fn()));
  std::vector<Choice> out;
  for (const Choice& l : path) {
    auto st = step_of(sn);
    if (!st) return std::nullopt;
    auto c = restrict_label(sn, sm, *st, l, f);
    if (!c) return std::nullopt;
    sm = premise(sm, *st, l, f.m);
    sn = premise(sn, *st, *c, f.n());
    out.push_back(std::move(*c));
  }
  return out;
}

inline Cmp kb_compare_paths(const std::vector<Choice>& s, const std::vector<Choice>& t) {
  std::size_t n = std::min(s.size(), t.size());
  for (std::size_t i = 0; i < n; ++i) {
    Cmp c = compare(s[i], t[i]);
    if (c != Cmp::EQ) return c;
  }
  return cmp3(t.size(), s.size());
}

class ProofSystem : public SystemImpl {
 public:
  explicit ProofSystem(Formula phi, SearchLimits lim = {}) : phi_(std::move(phi)), lim_(lim) {
    if (!closed(phi_) || !constants(phi_).empty())
      throw DomainMismatch("proof_predilator needs a closed, constant-free formula");
  }

  std::optional<std::size_t> num_terms(std::size_t k) const override { return level(k).essential.size(); }
  Term term(std::size_t k, std::size_t i) const override {
    return Term{{static_cast<std::int64_t>(k), static_cast<std::int64_t>(level(k).essential.at(i))}, {}, {}};
  }
  std::size_t term_index(std::size_t k, const Term& t) const override {
    const auto& e = level(k).essential;
    auto it = std::lower_bound(e.begin(), e.end(), static_cast<std::size_t>(t.v.at(1)));
    if (it == e.end() || *it != static_cast<std::size_t>(t.v.at(1))) throw DomainMismatch("not a proof term");
    return it - e.begin();
  }
  std::size_t arity(const Term& t) const override { return t.v.at(0); }
  std::optional<std::size_t> max_arity() const override { return std::nullopt; }
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    std::size_t w = p.width();
    StageMap fl{{p.left.begin(), p.left.end()}, w}, fr{{p.right.begin(), p.right.end()}, w};
    return kb_compare_paths(transport_path(phi_, node_path(s), fl), transport_path(phi_, node_path(t), fr));
  }
  std::string expr() const override { return "proof(" + to_string(phi_) + ")"; }
  std::string term_string(const Term& t) const override {
    std::string s = "P" + std::to_string(t.v.at(0)) + "[";
    auto p = node_path(t);
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "." : "") + to_string(p[i]);
    return s + "]";
  }

  const ProofTree& tree(std::size_t k) const { return level(k).tree; }
  const Formula& formula() const { return phi_; }
  std::vector<Choice> node_path(const Term& t) const { return level(t.v.at(0)).tree.path(t.v.at(1)); }

  // Node of P(n) denoted by (term, support).
  std::size_t node_of(const Denotation& d, std::size_t n) const {
    StageMap f{d.args, n};
    auto p = transport_path(phi_, node_path(d.term), f);
    const ProofTree& t = tree(n);
    std::size_t v = 0;
    for (const auto& l : p) {
      auto c = t.child(v, l);
      if (!c) throw StructureMismatch("transported path leaves P(n)");
      v = *c;
    }
    return v;
  }

 private:
  struct Level {
    ProofTree tree;
    std::vector<std::size_t> essential;
  };
  const Level& level(std::size_t k) const {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = levels_.find(k);
    if (it != levels_.end()) return *it->second;
    auto lv = std::make_unique<Level>();
    lv->tree = proof_search(phi_, k, lim_);
    for (std::size_t v = 0; v < lv->tree.nodes.size(); ++v) {
      auto path = lv->tree.path(v);
      bool ess = true;
      for (std::size_t j = 0; j < k && ess; ++j) {
        StageMap face{{}, k};
        for (Code c = 0; c < k; ++c)
          if (c != j) face.f.push_back(c);
        if (pullback_path(phi_, path, face)) ess = false;
      }
      if (ess) lv->essential.push_back(v);
    }
    return *levels_.emplace(k, std::move(lv)).first->second;
  }

  Formula phi_;
  SearchLimits lim_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::unique_ptr<Level>> levels_;
};

inline DenotationSystem proof_predilator(const Formula& phi, SearchLimits lim = {}) {
  return DenotationSystem(std::make_shared<ProofSystem>(phi, lim));
}

}  // namespace ptyx::beta
