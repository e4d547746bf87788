#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "core.hpp"
#include "dilator.hpp"
#include "order.hpp"

namespace ptyx {

struct StreamEntry {
  DenotationSystem system;
  std::optional<std::string> cert;  // decoded bytes
};

struct TheoryStream {
  std::vector<StreamEntry> positive, negative;
  std::string source;  // file the stream was read from, if any

  bool has_certificates(std::size_t k) const {
    for (std::size_t i = 0; i < k && i < positive.size(); ++i)
      if (positive[i].cert) return true;
    return false;
  }
};

// Rejects repeated (expression, certificate) pairs within a list.
inline void check_duplicate_free(const std::vector<StreamEntry>& list, const std::string& which) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : list) {
    auto key = std::make_pair(e.system.expr(), e.cert.value_or(std::string("\x01nocert")));
    if (!seen.insert(key).second) throw Error("duplicate " + which + " stream entry " + e.system.expr());
  }
}

inline DenotationSystem pi12_prefix(const TheoryStream& s, std::size_t k) {
  if (k > s.positive.size())
    throw StreamExhausted("positive list has " + std::to_string(s.positive.size()) + " entries, need " +
                          std::to_string(k));
  if (s.has_certificates(k)) {
    std::string label = s.source.empty() || k != s.positive.size() ? "" : "rcopy(@" + s.source + ")";
    std::vector<std::pair<DenotationSystem, std::string>> pairs;
    for (std::size_t i = 0; i < k; ++i) pairs.push_back({s.positive[i].system, s.positive[i].cert.value_or("")});
    return recursive_copy(pairs, label);
  }
  std::string label = s.source.empty() ? "" : "osum(@" + s.source + "," + std::to_string(k) + ")";
  std::vector<DenotationSystem> ds;
  for (std::size_t i = 0; i < k; ++i) ds.push_back(s.positive[i].system);
  return omega_sum(ds, k, label);
}

// Sorted, duplicate-free grid.
inline std::vector<Cnf> normalize_grid(std::vector<Cnf> grid) {
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct ProbeStep {
  Cnf alpha;
  std::size_t index = 0;
  Search status = Search::None;
  std::string method;
  std::uint64_t used = 0;
};

struct Witness {
  std::size_t index = 0;
  Cnf alpha;
  std::vector<Denotation> chain;
  std::string method;
};

struct ProbeReport {
  std::optional<Witness> witness;
  std::vector<ProbeStep> trail;
  std::uint64_t budget = 0;
  std::size_t depth = 0;
  bool undecided = false;  // some search ran out of budget

  std::string verdict() const { return witness ? "witness-found" : "no-witness-within-budget"; }
};

struct ProbeOptions {
  std::uint64_t budget = 200000;  // per (alpha, entry)
  std::size_t depth = 8;
};

// Replays a chain through compare.
inline bool verify_chain(const DenotationSystem& d, const Cnf& alpha, const std::vector<Denotation>& chain) {
  LinearOrder e = d->evaluate(cnf_order(alpha));
  const auto& ev = as_evaluated(e);
  for (const auto& x : chain)
    if (!ev.well_formed(x)) return false;
  return ev.is_descending(chain);
}

// Least grid point (then least index) at which some entry yields a witness.
inline ProbeReport probe_list(const std::vector<StreamEntry>& list, const std::vector<Cnf>& grid, ProbeOptions opt) {
  ProbeReport rep;
  rep.budget = opt.budget;
  rep.depth = opt.depth;
  for (const Cnf& alpha : normalize_grid(grid)) {
    LinearOrder x = cnf_order(alpha);
    for (std::size_t i = 0; i < list.size(); ++i) {
      Budget b(opt.budget);
      DenChain c;
      try {
        c = list[i].system->probe(x, opt.depth, b);
      } catch (const BudgetExhausted& ex) {
        c = {Search::Exhausted, {}, ex.what()};
      }
      rep.trail.push_back({alpha, i, c.status, c.method, b.used});
      if (c.status == Search::Exhausted) rep.undecided = true;
      if (c.status == Search::Found) {
        if (!verify_chain(list[i].system, alpha, c.chain)) throw Error("probe produced a chain that fails replay");
        rep.witness = Witness{i, alpha, c.chain, c.method};
        return rep;
      }
    }
  }
  return rep;
}

inline ProbeReport o12_probe(const TheoryStream& s, const std::vector<Cnf>& grid, ProbeOptions opt = {}) {
  return probe_list(s.positive, grid, opt);
}

struct S12Report {
  std::vector<std::optional<Cnf>> minima;  // per negative entry
  std::optional<Cnf> sup;                  // none for an empty set of minima
  std::vector<ProbeReport> entries;
};

inline S12Report s12_probe(const TheoryStream& s, const std::vector<Cnf>& grid, ProbeOptions opt = {}) {
  S12Report r;
  for (const auto& e : s.negative) {
    ProbeReport p = probe_list({e}, grid, opt);
    r.minima.push_back(p.witness ? std::optional<Cnf>(p.witness->alpha) : std::nullopt);
    if (p.witness && (!r.sup || *r.sup < p.witness->alpha)) r.sup = p.witness->alpha;
    r.entries.push_back(std::move(p));
  }
  return r;
}

enum class Category { A, B, CorD };

inline const char* to_string(Category c) {
  return c == Category::A ? "A" : c == Category::B ? "B" : "C-or-D-indistinguishable";
}

struct CategoryVerdict {
  Category category = Category::CorD;
  ProbeReport evidence;
};

// The grid always includes 0.
inline CategoryVerdict classify(const TheoryStream& s, std::vector<Cnf> grid, ProbeOptions opt = {}) {
  grid.push_back(Cnf{});
  CategoryVerdict v;
  v.evidence = o12_probe(s, grid, opt);
  if (v.evidence.witness) v.category = v.evidence.witness->alpha.is_zero() ? Category::A : Category::B;
  return v;
}

struct RelationReport {
  bool ok = true;
  std::string failure;
  std::size_t pairs_checked = 0;
  std::vector<std::pair<Code, Code>> iso;  // prefix element -> element of the block sum
};

// evaluate(pi12_prefix(s,k), x) against the sum of the evaluations, block by
// block; pairs are checked on the first `cap` elements.
inline RelationReport check_ordinal_relation(const TheoryStream& s, std::size_t k, const LinearOrder& x,
                                             std::size_t cap = 40) {
  RelationReport r;
  DenotationSystem p = pi12_prefix(s, k);
  LinearOrder left = p->evaluate(x);
  const auto& ev = as_evaluated(left);
  std::vector<LinearOrder> parts;
  for (std::size_t i = 0; i < k; ++i) parts.push_back(s.positive[i].system->evaluate(x));
  auto sum = std::make_shared<SumOrder>(parts);
  LinearOrder right(sum);
  if (left.size() != right.size()) {
    r.ok = false;
    r.failure = "sizes differ";
    return r;
  }
  std::size_t n = left.size() ? std::min(*left.size(), cap) : cap;
  std::set<Code> image;
  for (std::size_t i = 0; i < n; ++i) {
    Denotation d = ev.denotation(left.element(i));
    std::size_t part = d.term.v.at(0);
    Code inner = as_evaluated(parts.at(part)).code_of(SumSystem::strip(d));
    Code y = sum->inject(part, inner);
    r.iso.push_back({left.element(i), y});
    if (!image.insert(y).second) {
      r.ok = false;
      r.failure = "map is not injective";
      return r;
    }
  }
  for (std::size_t i = 0; i < r.iso.size(); ++i)
    for (std::size_t j = i + 1; j < r.iso.size(); ++j) {
      ++r.pairs_checked;
      if (left.compare(r.iso[i].first, r.iso[j].first) != right.compare(r.iso[i].second, r.iso[j].second)) {
        r.ok = false;
        r.failure = "order differs on pair " + std::to_string(i) + "," + std::to_string(j);
        return r;
      }
    }
  if (left.finite() && image.size() != *right.size()) {
    r.ok = false;
    r.failure = "map is not onto";
  }
  return r;
}

// w^x iterated h times; h = 0 is the identity.
inline DenotationSystem omega_tower(std::size_t h) {
  DenotationSystem t = id_system();
  for (std::size_t i = 0; i < h; ++i) t = i == 0 ? exp_omega() : compose(exp_omega(), t);
  return t;
}

inline Cnf tower_value(std::size_t h, Cnf a) {
  for (std::size_t i = 0; i < h; ++i) a = cnf_omega_pow(a);
  return a;
}

struct EpsilonRow {
  std::size_t height = 0;
  Cnf point;
  Search composite = Search::None;  // witness search in (D o w^h)(point)
  Search direct = Search::None;     // witness search in D(tower_h(point))
  std::string method;
};

struct EpsilonReport {
  std::vector<EpsilonRow> rows;
  bool consistent = true;  // composite and direct searches agree where both decided
};

// Witnesses of D o w^h at a point correspond to witnesses of D at the
// tower value; both are searched and compared.
inline EpsilonReport epsilon_closure_check(const DenotationSystem& d, const Cnf& alpha, ProbeOptions opt = {},
                                           std::size_t max_height = 3) {
  EpsilonReport rep;
  std::vector<Cnf> points = normalize_grid({alpha, Cnf::omega(), cnf_omega_pow(Cnf::omega()),
                                            cnf_omega_pow(cnf_omega_pow(Cnf::omega()))});
  for (std::size_t h = 0; h <= max_height; ++h) {
    DenotationSystem c = h == 0 ? d : compose(d, omega_tower(h));
    for (const Cnf& p : points) {
      EpsilonRow row{h, p, Search::None, Search::None, ""};
      {
        Budget b(opt.budget);
        DenChain r = c->probe(cnf_order(p), opt.depth, b);
        if (r.status == Search::Found && !verify_chain(c, p, r.chain)) throw Error("composite witness fails replay");
        row.composite = r.status;
        row.method = r.method;
      }
      {
        Budget b(opt.budget);
        row.direct = d->probe(cnf_order(tower_value(h, p)), opt.depth, b).status;
      }
      if (row.composite != Search::Exhausted && row.direct != Search::Exhausted && row.composite != row.direct)
        rep.consistent = false;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace ptyx
