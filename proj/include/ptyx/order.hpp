#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "core.hpp"

namespace ptyx {

struct ChainResult {
  Search status = Search::None;
  std::vector<Code> chain;  // strictly descending when status == Found
};

class LinearOrder;

// Backend of a countable order. Codes are enumerated in strictly increasing
// numeric order; compare is only called on contained codes.
class OrderImpl {
 public:
  virtual ~OrderImpl() = default;
  virtual std::optional<std::size_t> size() const = 0;
  virtual Code element(std::size_t i) const = 0;
  virtual bool contains(Code c) const = 0;
  virtual Cmp compare_known(Code x, Code y) const = 0;
  virtual std::string expr() const = 0;

  virtual std::size_t index_of(Code c) const;
  // Order type, when the order is a wellorder of known CNF type.
  virtual std::optional<Cnf> type() const { return std::nullopt; }
  virtual std::optional<Cnf> rank(Code) const { return std::nullopt; }
  virtual std::optional<Code> unrank(const Cnf&) const { return std::nullopt; }
  // A known infinite descending sequence, element i.
  virtual bool has_descent() const { return false; }
  virtual Code descent(std::size_t) const { throw Error("order has no known descent"); }
  virtual ChainResult find_chain(std::size_t depth, Budget& budget) const;
};

class LinearOrder {
 public:
  LinearOrder() = default;
  explicit LinearOrder(std::shared_ptr<const OrderImpl> p) : p_(std::move(p)) {}

  std::optional<std::size_t> size() const { return p_->size(); }
  bool finite() const { return p_->size().has_value(); }
  Code element(std::size_t i) const {
    if (auto n = p_->size(); n && i >= *n) throw Error("element index out of range");
    return p_->element(i);
  }
  bool contains(Code c) const { return p_->contains(c); }
  std::size_t index_of(Code c) const {
    check(c);
    return p_->index_of(c);
  }
  Cmp compare(Code x, Code y) const {
    check(x);
    check(y);
    if (x == y) return Cmp::EQ;
    return p_->compare_known(x, y);
  }
  bool less(Code x, Code y) const { return compare(x, y) == Cmp::LT; }
  std::string expr() const { return p_->expr(); }
  std::optional<Cnf> type() const { return p_->type(); }
  std::optional<Cnf> rank(Code c) const {
    check(c);
    return p_->rank(c);
  }
  std::optional<Code> unrank(const Cnf& a) const { return p_->unrank(a); }
  bool has_descent() const { return p_->has_descent(); }
  Code descent(std::size_t i) const { return p_->descent(i); }
  ChainResult find_chain(std::size_t depth, Budget& b) const { return p_->find_chain(depth, b); }
  const OrderImpl& impl() const { return *p_; }
  const std::shared_ptr<const OrderImpl>& ptr() const { return p_; }

  // First n enumerated codes (fewer if the order is smaller).
  std::vector<Code> prefix(std::size_t n) const {
    std::vector<Code> out;
    std::size_t m = size() ? std::min(n, *size()) : n;
    for (std::size_t i = 0; i < m; ++i) out.push_back(p_->element(i));
    return out;
  }
  // Order-ascending listing of a finite order.
  std::vector<Code> ascending() const {
    if (!finite()) throw Error("ascending listing needs a finite order");
    std::vector<Code> v = prefix(*size());
    std::sort(v.begin(), v.end(), [&](Code a, Code b) { return p_->compare_known(a, b) == Cmp::LT; });
    return v;
  }

 private:
  void check(Code c) const {
    if (!p_->contains(c)) throw UnknownElement(c);
  }
  std::shared_ptr<const OrderImpl> p_;
};

inline std::size_t OrderImpl::index_of(Code c) const {
  std::size_t lo = 0, hi = 1;
  auto n = size();
  auto at = [&](std::size_t i) { return element(i); };
  if (n) {
    hi = *n;
  } else {
    while (at(hi) < c) hi *= 2;
    ++hi;
  }
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (at(mid) < c) lo = mid + 1;
    else hi = mid;
  }
  if ((n && lo >= *n) || at(lo) != c) throw UnknownElement(c);
  return lo;
}

// Longest chain that descends along the enumeration: e_{i1} > e_{i2} > ...
// with i1 < i2 < ... among the first `budget` elements.
inline ChainResult OrderImpl::find_chain(std::size_t depth, Budget& budget) const {
  ChainResult r;
  auto n = size();
  std::vector<Code> elems;
  std::vector<std::size_t> best, prev;
  for (std::size_t j = 0;; ++j) {
    if (n && j >= *n) {
      r.status = Search::None;
      return r;
    }
    if (!budget.spend(j + 1)) {
      r.status = Search::Exhausted;
      return r;
    }
    elems.push_back(element(j));
    best.push_back(1);
    prev.push_back(j);
    for (std::size_t i = 0; i < j; ++i) {
      if (best[i] + 1 > best[j] && compare_known(elems[i], elems[j]) == Cmp::GT) {
        best[j] = best[i] + 1;
        prev[j] = i;
      }
    }
    if (best[j] >= depth) {
      std::vector<Code> c;
      std::size_t k = j;
      while (c.size() < depth) {
        c.push_back(elems[k]);
        k = prev[k];
      }
      std::reverse(c.begin(), c.end());
      r.status = Search::Found;
      r.chain = std::move(c);
      return r;
    }
  }
}

inline bool is_descending(const LinearOrder& o, const std::vector<Code>& chain) {
  for (std::size_t i = 1; i < chain.size(); ++i)
    if (o.compare(chain[i - 1], chain[i]) != Cmp::GT) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Explicit finite order; the list is in ascending rank.

class FinOrder : public OrderImpl {
 public:
  explicit FinOrder(std::vector<Code> ranked) : ranked_(std::move(ranked)) {
    sorted_ = ranked_;
    std::sort(sorted_.begin(), sorted_.end());
    if (std::adjacent_find(sorted_.begin(), sorted_.end()) != sorted_.end())
      throw Error("fin order lists a code twice");
    for (std::size_t i = 0; i < ranked_.size(); ++i) pos_[ranked_[i]] = i;
  }
  std::optional<std::size_t> size() const override { return ranked_.size(); }
  Code element(std::size_t i) const override { return sorted_.at(i); }
  bool contains(Code c) const override { return pos_.count(c) > 0; }
  std::size_t index_of(Code c) const override {
    return std::lower_bound(sorted_.begin(), sorted_.end(), c) - sorted_.begin();
  }
  Cmp compare_known(Code x, Code y) const override { return cmp3(pos_.at(x), pos_.at(y)); }
  std::string expr() const override {
    std::string s = "fin:[";
    for (std::size_t i = 0; i < ranked_.size(); ++i) s += (i ? "," : "") + std::to_string(ranked_[i]);
    return s + "]";
  }
  std::optional<Cnf> type() const override { return Cnf::nat(ranked_.size()); }
  std::optional<Cnf> rank(Code c) const override { return Cnf::nat(pos_.at(c)); }
  std::optional<Code> unrank(const Cnf& a) const override {
    if (!a.is_finite() || a.to_nat() >= ranked_.size()) return std::nullopt;
    return ranked_[a.to_nat()];
  }
  const std::vector<Code>& ranked() const { return ranked_; }

 private:
  std::vector<Code> ranked_, sorted_;
  std::map<Code, std::size_t> pos_;
};

// The ordinal alpha as an order: notations below alpha, enumerated by weight
// and then ascending.
class CnfOrder : public OrderImpl {
 public:
  explicit CnfOrder(Cnf alpha) : alpha_(std::move(alpha)) {}
  std::optional<std::size_t> size() const override {
    if (alpha_.is_finite()) return alpha_.to_nat();
    return std::nullopt;
  }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code c) const override {
    auto n = size();
    return !n || c < *n;
  }
  std::size_t index_of(Code c) const override { return c; }
  Cmp compare_known(Code x, Code y) const override { return compare(notation(x), notation(y)); }
  std::string expr() const override { return "cnf:" + to_string(alpha_); }
  std::optional<Cnf> type() const override { return alpha_; }
  std::optional<Cnf> rank(Code c) const override { return notation(c); }
  std::optional<Code> unrank(const Cnf& b) const override {
    if (!(b < alpha_)) return std::nullopt;
    std::uint64_t w = weight(b);
    Code base = 0;
    for (std::uint64_t u = 0; u < w; ++u) base += CnfCatalog::below(alpha_, u).size();
    const auto& bucket = CnfCatalog::below(alpha_, w);
    return base + (std::lower_bound(bucket.begin(), bucket.end(), b) - bucket.begin());
  }
  const Cnf& alpha() const { return alpha_; }

  Cnf notation(Code c) const {
    std::lock_guard<std::mutex> lk(mu_);
    while (cache_.size() <= c) {
      const auto& bucket = CnfCatalog::below(alpha_, next_weight_++);
      cache_.insert(cache_.end(), bucket.begin(), bucket.end());
    }
    return cache_[c];
  }

 private:
  Cnf alpha_;
  mutable std::mutex mu_;
  mutable std::vector<Cnf> cache_;
  mutable std::uint64_t next_weight_ = 0;
};

// omega*: code i is the i-th element of a descending sequence.
class OmegaStar : public OrderImpl {
 public:
  std::optional<std::size_t> size() const override { return std::nullopt; }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code) const override { return true; }
  std::size_t index_of(Code c) const override { return c; }
  Cmp compare_known(Code x, Code y) const override { return cmp3(y, x); }
  std::string expr() const override { return "ws"; }
  bool has_descent() const override { return true; }
  Code descent(std::size_t i) const override { return i; }
  ChainResult find_chain(std::size_t depth, Budget& b) const override {
    ChainResult r;
    if (!b.spend(depth)) {
      r.status = Search::Exhausted;
      return r;
    }
    for (std::size_t i = 0; i < depth; ++i) r.chain.push_back(i);
    r.status = Search::Found;
    return r;
  }
};

// Finite or infinite ordered sum; codes interleave the parts round-robin.
class SumOrder : public OrderImpl {
 public:
  explicit SumOrder(std::vector<LinearOrder> parts) : parts_(std::move(parts)) {}
  std::optional<std::size_t> size() const override {
    std::size_t n = 0;
    for (const auto& p : parts_) {
      if (!p.finite()) return std::nullopt;
      n += *p.size();
    }
    return n;
  }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code c) const override {
    auto n = size();
    return !n || c < *n;
  }
  std::size_t index_of(Code c) const override { return c; }
  Cmp compare_known(Code x, Code y) const override {
    auto [px, ix] = locate(x);
    auto [py, iy] = locate(y);
    if (px != py) return cmp3(px, py);
    const LinearOrder& o = parts_[px];
    return o.compare(o.element(ix), o.element(iy));
  }
  std::string expr() const override {
    if (parts_.empty()) return "fin:[]";
    std::string s = parts_.back().expr();
    for (std::size_t i = parts_.size() - 1; i-- > 0;) s = "sum(" + parts_[i].expr() + "," + s + ")";
    return s;
  }
  std::optional<Cnf> type() const override {
    Cnf t;
    for (const auto& p : parts_) {
      auto pt = p.type();
      if (!pt) return std::nullopt;
      t = cnf_add(t, *pt);
    }
    return t;
  }
  std::optional<Cnf> rank(Code c) const override {
    auto [pi, ix] = locate(c);
    Cnf base;
    for (std::size_t j = 0; j < pi; ++j) {
      auto pt = parts_[j].type();
      if (!pt) return std::nullopt;
      base = cnf_add(base, *pt);
    }
    auto r = parts_[pi].rank(parts_[pi].element(ix));
    if (!r) return std::nullopt;
    return cnf_add(base, *r);
  }
  std::optional<Code> unrank(const Cnf& b) const override {
    Cnf base;
    for (std::size_t j = 0; j < parts_.size(); ++j) {
      auto pt = parts_[j].type();
      if (!pt) return std::nullopt;
      Cnf top = cnf_add(base, *pt);
      if (b < top) {
        auto c = parts_[j].unrank(cnf_left_sub(base, b));
        if (!c) return std::nullopt;
        return inject(j, *c);
      }
      base = top;
    }
    return std::nullopt;
  }
  bool has_descent() const override {
    for (const auto& p : parts_)
      if (p.has_descent()) return true;
    return false;
  }
  Code descent(std::size_t i) const override {
    for (std::size_t j = 0; j < parts_.size(); ++j)
      if (parts_[j].has_descent()) return inject(j, parts_[j].descent(i));
    throw Error("order has no known descent");
  }

  // Code of element c of part j.
  Code inject(std::size_t j, Code c) const {
    std::size_t idx = parts_[j].index_of(c);
    // position of (j, idx) in the round-robin interleave
    Code code = 0;
    for (std::size_t r = 0; r < idx; ++r) code += active_in_round(r);
    for (std::size_t k = 0; k < j; ++k)
      if (alive(k, idx)) ++code;
    return code;
  }
  // (part, index within part) of a code.
  std::pair<std::size_t, std::size_t> locate(Code c) const {
    std::size_t r = 0;
    for (;;) {
      std::size_t act = active_in_round(r);
      if (act == 0) throw UnknownElement(c);
      if (all_infinite_from(r)) {
        Code q = c / act, m = c % act;
        r += q;
        return {nth_alive(r, m), r};
      }
      if (c < act) return {nth_alive(r, c), r};
      c -= act;
      ++r;
    }
  }
  const std::vector<LinearOrder>& parts() const { return parts_; }

 private:
  bool alive(std::size_t k, std::size_t r) const {
    auto n = parts_[k].size();
    return !n || r < *n;
  }
  std::size_t active_in_round(std::size_t r) const {
    std::size_t a = 0;
    for (std::size_t k = 0; k < parts_.size(); ++k) a += alive(k, r);
    return a;
  }
  bool all_infinite_from(std::size_t r) const {
    for (const auto& p : parts_)
      if (p.size() && *p.size() > r) return false;
    return true;
  }
  std::size_t nth_alive(std::size_t r, std::size_t m) const {
    for (std::size_t k = 0; k < parts_.size(); ++k)
      if (alive(k, r) && m-- == 0) return k;
    throw Error("interleave out of range");
  }
  std::vector<LinearOrder> parts_;
};

inline LinearOrder fin_order(std::vector<Code> ranked) {
  return LinearOrder(std::make_shared<FinOrder>(std::move(ranked)));
}
inline LinearOrder fin_order(std::size_t n) {
  std::vector<Code> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return fin_order(std::move(v));
}
inline LinearOrder cnf_order(const Cnf& a) { return LinearOrder(std::make_shared<CnfOrder>(a)); }
inline LinearOrder omega_star() { return LinearOrder(std::make_shared<OmegaStar>()); }
inline LinearOrder sum_orders(std::vector<LinearOrder> parts) {
  return LinearOrder(std::make_shared<SumOrder>(std::move(parts)));
}
inline LinearOrder sum_orders(const LinearOrder& a, const LinearOrder& b) { return sum_orders({a, b}); }

// ---------------------------------------------------------------------------
// Trees and the Kleene-Brouwer order.

using Node = std::vector<std::uint64_t>;

// s <_KB t: s properly extends t, or s is left of t at the first divergence.
inline Cmp kb_compare(const Node& s, const Node& t) {
  std::size_t n = std::min(s.size(), t.size());
  for (std::size_t i = 0; i < n; ++i)
    if (s[i] != t[i]) return cmp3(s[i], t[i]);
  return cmp3(t.size(), s.size());
}

class Tree {
 public:
  Tree() { nodes_.insert(Node{}); }
  explicit Tree(const std::vector<Node>& nodes) {
    nodes_.insert(Node{});
    for (const auto& n : nodes) nodes_.insert(n);
    for (const auto& n : nodes_)
      if (!n.empty() && !nodes_.count(Node(n.begin(), n.end() - 1)))
        throw Error("tree is not prefix-closed");
  }
  bool contains(const Node& n) const { return nodes_.count(n) > 0; }
  std::vector<std::uint64_t> children(const Node& n) const {
    std::vector<std::uint64_t> out;
    Node lo = n;
    lo.push_back(0);
    for (auto it = nodes_.lower_bound(lo); it != nodes_.end(); ++it) {
      if (it->size() <= n.size() || !std::equal(n.begin(), n.end(), it->begin())) break;
      if (it->size() == n.size() + 1) out.push_back(it->back());
    }
    return out;
  }
  std::size_t size() const { return nodes_.size(); }
  // Lexicographic listing.
  std::vector<Node> nodes() const { return {nodes_.begin(), nodes_.end()}; }
  std::size_t height() const {
    std::size_t h = 0;
    for (const auto& n : nodes_) h = std::max(h, n.size());
    return h;
  }

 private:
  std::set<Node> nodes_;
};

inline std::string node_string(const Node& n) {
  std::string s = "(";
  for (std::size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
  return s + ")";
}

inline std::string tree_json(const Tree& t) {
  std::string s = "[";
  bool first = true;
  for (const auto& n : t.nodes()) {
    s += first ? "[" : ",[";
    first = false;
    for (std::size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
    s += "]";
  }
  return s + "]";
}

// Shared behaviour of orders whose elements are tree nodes under KB.
class KbNodeOrder : public OrderImpl {
 public:
  virtual Node node(Code c) const = 0;
  virtual Code code_of(const Node& n) const = 0;
  Cmp compare_known(Code x, Code y) const override { return kb_compare(node(x), node(y)); }
};

// KB order of a finite tree; codes index the lexicographic listing.
class KbOrder : public KbNodeOrder {
 public:
  explicit KbOrder(Tree t, std::string label = "")
      : tree_(std::move(t)), label_(std::move(label)), nodes_(tree_.nodes()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i]] = i;
    std::vector<Code> asc(nodes_.size());
    for (std::size_t i = 0; i < asc.size(); ++i) asc[i] = i;
    std::sort(asc.begin(), asc.end(),
              [&](Code a, Code b) { return kb_compare(nodes_[a], nodes_[b]) == Cmp::LT; });
    rank_.resize(asc.size());
    for (std::size_t i = 0; i < asc.size(); ++i) rank_[asc[i]] = i;
    asc_ = std::move(asc);
  }
  std::optional<std::size_t> size() const override { return nodes_.size(); }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code c) const override { return c < nodes_.size(); }
  std::size_t index_of(Code c) const override { return c; }
  Node node(Code c) const override { return nodes_.at(c); }
  Code code_of(const Node& n) const override {
    auto it = index_.find(n);
    if (it == index_.end()) throw Error("node " + node_string(n) + " not in tree");
    return it->second;
  }
  std::string expr() const override { return label_.empty() ? "kb:" + tree_json(tree_) : label_; }
  std::optional<Cnf> type() const override { return Cnf::nat(nodes_.size()); }
  std::optional<Cnf> rank(Code c) const override { return Cnf::nat(rank_.at(c)); }
  std::optional<Code> unrank(const Cnf& a) const override {
    if (!a.is_finite() || a.to_nat() >= asc_.size()) return std::nullopt;
    return asc_[a.to_nat()];
  }
  // Nested chain: a node of length depth-1 and its prefixes.
  ChainResult find_chain(std::size_t depth, Budget& b) const override {
    ChainResult r;
    if (depth == 0) return {Search::Found, {}};
    for (const auto& n : nodes_) {
      if (!b.spend()) {
        r.status = Search::Exhausted;
        return r;
      }
      if (n.size() + 1 == depth) {
        for (std::size_t k = 0; k < depth; ++k) r.chain.push_back(code_of(Node(n.begin(), n.begin() + k)));
        r.status = Search::Found;
        return r;
      }
    }
    r.status = Search::None;
    return r;
  }
  const Tree& tree() const { return tree_; }

 private:
  Tree tree_;
  std::string label_;
  std::vector<Node> nodes_;
  std::map<Node, Code> index_;
  std::vector<std::size_t> rank_;
  std::vector<Code> asc_;
};

inline LinearOrder kb_order(const Tree& t, std::string label = "") {
  return LinearOrder(std::make_shared<KbOrder>(t, std::move(label)));
}

// ---------------------------------------------------------------------------
// The e-construction: element i of b (in enumeration order) is sent to a
// strictly b-descending sequence; KB on these sequences (labels compared as
// codes) is order-preserving on the first n elements.

inline std::vector<std::vector<Code>> descent_embedding(const LinearOrder& b, std::size_t n) {
  std::vector<Code> elems = b.prefix(n);
  std::vector<std::vector<Code>> e(elems.size());
  for (std::size_t i = 0; i < elems.size(); ++i) {
    std::optional<std::size_t> l;
    for (std::size_t j = 0; j < i; ++j) {
      if (b.less(elems[i], elems[j]) && (!l || b.less(elems[j], elems[*l]))) l = j;
    }
    if (!l) {
      e[i] = {elems[i]};
    } else {
      e[i] = e[*l];
      e[i].push_back(elems[i]);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// l_{a or b}: KB order of the tree of equal-length pairs (s, t), s strictly
// descending in a and t strictly descending in b. The label at each level
// is the Cantor pair of the two codes.

inline std::uint64_t cantor_pair(std::uint64_t x, std::uint64_t y) { return (x + y) * (x + y + 1) / 2 + y; }

inline std::pair<std::uint64_t, std::uint64_t> cantor_unpair(std::uint64_t z) {
  std::uint64_t w = 0;
  while ((w + 1) * (w + 2) / 2 <= z) ++w;
  std::uint64_t y = z - w * (w + 1) / 2;
  return {w - y, y};
}

class DisjOrder : public KbNodeOrder {
 public:
  DisjOrder(LinearOrder a, LinearOrder b) : a_(std::move(a)), b_(std::move(b)) {}

  std::optional<std::size_t> size() const override {
    if (!a_.finite() || !b_.finite()) return std::nullopt;
    std::lock_guard<std::mutex> lk(mu_);
    extend_locked(std::max(*a_.size(), *b_.size()) + 1);
    return nodes_.size();
  }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code c) const override {
    auto n = size();
    return !n || c < *n;
  }
  std::size_t index_of(Code c) const override { return c; }
  Node node(Code c) const override {
    std::lock_guard<std::mutex> lk(mu_);
    while (nodes_.size() <= c) {
      if (exhausted_locked()) throw UnknownElement(c);
      extend_locked(stage_ + 1);
    }
    return nodes_[c];
  }
  Code code_of(const Node& n) const override {
    std::size_t need = n.size();
    for (auto z : n) {
      auto [x, y] = cantor_unpair(z);
      need = std::max({need, a_.index_of(x), b_.index_of(y)});
    }
    std::lock_guard<std::mutex> lk(mu_);
    extend_locked(need + 1);
    auto it = index_.find(n);
    if (it == index_.end()) throw Error("not a node of the disjunction tree: " + node_string(n));
    return it->second;
  }
  std::string expr() const override { return "disj(" + a_.expr() + "," + b_.expr() + ")"; }
  bool has_descent() const override { return a_.has_descent() && b_.has_descent(); }
  Code descent(std::size_t i) const override { return code_of(descent_node(i)); }

  ChainResult find_chain(std::size_t depth, Budget& budget) const override {
    ChainResult r;
    if (depth == 0) return {Search::Found, {}};
    if (has_descent()) {
      if (!budget.spend(depth)) return {Search::Exhausted, {}};
      for (std::size_t k = 0; k < depth; ++k) r.chain.push_back(code_of(descent_node(k)));
      r.status = Search::Found;
      return r;
    }
    // Depth-first search for a branch of length depth-1.
    std::vector<Code> s, t;
    bool cut = false;
    // Longest descent still available below the last element of a finite side.
    auto room = [&](const LinearOrder& o, const std::vector<Code>& seq) -> std::size_t {
      if (!o.finite()) return SIZE_MAX;
      if (seq.empty()) return *o.size();
      std::size_t n = 0;
      for (Code c : o.prefix(*o.size())) n += o.less(c, seq.back());
      return n;
    };
    std::function<bool()> dfs = [&]() -> bool {
      if (s.size() + 1 == depth) return true;
      std::size_t need = depth - 1 - s.size();
      if (room(a_, s) < need || room(b_, t) < need) return false;
      for (std::size_t i = 0;; ++i) {
        if (a_.size() && i >= *a_.size()) break;
        if (!budget.spend()) {
          cut = true;
          return false;
        }
        Code x = a_.element(i);
        if (!s.empty() && !a_.less(x, s.back())) continue;
        for (std::size_t j = 0;; ++j) {
          if (b_.size() && j >= *b_.size()) break;
          if (!budget.spend()) {
            cut = true;
            return false;
          }
          Code y = b_.element(j);
          if (!t.empty() && !b_.less(y, t.back())) continue;
          s.push_back(x);
          t.push_back(y);
          if (dfs()) return true;
          s.pop_back();
          t.pop_back();
          if (cut) return false;
        }
      }
      return false;
    };
    if (dfs()) {
      Node n;
      for (std::size_t k = 0; k < s.size(); ++k) n.push_back(cantor_pair(s[k], t[k]));
      for (std::size_t k = 0; k <= n.size(); ++k) r.chain.push_back(code_of(Node(n.begin(), n.begin() + k)));
      r.status = Search::Found;
      return r;
    }
    r.status = cut ? Search::Exhausted : Search::None;
    return r;
  }

  static Node pair_node(const std::vector<Code>& s, const std::vector<Code>& t) {
    if (s.size() != t.size()) throw DomainMismatch("pair node needs equal lengths");
    Node n;
    for (std::size_t k = 0; k < s.size(); ++k) n.push_back(cantor_pair(s[k], t[k]));
    return n;
  }
  Node descent_node(std::size_t len) const {
    std::vector<Code> s, t;
    for (std::size_t k = 0; k < len; ++k) {
      s.push_back(a_.descent(k));
      t.push_back(b_.descent(k));
    }
    return pair_node(s, t);
  }
  const LinearOrder& left() const { return a_; }
  const LinearOrder& right() const { return b_; }

 private:
  bool exhausted_locked() const {
    if (!a_.finite() || !b_.finite()) return false;
    return stage_ > std::max(*a_.size(), *b_.size());
  }
  // Stage s adds the nodes whose length and element indices have maximum s.
  void extend_locked(std::size_t upto) const {
    while (stage_ < upto) {
      std::size_t s = stage_;
      if (s == 0) {
        add_locked(Node{});
      } else {
        std::vector<std::size_t> ai, bi;
        std::size_t na = a_.size() ? std::min(*a_.size(), s + 1) : s + 1;
        std::size_t nb = b_.size() ? std::min(*b_.size(), s + 1) : s + 1;
        std::vector<Code> s_seq, t_seq;
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t maxa, std::size_t maxb) {
          std::size_t len = s_seq.size();
          if (len > 0 && std::max({len, maxa, maxb}) == s) add_locked(pair_node(s_seq, t_seq));
          if (len + 1 > s) return;
          for (std::size_t i = 0; i < na; ++i) {
            Code x = a_.element(i);
            if (len && !a_.less(x, s_seq.back())) continue;
            for (std::size_t j = 0; j < nb; ++j) {
              Code y = b_.element(j);
              if (len && !b_.less(y, t_seq.back())) continue;
              s_seq.push_back(x);
              t_seq.push_back(y);
              rec(std::max(maxa, i), std::max(maxb, j));
              s_seq.pop_back();
              t_seq.pop_back();
            }
          }
        };
        rec(0, 0);
      }
      ++stage_;
    }
  }
  void add_locked(const Node& n) const {
    if (index_.emplace(n, nodes_.size()).second) nodes_.push_back(n);
  }

  LinearOrder a_, b_;
  mutable std::mutex mu_;
  mutable std::vector<Node> nodes_;
  mutable std::map<Node, Code> index_;
  mutable std::size_t stage_ = 0;
};

inline LinearOrder disj_order(const LinearOrder& a, const LinearOrder& b) {
  return LinearOrder(std::make_shared<DisjOrder>(a, b));
}

// Embedding of a (first n elements) into l_{a or b} when b has a known
// descent: the e-sequence of each element paired with the descent of b.
inline std::vector<Node> disj_embed_left(const DisjOrder& d, std::size_t n) {
  auto e = descent_embedding(d.left(), n);
  std::vector<Node> out;
  for (const auto& s : e) {
    std::vector<Code> t;
    for (std::size_t k = 0; k < s.size(); ++k) t.push_back(d.right().descent(k));
    out.push_back(DisjOrder::pair_node(s, t));
  }
  return out;
}

inline std::vector<Node> disj_embed_right(const DisjOrder& d, std::size_t n) {
  auto e = descent_embedding(d.right(), n);
  std::vector<Node> out;
  for (const auto& t : e) {
    std::vector<Code> s;
    for (std::size_t k = 0; k < t.size(); ++k) s.push_back(d.left().descent(k));
    out.push_back(DisjOrder::pair_node(s, t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings.

struct OrderEmbedding {
  LinearOrder source, target;
  std::vector<std::pair<Code, Code>> map;  // in source enumeration order

  bool order_preserving() const {
    for (std::size_t i = 0; i < map.size(); ++i)
      for (std::size_t j = 0; j < map.size(); ++j)
        if (source.compare(map[i].first, map[j].first) != target.compare(map[i].second, map[j].second))
          return false;
    return true;
  }
};

struct EmbeddingResult {
  Search status = Search::None;
  std::optional<OrderEmbedding> embedding;
};

// Least witness: images listed along a's ascending order, compared by their
// enumeration indices in x. Exhaustive when x is finite; for infinite x the
// search deepens over the largest index used.
inline EmbeddingResult find_embedding(const LinearOrder& a, const LinearOrder& x, std::uint64_t budget) {
  if (!a.finite()) throw DomainMismatch("find_embedding needs a finite source order");
  std::vector<Code> asc = a.ascending();
  std::size_t k = asc.size();
  Budget b(budget);
  std::vector<std::size_t> pick;
  bool cut = false;
  auto run = [&](std::size_t bound, bool need_max) {
    std::function<bool(std::size_t, bool)> dfs = [&](std::size_t pos, bool used_max) -> bool {
      if (pos == k) return !need_max || used_max;
      for (std::size_t i = 0; i < bound; ++i) {
        if (!b.spend()) {
          cut = true;
          return false;
        }
        if (pos && !x.less(x.element(pick.back()), x.element(i))) continue;
        pick.push_back(i);
        if (dfs(pos + 1, used_max || i + 1 == bound)) return true;
        pick.pop_back();
        if (cut) return false;
      }
      return false;
    };
    return dfs(0, false);
  };
  EmbeddingResult r;
  auto finish = [&]() {
    OrderEmbedding e{a, x, {}};
    for (std::size_t i = 0; i < k; ++i) e.map.push_back({asc[i], x.element(pick[i])});
    std::sort(e.map.begin(), e.map.end(),
              [&](auto& p, auto& q) { return a.index_of(p.first) < a.index_of(q.first); });
    r.status = Search::Found;
    r.embedding = std::move(e);
  };
  if (k == 0) {
    finish();
    return r;
  }
  if (x.finite()) {
    if (run(*x.size(), false)) finish();
    else r.status = cut ? Search::Exhausted : Search::None;
    return r;
  }
  for (std::size_t bound = 1;; ++bound) {
    pick.clear();
    if (run(bound, true)) {
      finish();
      return r;
    }
    if (cut) {
      r.status = Search::Exhausted;
      return r;
    }
  }
}

// Decides embeddability of a into x when both carry CNF types; the witness
// composes rank and unrank.
inline std::optional<std::function<Code(Code)>> typed_embedding(const LinearOrder& a, const LinearOrder& x) {
  auto ta = a.type(), tx = x.type();
  if (!ta || !tx || *tx < *ta) return std::nullopt;
  return std::function<Code(Code)>([a, x](Code c) {
    auto r = a.rank(c);
    auto u = r ? x.unrank(*r) : std::nullopt;
    if (!u) throw Error("rank transfer failed");
    return *u;
  });
}

}  // namespace ptyx
