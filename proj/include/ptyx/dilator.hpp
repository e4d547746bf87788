#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "core.hpp"
#include "order.hpp"

namespace ptyx {

// Structured term identifier; each system reads its own layout.
struct Term {
  std::vector<std::int64_t> v;
  std::vector<Term> sub;
  std::string bytes;
};

inline bool operator==(const Term& a, const Term& b) {
  return a.v == b.v && a.bytes == b.bytes && a.sub.size() == b.sub.size() &&
         std::equal(a.sub.begin(), a.sub.end(), b.sub.begin(), [](const Term& x, const Term& y) { return x == y; });
}
inline bool operator!=(const Term& a, const Term& b) { return !(a == b); }
inline bool operator<(const Term& a, const Term& b) {
  if (a.v != b.v) return a.v < b.v;
  if (a.bytes != b.bytes) return a.bytes < b.bytes;
  return std::lexicographical_compare(a.sub.begin(), a.sub.end(), b.sub.begin(), b.sub.end(),
                                      [](const Term& x, const Term& y) { return x < y; });
}

struct Denotation {
  Term term;
  std::vector<Code> args;  // strictly increasing in the argument order
};

inline bool operator==(const Denotation& a, const Denotation& b) { return a.term == b.term && a.args == b.args; }
inline bool operator!=(const Denotation& a, const Denotation& b) { return !(a == b); }
inline bool operator<(const Denotation& a, const Denotation& b) {
  if (a.term != b.term) return a.term < b.term;
  return a.args < b.args;
}

// Linear preorder on two position sets, strict on each side: positions get
// ranks 0..width-1 and a shared rank means equal arguments.
struct MergePattern {
  std::vector<std::uint32_t> left, right;

  std::uint32_t width() const {
    std::uint32_t w = 0;
    for (auto r : left) w = std::max(w, r + 1);
    for (auto r : right) w = std::max(w, r + 1);
    return w;
  }
  MergePattern swapped() const { return {right, left}; }
  bool valid() const {
    for (std::size_t i = 1; i < left.size(); ++i)
      if (left[i] <= left[i - 1]) return false;
    for (std::size_t i = 1; i < right.size(); ++i)
      if (right[i] <= right[i - 1]) return false;
    std::vector<bool> used(width(), false);
    for (auto r : left) used[r] = true;
    for (auto r : right) used[r] = true;
    return std::all_of(used.begin(), used.end(), [](bool b) { return b; });
  }
};

inline bool operator==(const MergePattern& a, const MergePattern& b) { return a.left == b.left && a.right == b.right; }
inline bool operator<(const MergePattern& a, const MergePattern& b) {
  return std::tie(a.left, a.right) < std::tie(b.left, b.right);
}

inline std::string to_string(const MergePattern& p) {
  auto side = [](const std::vector<std::uint32_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
  };
  return side(p.left) + "|" + side(p.right);
}

template <class Less>
MergePattern merge_pattern(std::size_t k, std::size_t m, Less less_lr, Less less_rl) {
  MergePattern p;
  p.left.resize(k);
  p.right.resize(m);
  std::size_t i = 0, j = 0;
  std::uint32_t r = 0;
  while (i < k || j < m) {
    if (j == m || (i < k && less_lr(i, j))) p.left[i++] = r++;
    else if (i == k || less_rl(j, i)) p.right[j++] = r++;
    else {
      p.left[i++] = r;
      p.right[j++] = r++;
    }
  }
  return p;
}

inline MergePattern pattern_of(const LinearOrder& x, const std::vector<Code>& a, const std::vector<Code>& b) {
  auto lr = [&](std::size_t i, std::size_t j) { return x.less(a[i], b[j]); };
  auto rl = [&](std::size_t j, std::size_t i) { return x.less(b[j], a[i]); };
  return merge_pattern(a.size(), b.size(), std::function<bool(std::size_t, std::size_t)>(lr),
                       std::function<bool(std::size_t, std::size_t)>(rl));
}

// Outcome of a witness search in an evaluated order.
struct DenChain {
  Search status = Search::None;
  std::vector<Denotation> chain;
  std::string method;
};

class EvaluatedOrder;
class SystemImpl;

class DenotationSystem {
 public:
  DenotationSystem() = default;
  explicit DenotationSystem(std::shared_ptr<const SystemImpl> p) : p_(std::move(p)) {}
  const SystemImpl& impl() const { return *p_; }
  const SystemImpl* operator->() const { return p_.get(); }
  const std::shared_ptr<const SystemImpl>& ptr() const { return p_; }
  std::string expr() const;

 private:
  std::shared_ptr<const SystemImpl> p_;
};

using CodeMap = std::function<Code(Code)>;

class SystemImpl : public std::enable_shared_from_this<SystemImpl> {
 public:
  virtual ~SystemImpl() = default;
  // Term space: terms of each arity, enumerated; nullopt means infinitely many.
  virtual std::optional<std::size_t> num_terms(std::size_t arity) const = 0;
  virtual Term term(std::size_t arity, std::size_t i) const = 0;
  virtual std::size_t arity(const Term& t) const = 0;
  virtual std::optional<std::size_t> max_arity() const = 0;
  virtual Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const = 0;
  virtual std::string expr() const = 0;
  virtual std::string term_string(const Term& t) const;

  virtual std::size_t term_index(std::size_t arity, const Term& t) const;
  virtual LinearOrder evaluate(const LinearOrder& x) const;
  virtual Denotation map(const Denotation& d, const CodeMap& f, const LinearOrder& x, const LinearOrder& y) const;
  // Order type of D(x), when known to be a wellorder of CNF type.
  virtual std::optional<Cnf> type_at(const LinearOrder&) const { return std::nullopt; }
  virtual std::optional<Cnf> value(const Denotation&, const LinearOrder&) const { return std::nullopt; }
  virtual std::optional<Denotation> unvalue(const Cnf&, const LinearOrder&) const { return std::nullopt; }
  virtual DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const;

  DenotationSystem self() const { return DenotationSystem(shared_from_this()); }
};

inline std::string DenotationSystem::expr() const { return p_->expr(); }

// D(x): denotations over x, enumerated in stages. Stage s holds the
// denotations whose arity, term index and largest argument index have
// maximum s. Codes index this enumeration.
class EvaluatedOrder : public OrderImpl {
 public:
  EvaluatedOrder(std::shared_ptr<const SystemImpl> d, LinearOrder x) : d_(std::move(d)), x_(std::move(x)) {
    compute_size();
  }

  std::optional<std::size_t> size() const override { return size_; }
  Code element(std::size_t i) const override { return i; }
  bool contains(Code c) const override {
    if (size_) return c < *size_;
    return true;
  }
  std::size_t index_of(Code c) const override { return c; }
  Cmp compare_known(Code a, Code b) const override { return compare_den(denotation(a), denotation(b)); }
  std::string expr() const override { return "eval(" + d_->expr() + "," + x_.expr() + ")"; }
  std::optional<Cnf> type() const override { return d_->type_at(x_); }
  std::optional<Cnf> rank(Code c) const override { return d_->value(denotation(c), x_); }
  std::optional<Code> unrank(const Cnf& a) const override {
    auto d = d_->unvalue(a, x_);
    if (!d) return std::nullopt;
    return code_of(*d);
  }

  const LinearOrder& arg_order() const { return x_; }
  DenotationSystem system() const { return DenotationSystem(d_); }

  Denotation denotation(Code c) const {
    std::lock_guard<std::mutex> lk(mu_);
    while (list_.size() <= c) {
      if (size_ && stage_ > last_stage_) throw UnknownElement(c);
      run_stage_locked();
    }
    return list_[c];
  }

  Cmp compare_den(const Denotation& a, const Denotation& b) const {
    MergePattern p = pattern_of(x_, a.args, b.args);
    Cmp c = d_->pattern_compare(a.term, b.term, p);
    if (c == Cmp::EQ && a != b)
      throw PatternInconsistency("distinct denotations compare EQ under pattern " + to_string(p));
    return c;
  }

  bool well_formed(const Denotation& d) const {
    if (d_->arity(d.term) != d.args.size()) return false;
    for (std::size_t i = 0; i < d.args.size(); ++i) {
      if (!x_.contains(d.args[i])) return false;
      if (i && !x_.less(d.args[i - 1], d.args[i])) return false;
    }
    return true;
  }

  Code code_of(const Denotation& d) const {
    if (!well_formed(d)) throw DomainMismatch("not a denotation over this order");
    std::size_t k = d.args.size();
    std::size_t stage = std::max(k, d_->term_index(k, d.term));
    for (Code a : d.args) stage = std::max(stage, x_.index_of(a));
    std::lock_guard<std::mutex> lk(mu_);
    while (stage_ <= stage) run_stage_locked();
    auto it = index_.find(d);
    if (it == index_.end()) throw Error("denotation missing from its stage");
    return it->second;
  }

  // Witness search; the default looks for a chain descending along the
  // enumeration.
  virtual DenChain find_den_chain(std::size_t depth, Budget& budget) const {
    ChainResult r = OrderImpl::find_chain(depth, budget);
    DenChain out{r.status, {}, "enumeration-chain"};
    for (Code c : r.chain) out.chain.push_back(denotation(c));
    return out;
  }
  ChainResult find_chain(std::size_t depth, Budget& budget) const override {
    DenChain d = find_den_chain(depth, budget);
    ChainResult r{d.status, {}};
    for (const auto& x : d.chain) r.chain.push_back(code_of(x));
    return r;
  }

  bool is_descending(const std::vector<Denotation>& chain) const {
    for (std::size_t i = 1; i < chain.size(); ++i)
      if (compare_den(chain[i - 1], chain[i]) != Cmp::GT) return false;
    return true;
  }

 private:
  void compute_size() {
    auto xs = x_.size();
    if (!xs) {
      auto ma = d_->max_arity();
      if (!ma) return;
      std::size_t last = 0;
      for (std::size_t k = 0; k <= *ma; ++k) {
        auto nt = d_->num_terms(k);
        if (k > 0 && (!nt || *nt > 0)) return;
        if (k == 0) {
          if (!nt) return;
          last = *nt;
        }
      }
      last_stage_ = last;
      size_ = d_->num_terms(0).value_or(0);
      return;
    }
    std::size_t kmax = *xs;
    if (auto ma = d_->max_arity()) kmax = std::min(kmax, *ma);
    std::size_t total = 0, last = *xs;
    for (std::size_t k = 0; k <= kmax; ++k) {
      auto nt = d_->num_terms(k);
      if (!nt) return;
      total += *nt * binom(*xs, k);
      last = std::max({last, k, *nt});
    }
    last_stage_ = last;
    size_ = total;
  }

  static std::size_t binom(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  void run_stage_locked() const {
    std::size_t s = stage_++;
    auto xs = x_.size();
    std::size_t xlim = xs ? std::min(*xs, s + 1) : s + 1;
    std::size_t kmax = s;
    if (xs) kmax = std::min(kmax, *xs);
    if (auto ma = d_->max_arity()) kmax = std::min(kmax, *ma);
    for (std::size_t k = 0; k <= kmax; ++k) {
      auto nt = d_->num_terms(k);
      std::size_t ilim = nt ? std::min(*nt, s + 1) : s + 1;
      for (std::size_t i = 0; i < ilim; ++i) {
        bool top = std::max(k, i) == s;
        if (!top && (k == 0 || s >= xlim)) continue;
        Term t = d_->term(k, i);
        std::vector<std::size_t> idx(k);
        std::function<void(std::size_t, std::size_t, bool)> rec = [&](std::size_t pos, std::size_t from,
                                                                     bool has_s) {
          if (pos == k) {
            if (!top && !has_s) return;
            Denotation d{t, {}};
            for (auto j : idx) d.args.push_back(x_.element(j));
            std::sort(d.args.begin(), d.args.end(), [&](Code a, Code b) { return x_.less(a, b); });
            add_locked(std::move(d));
            return;
          }
          for (std::size_t j = from; j < xlim; ++j) {
            idx[pos] = j;
            rec(pos + 1, j + 1, has_s || j == s);
          }
        };
        rec(0, 0, false);
      }
    }
  }

  void add_locked(Denotation d) const {
    if (index_.count(d)) return;
    index_.emplace(d, list_.size());
    list_.push_back(std::move(d));
  }

  std::shared_ptr<const SystemImpl> d_;
  LinearOrder x_;
  std::optional<std::size_t> size_;
  std::size_t last_stage_ = 0;
  mutable std::mutex mu_;
  mutable std::vector<Denotation> list_;
  mutable std::map<Denotation, Code> index_;
  mutable std::size_t stage_ = 0;
};

inline std::string SystemImpl::term_string(const Term& t) const {
  std::string s = "t[";
  for (std::size_t i = 0; i < t.v.size(); ++i) s += (i ? "," : "") + std::to_string(t.v[i]);
  return s + "]";
}

inline std::size_t SystemImpl::term_index(std::size_t k, const Term& t) const {
  auto nt = num_terms(k);
  for (std::size_t i = 0; !nt || i < *nt; ++i) {
    if (term(k, i) == t) return i;
    if (i > 1000000) break;
  }
  throw DomainMismatch("term not in the enumeration: " + term_string(t));
}

inline LinearOrder SystemImpl::evaluate(const LinearOrder& x) const {
  return LinearOrder(std::make_shared<EvaluatedOrder>(shared_from_this(), x));
}

inline Denotation SystemImpl::map(const Denotation& d, const CodeMap& f, const LinearOrder&,
                                  const LinearOrder&) const {
  Denotation r{d.term, {}};
  for (Code a : d.args) r.args.push_back(f(a));
  return r;
}

inline const EvaluatedOrder& as_evaluated(const LinearOrder& o) {
  auto* e = dynamic_cast<const EvaluatedOrder*>(&o.impl());
  if (!e) throw DomainMismatch("order is not an evaluated pre-dilator");
  return *e;
}

inline DenChain SystemImpl::probe(const LinearOrder& x, std::size_t depth, Budget& budget) const {
  if (auto t = type_at(x)) return {Search::None, {}, "wellorder of type " + to_string(*t)};
  // A finite descending chain is not evidence of illfoundedness: report it
  // but leave the question open.
  LinearOrder e = evaluate(x);
  DenChain c = as_evaluated(e).find_den_chain(depth, budget);
  c.method = "bounded chain search (" + std::string(to_string(c.status)) + ")";
  c.status = Search::Exhausted;
  return c;
}

inline LinearOrder evaluate(const DenotationSystem& d, const LinearOrder& x) { return d->evaluate(x); }

inline std::string den_string(const DenotationSystem& d, const Denotation& x) {
  std::string s = d->term_string(x.term) + "(";
  for (std::size_t i = 0; i < x.args.size(); ++i) s += (i ? "," : "") + std::to_string(x.args[i]);
  return s + ")";
}

// The action of D on an embedding f: x -> y given on codes.
inline Denotation map(const DenotationSystem& d, const Denotation& den, const CodeMap& f, const LinearOrder& x,
                      const LinearOrder& y) {
  return d->map(den, f, x, y);
}

// Embedding between the standard finite orders, as a list of images.
inline Denotation map(const DenotationSystem& d, const Denotation& den, const std::vector<Code>& f,
                      std::optional<std::size_t> target = std::nullopt) {
  std::size_t m = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i && f[i] <= f[i - 1]) throw DomainMismatch("map needs a strictly increasing f");
    m = std::max<std::size_t>(m, f[i] + 1);
  }
  if (target) {
    if (*target < m) throw DomainMismatch("f leaves its target");
    m = *target;
  }
  CodeMap fc = [&](Code c) {
    if (c >= f.size()) throw DomainMismatch("argument outside the domain of f");
    return f[c];
  };
  return d->map(den, fc, fin_order(f.size()), fin_order(m));
}

// ---------------------------------------------------------------------------
// Identity.

class IdSystem : public SystemImpl {
 public:
  std::optional<std::size_t> num_terms(std::size_t k) const override { return k == 1 ? 1 : 0; }
  Term term(std::size_t, std::size_t) const override { return Term{}; }
  std::size_t arity(const Term&) const override { return 1; }
  std::optional<std::size_t> max_arity() const override { return 1; }
  Cmp pattern_compare(const Term&, const Term&, const MergePattern& p) const override {
    return cmp3(p.left.at(0), p.right.at(0));
  }
  std::string expr() const override { return "id"; }
  std::string term_string(const Term&) const override { return "x"; }
  std::optional<Cnf> type_at(const LinearOrder& x) const override { return x.type(); }
  std::optional<Cnf> value(const Denotation& d, const LinearOrder& x) const override { return x.rank(d.args.at(0)); }
  std::optional<Denotation> unvalue(const Cnf& a, const LinearOrder& x) const override {
    auto c = x.unrank(a);
    if (!c) return std::nullopt;
    return Denotation{Term{}, {*c}};
  }
  DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const override {
    if (auto t = x.type()) return {Search::None, {}, "wellorder of type " + to_string(*t)};
    ChainResult r = x.find_chain(depth, budget);
    DenChain out{r.status, {}, "argument chain"};
    if (!x.has_descent() && r.status != Search::None) out.status = Search::Exhausted;
    for (Code c : r.chain) out.chain.push_back({Term{}, {c}});
    return out;
  }
};

// Constant C_a: one nullary term per element of a.
class ConstSystem : public SystemImpl {
 public:
  explicit ConstSystem(LinearOrder a) : a_(std::move(a)) {}
  std::optional<std::size_t> num_terms(std::size_t k) const override {
    if (k) return 0;
    return a_.size();
  }
  Term term(std::size_t, std::size_t i) const override { return Term{{static_cast<std::int64_t>(a_.element(i))}, {}, {}}; }
  std::size_t term_index(std::size_t, const Term& t) const override { return a_.index_of(t.v.at(0)); }
  std::size_t arity(const Term&) const override { return 0; }
  std::optional<std::size_t> max_arity() const override { return 0; }
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern&) const override {
    return a_.compare(s.v.at(0), t.v.at(0));
  }
  std::string expr() const override { return "const(" + a_.expr() + ")"; }
  std::string term_string(const Term& t) const override { return "c" + std::to_string(t.v.at(0)); }
  std::optional<Cnf> type_at(const LinearOrder&) const override { return a_.type(); }
  std::optional<Cnf> value(const Denotation& d, const LinearOrder&) const override { return a_.rank(d.term.v.at(0)); }
  std::optional<Denotation> unvalue(const Cnf& b, const LinearOrder&) const override {
    auto c = a_.unrank(b);
    if (!c) return std::nullopt;
    return Denotation{Term{{static_cast<std::int64_t>(*c)}, {}, {}}, {}};
  }
  DenChain probe(const LinearOrder&, std::size_t depth, Budget& budget) const override {
    if (auto t = a_.type()) return {Search::None, {}, "constant wellorder of type " + to_string(*t)};
    ChainResult r = a_.find_chain(depth, budget);
    DenChain out{r.status, {}, "constant chain"};
    if (!a_.has_descent() && r.status != Search::None) out.status = Search::Exhausted;
    for (Code c : r.chain) out.chain.push_back({Term{{static_cast<std::int64_t>(c)}, {}, {}}, {}});
    return out;
  }
  const LinearOrder& value_order() const { return a_; }

 private:
  LinearOrder a_;
};

// Round-robin interleave of several (possibly infinite) counts.
struct Interleave {
  std::vector<std::optional<std::size_t>> counts;

  std::optional<std::size_t> total() const {
    std::size_t t = 0;
    for (auto c : counts) {
      if (!c) return std::nullopt;
      t += *c;
    }
    return t;
  }
  bool alive(std::size_t k, std::size_t r) const { return !counts[k] || r < *counts[k]; }
  std::pair<std::size_t, std::size_t> locate(std::size_t i) const {
    for (std::size_t r = 0;; ++r) {
      std::size_t act = 0;
      bool rest_infinite = true;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        act += alive(k, r);
        if (counts[k] && *counts[k] > r) rest_infinite = false;
      }
      if (act == 0) throw Error("interleave index out of range");
      if (rest_infinite) {
        std::size_t q = i / act, m = i % act;
        r += q;
        for (std::size_t k = 0; k < counts.size(); ++k)
          if (alive(k, r) && m-- == 0) return {k, r};
      }
      if (i < act) {
        for (std::size_t k = 0; k < counts.size(); ++k)
          if (alive(k, r) && i-- == 0) return {k, r};
      }
      i -= act;
    }
  }
  std::size_t position(std::size_t part, std::size_t idx) const {
    std::size_t p = 0;
    for (std::size_t r = 0; r < idx; ++r)
      for (std::size_t k = 0; k < counts.size(); ++k) p += alive(k, r);
    for (std::size_t k = 0; k < part; ++k) p += alive(k, idx);
    return p;
  }
};

// Tagged sum of systems, ordered by tag. Optional certificates decorate the
// terms as pairs (t, p).
class SumSystem : public SystemImpl {
 public:
  SumSystem(std::vector<DenotationSystem> parts, std::string label, std::vector<std::string> certs = {})
      : parts_(std::move(parts)), label_(std::move(label)), certs_(std::move(certs)) {}

  std::optional<std::size_t> num_terms(std::size_t k) const override { return inter(k).total(); }
  Term term(std::size_t k, std::size_t i) const override {
    auto [part, idx] = inter(k).locate(i);
    Term t{{static_cast<std::int64_t>(part)}, {parts_[part]->term(k, idx)}, cert(part)};
    return t;
  }
  std::size_t term_index(std::size_t k, const Term& t) const override {
    std::size_t part = t.v.at(0);
    return inter(k).position(part, parts_.at(part)->term_index(k, t.sub.at(0)));
  }
  std::size_t arity(const Term& t) const override { return parts_.at(t.v.at(0))->arity(t.sub.at(0)); }
  std::optional<std::size_t> max_arity() const override {
    std::size_t m = 0;
    for (const auto& p : parts_) {
      auto a = p->max_arity();
      if (!a) return std::nullopt;
      m = std::max(m, *a);
    }
    return m;
  }
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    if (s.v.at(0) != t.v.at(0)) return cmp3(s.v[0], t.v[0]);
    Cmp c = parts_.at(s.v[0])->pattern_compare(s.sub.at(0), t.sub.at(0), p);
    return c;
  }
  std::string expr() const override { return label_; }
  std::string term_string(const Term& t) const override {
    std::string s = std::to_string(t.v.at(0)) + ":" + parts_.at(t.v[0])->term_string(t.sub.at(0));
    if (!certs_.empty()) s += "#" + hex(t.bytes);
    return s;
  }
  std::optional<Cnf> type_at(const LinearOrder& x) const override { return prefix_type(x, parts_.size()); }
  std::optional<Cnf> value(const Denotation& d, const LinearOrder& x) const override {
    std::size_t part = d.term.v.at(0);
    auto base = prefix_type(x, part);
    auto v = parts_[part]->value(strip(d), x);
    if (!base || !v) return std::nullopt;
    return cnf_add(*base, *v);
  }
  std::optional<Denotation> unvalue(const Cnf& a, const LinearOrder& x) const override {
    Cnf base;
    for (std::size_t j = 0; j < parts_.size(); ++j) {
      auto t = parts_[j]->type_at(x);
      if (!t) return std::nullopt;
      Cnf top = cnf_add(base, *t);
      if (a < top) {
        auto d = parts_[j]->unvalue(cnf_left_sub(base, a), x);
        if (!d) return std::nullopt;
        return inject(j, *d);
      }
      base = top;
    }
    return std::nullopt;
  }
  Denotation map(const Denotation& d, const CodeMap& f, const LinearOrder& x, const LinearOrder& y) const override {
    std::size_t part = d.term.v.at(0);
    return inject(part, parts_.at(part)->map(strip(d), f, x, y));
  }
  // Summand-wise search: D* is illfounded at x iff some summand is.
  DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const override {
    bool exhausted = false;
    for (std::size_t j = 0; j < parts_.size(); ++j) {
      DenChain c = parts_[j]->probe(x, depth, budget);
      if (c.status == Search::Found) {
        DenChain out{Search::Found, {}, "summand " + std::to_string(j) + ": " + c.method};
        for (const auto& d : c.chain) out.chain.push_back(inject(j, d));
        return out;
      }
      if (c.status == Search::Exhausted) exhausted = true;
    }
    return {exhausted ? Search::Exhausted : Search::None, {}, "summand-wise"};
  }

  Denotation inject(std::size_t part, const Denotation& d) const {
    return Denotation{Term{{static_cast<std::int64_t>(part)}, {d.term}, cert(part)}, d.args};
  }
  static Denotation strip(const Denotation& d) { return Denotation{d.term.sub.at(0), d.args}; }
  const std::vector<DenotationSystem>& parts() const { return parts_; }

 private:
  Interleave inter(std::size_t k) const {
    Interleave it;
    for (const auto& p : parts_) it.counts.push_back(p->num_terms(k));
    return it;
  }
  std::string cert(std::size_t part) const { return certs_.empty() ? std::string() : certs_.at(part); }
  std::optional<Cnf> prefix_type(const LinearOrder& x, std::size_t n) const {
    Cnf t;
    for (std::size_t j = 0; j < n; ++j) {
      auto pt = parts_[j]->type_at(x);
      if (!pt) return std::nullopt;
      t = cnf_add(t, *pt);
    }
    return t;
  }
  static std::string hex(const std::string& b) {
    static const char* d = "0123456789abcdef";
    std::string s;
    for (unsigned char c : b) {
      s += d[c >> 4];
      s += d[c & 15];
    }
    return s;
  }

  std::vector<DenotationSystem> parts_;
  std::string label_;
  std::vector<std::string> certs_;
};

// w^x over CNF: term (c_1..c_k) with arguments x_1 < ... < x_k stands for
// w^{x_k} c_k + ... + w^{x_1} c_1.
class ExpOmegaSystem : public SystemImpl {
 public:
  std::optional<std::size_t> num_terms(std::size_t k) const override {
    if (k == 0) return 1;
    return std::nullopt;
  }
  Term term(std::size_t k, std::size_t i) const override {
    if (k == 0) return Term{};
    std::lock_guard<std::mutex> lk(mu_);
    auto& cache = cache_[k];
    auto& level = level_[k];
    if (level == 0) level = k;
    while (cache.size() <= i) {
      std::vector<std::int64_t> c(k, 1);
      std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t pos, std::int64_t left) {
        if (pos + 1 == k) {
          c[pos] = left;
          cache.push_back(Term{c, {}, {}});
          return;
        }
        for (std::int64_t v = 1; v + static_cast<std::int64_t>(k - pos - 1) <= left; ++v) {
          c[pos] = v;
          rec(pos + 1, left - v);
        }
      };
      rec(0, static_cast<std::int64_t>(level));
      ++level;
    }
    return cache[i];
  }
  std::size_t term_index(std::size_t k, const Term& t) const override {
    if (k == 0) return 0;
    std::int64_t sum = 0;
    for (auto c : t.v) sum += c;
    // compositions of smaller sums come first
    std::size_t i = 0;
    for (;; ++i) {
      Term u = term(k, i);
      if (u == t) return i;
      std::int64_t su = 0;
      for (auto c : u.v) su += c;
      if (su > sum) throw DomainMismatch("not an exponential term");
    }
  }
  std::size_t arity(const Term& t) const override { return t.v.size(); }
  std::optional<std::size_t> max_arity() const override { return std::nullopt; }
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(s.v.size()) - 1, j = static_cast<std::ptrdiff_t>(t.v.size()) - 1;
    for (; i >= 0 && j >= 0; --i, --j) {
      if (p.left[i] != p.right[j]) return cmp3(p.left[i], p.right[j]);
      if (s.v[i] != t.v[j]) return cmp3(s.v[i], t.v[j]);
    }
    if (i >= 0) return Cmp::GT;
    if (j >= 0) return Cmp::LT;
    return Cmp::EQ;
  }
  std::string expr() const override { return "expw"; }
  std::string term_string(const Term& t) const override {
    if (t.v.empty()) return "0";
    std::string s;
    for (std::size_t i = t.v.size(); i-- > 0;) {
      std::size_t pos = i + 1;
      s += (i + 1 < t.v.size() ? "+" : "") + std::string("w^x") + std::to_string(pos);
      if (t.v[i] > 1) s += "*" + std::to_string(t.v[i]);
    }
    return s;
  }
  std::optional<Cnf> type_at(const LinearOrder& x) const override {
    auto t = x.type();
    if (!t) return std::nullopt;
    return cnf_omega_pow(*t);
  }
  std::optional<Cnf> value(const Denotation& d, const LinearOrder& x) const override {
    Cnf r;
    for (std::size_t i = d.args.size(); i-- > 0;) {
      auto e = x.rank(d.args[i]);
      if (!e) return std::nullopt;
      Cnf term;
      term.terms.push_back({*e, static_cast<std::uint64_t>(d.term.v[i])});
      r = cnf_add(r, term);
    }
    return r;
  }
  std::optional<Denotation> unvalue(const Cnf& a, const LinearOrder& x) const override {
    Denotation d;
    for (std::size_t i = a.terms.size(); i-- > 0;) {
      auto c = x.unrank(a.terms[i].exp);
      if (!c) return std::nullopt;
      d.args.push_back(*c);
      d.term.v.push_back(static_cast<std::int64_t>(a.terms[i].coef));
    }
    return d;
  }
  DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const override {
    if (auto t = type_at(x)) return {Search::None, {}, "wellorder of type " + to_string(*t)};
    ChainResult r = x.find_chain(depth, budget);
    DenChain out{r.status, {}, "exponent chain"};
    if (!x.has_descent() && r.status != Search::None) out.status = Search::Exhausted;
    for (Code c : r.chain) out.chain.push_back({Term{{1}, {}, {}}, {c}});
    return out;
  }

 private:
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::vector<Term>> cache_;
  mutable std::map<std::size_t, std::size_t> level_;
};

// ---------------------------------------------------------------------------
// D_{a->b}: x maps to the KB order of the tree T_{a,b}(x) of nodes <n, f, g>,
// f: n -> b strictly b-descending, g: a|n -> x order-preserving, where a|n
// holds the codes of a below n. Term = (n, f), arguments = image of g.

class ImplSystem;

class ImplOrder : public EvaluatedOrder {
 public:
  ImplOrder(std::shared_ptr<const SystemImpl> d, LinearOrder x) : EvaluatedOrder(std::move(d), std::move(x)) {}
  DenChain find_den_chain(std::size_t depth, Budget& budget) const override;
};

class ImplSystem : public SystemImpl {
 public:
  ImplSystem(LinearOrder a, LinearOrder b) : a_(std::move(a)), b_(std::move(b)) {}

  // |a|n|
  std::size_t restrict_count(std::size_t n) const {
    std::size_t k = 0;
    while ((!a_.size() || k < *a_.size()) && a_.element(k) < n) ++k;
    return k;
  }
  // Codes of a below n, in a-ascending order (the argument positions).
  std::vector<Code> domain(std::size_t n) const {
    std::vector<Code> d = a_.prefix(restrict_count(n));
    std::sort(d.begin(), d.end(), [&](Code x, Code y) { return a_.less(x, y); });
    return d;
  }
  // Range of n with |a|n| = k, as [lo, hi]; hi empty means unbounded.
  std::optional<std::pair<std::size_t, std::optional<std::size_t>>> lengths(std::size_t k) const {
    auto as = a_.size();
    if (as && k > *as) return std::nullopt;
    std::size_t lo = k == 0 ? 0 : a_.element(k - 1) + 1;
    std::optional<std::size_t> hi;
    if (!as || k < *as) hi = a_.element(k);
    return std::make_pair(lo, hi);
  }

  std::optional<std::size_t> num_terms(std::size_t k) const override {
    auto r = lengths(k);
    if (!r) return 0;
    auto [lo, hi] = *r;
    if (!b_.finite()) {
      if (lo == 0 && hi && *hi == 0) return 1;
      return std::nullopt;
    }
    std::size_t nb = *b_.size(), tot = 0;
    std::size_t top = hi ? std::min(*hi, nb) : nb;
    for (std::size_t n = lo; n <= top; ++n) tot += binom(nb, n);
    return tot;
  }
  Term term(std::size_t k, std::size_t i) const override {
    std::lock_guard<std::mutex> lk(mu_);
    auto& c = cache_[k];
    while (c.terms.size() <= i) {
      if (!grow_locked(k, c)) throw Error("implication term index out of range");
    }
    return c.terms[i];
  }
  std::size_t term_index(std::size_t k, const Term& t) const override {
    std::size_t stage = t.v.at(0);
    for (std::size_t i = 1; i < t.v.size(); ++i) stage = std::max(stage, b_.index_of(t.v[i]));
    std::lock_guard<std::mutex> lk(mu_);
    auto& c = cache_[k];
    while (c.stage <= stage)
      if (!grow_locked(k, c)) break;
    auto it = c.index.find(t);
    if (it == c.index.end()) throw DomainMismatch("not an implication term");
    return it->second;
  }
  std::size_t arity(const Term& t) const override { return restrict_count(t.v.at(0)); }
  std::optional<std::size_t> max_arity() const override { return a_.size(); }

  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    std::size_t n1 = s.v.at(0), n2 = t.v.at(0);
    std::vector<Code> d1 = domain(n1), d2 = domain(n2);
    auto pos = [&](const std::vector<Code>& d, Code c) {
      return std::find(d.begin(), d.end(), c) - d.begin();
    };
    std::size_t m = std::min(n1, n2);
    for (std::size_t i = 0; i < m; ++i) {
      if (s.v[i + 1] != t.v[i + 1]) return cmp3(s.v[i + 1], t.v[i + 1]);
      if (a_.contains(i)) {
        auto r1 = p.left.at(pos(d1, i)), r2 = p.right.at(pos(d2, i));
        if (r1 != r2) return cmp3(r1, r2);
      }
    }
    return cmp3(n2, n1);
  }
  std::string expr() const override { return "impl(" + a_.expr() + "," + b_.expr() + ")"; }
  std::string term_string(const Term& t) const override {
    std::string s = "<" + std::to_string(t.v.at(0)) + ";";
    for (std::size_t i = 1; i < t.v.size(); ++i) s += (i > 1 ? "," : "") + std::to_string(t.v[i]);
    return s + ">";
  }
  LinearOrder evaluate(const LinearOrder& x) const override {
    return LinearOrder(std::make_shared<ImplOrder>(shared_from_this(), x));
  }

  // The node <n, f, g> as a denotation; g lists images along a|n ascending.
  Denotation node(const std::vector<Code>& f, const std::map<Code, Code>& g, const LinearOrder& x) const {
    Term t;
    t.v.push_back(static_cast<std::int64_t>(f.size()));
    for (Code c : f) t.v.push_back(static_cast<std::int64_t>(c));
    Denotation d{t, {}};
    for (Code c : domain(f.size())) d.args.push_back(g.at(c));
    (void)x;
    return d;
  }

  // Branch of length len: the first len elements of a known descent of b
  // (or of b itself, sorted descending) and an embedding of a|len into x.
  DenChain branch(const LinearOrder& x, std::size_t depth, Budget& budget, bool require_descent) const {
    DenChain out;
    out.method = "branch search";
    if (depth == 0) {
      out.status = Search::Found;
      return out;
    }
    std::size_t len = depth - 1;
    std::vector<Code> f;
    if (b_.has_descent()) {
      for (std::size_t i = 0; i < len; ++i) f.push_back(b_.descent(i));
    } else {
      if (require_descent) return {Search::Exhausted, {}, "no known descent in b"};
      if (b_.size() && *b_.size() < len) return {Search::None, {}, "b too small"};
      f = b_.prefix(len);
      std::sort(f.begin(), f.end(), [&](Code p, Code q) { return b_.less(q, p); });
    }
    // Extend the branch one level at a time; level n assigns g(n) when n is
    // a code of a. Exhaustive for finite x, deepening over x otherwise.
    std::map<Code, Code> g;
    bool cut = false;
    std::function<bool(std::size_t, std::size_t)> extend = [&](std::size_t n, std::size_t bound) -> bool {
      if (n == len) return true;
      if (!a_.contains(n)) return extend(n + 1, bound);
      for (std::size_t i = 0; i < bound; ++i) {
        if (!budget.spend()) {
          cut = true;
          return false;
        }
        Code y = x.element(i);
        bool ok = true;
        for (auto& [c, gc] : g)
          if (a_.compare(c, n) != x.compare(gc, y)) {
            ok = false;
            break;
          }
        if (!ok) continue;
        g[n] = y;
        if (extend(n + 1, bound)) return true;
        g.erase(n);
        if (cut) return false;
      }
      return false;
    };
    bool found = false;
    if (x.finite()) {
      found = extend(0, *x.size());
    } else {
      for (std::size_t bound = 1; !found && !cut && bound <= len + 1; ++bound) {
        g.clear();
        found = extend(0, bound);
      }
    }
    if (!found) return {cut ? Search::Exhausted : Search::None, {}, "branch search"};
    for (std::size_t n = 0; n <= len; ++n) {
      std::vector<Code> fn(f.begin(), f.begin() + n);
      out.chain.push_back(node(fn, g, x));
    }
    out.status = Search::Found;
    return out;
  }

  // Ill-founded at x iff b is illfounded and a embeds into x.
  DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const override {
    if (auto t = b_.type()) return {Search::None, {}, "b is a wellorder of type " + to_string(*t)};
    if (!b_.has_descent()) {
      DenChain c = as_evaluated(evaluate(x)).find_den_chain(depth, budget);
      c.method = "bounded branch search";
      if (c.status == Search::None) c.status = Search::Exhausted;
      return c;
    }
    if (auto u = typed_embedding(a_, x)) {
      std::map<Code, Code> g;
      for (Code c : domain(depth)) g[c] = (*u)(c);
      DenChain out{Search::Found, {}, "embedding by type"};
      std::vector<Code> f;
      for (std::size_t n = 0; n < depth; ++n) {
        out.chain.push_back(node(f, g, x));
        f.push_back(b_.descent(n));
      }
      return out;
    }
    if (a_.type() && x.type()) return {Search::None, {}, "a does not embed into x by type"};
    if (a_.finite()) {
      EmbeddingResult e = find_embedding(a_, x, budget.limit > budget.used ? budget.limit - budget.used : 0);
      budget.spend(1);
      if (e.status == Search::Found) {
        DenChain c = branch(x, depth, budget, true);
        c.method = "embedding of a";
        return c;
      }
      return {e.status, {}, "a does not embed into x"};
    }
    DenChain c = branch(x, depth, budget, true);
    if (c.status == Search::None) c.status = Search::Exhausted;
    return c;
  }

  const LinearOrder& left() const { return a_; }
  const LinearOrder& right() const { return b_; }

 private:
  static std::size_t binom(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  struct Cache {
    std::vector<Term> terms;
    std::map<Term, std::size_t> index;
    std::size_t stage = 0;
  };

  // Stage s adds the terms (n, f) with max(n, largest b-index in f) = s.
  bool grow_locked(std::size_t k, Cache& c) const {
    auto r = lengths(k);
    if (!r) return false;
    auto [lo, hi] = *r;
    auto nb = b_.size();
    std::size_t s = c.stage;
    std::size_t limit = hi ? *hi : SIZE_MAX;
    if (nb) limit = std::min(limit, *nb);
    std::size_t last = nb ? std::max(limit, *nb) : SIZE_MAX;
    if (s > last) return false;
    ++c.stage;
    std::size_t blim = nb ? std::min(*nb, s + 1) : s + 1;
    std::vector<Code> f;
    std::function<void(std::size_t)> rec = [&](std::size_t maxi) {
      std::size_t n = f.size();
      if (n >= lo && n <= limit && std::max(n, maxi) == s && (n > 0 || s == 0)) {
        Term t;
        t.v.push_back(static_cast<std::int64_t>(n));
        for (Code x : f) t.v.push_back(static_cast<std::int64_t>(x));
        if (c.index.emplace(t, c.terms.size()).second) c.terms.push_back(t);
      }
      if (n >= limit || n >= s) return;
      for (std::size_t j = 0; j < blim; ++j) {
        Code y = b_.element(j);
        if (n && !b_.less(y, f.back())) continue;
        f.push_back(y);
        rec(std::max(maxi, j));
        f.pop_back();
      }
    };
    rec(0);
    if (s == 0 && lo == 0) {
      Term t;
      t.v.push_back(0);
      if (c.index.emplace(t, c.terms.size()).second) c.terms.push_back(t);
    }
    return true;
  }

  LinearOrder a_, b_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, Cache> cache_;
};

inline DenChain ImplOrder::find_den_chain(std::size_t depth, Budget& budget) const {
  const auto& sys = static_cast<const ImplSystem&>(system().impl());
  return sys.branch(arg_order(), depth, budget, false);
}

// Embedding e: b -> D_{a->b}(a) on the first n elements of b, followed by
// <n,f,0> -> <n,f,u|n> with u the identity of a.
inline std::vector<Denotation> embed_into_implication(const DenotationSystem& impl, std::size_t n) {
  const auto* s = dynamic_cast<const ImplSystem*>(&impl.impl());
  if (!s) throw DomainMismatch("embed_into_implication needs an implication system");
  const LinearOrder& a = s->left();
  std::vector<Denotation> out;
  std::map<Code, Code> u;
  for (const auto& f : descent_embedding(s->right(), n)) {
    for (Code c : s->domain(f.size())) u[c] = c;
    out.push_back(s->node(f, u, a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition D o F: evaluation nests, D(F(x)); the terms of arity k are the
// D-denotations over F(k) whose F-arguments cover k.

class ComposeSystem : public SystemImpl {
 public:
  ComposeSystem(DenotationSystem d, DenotationSystem f) : d_(std::move(d)), f_(std::move(f)) {}

  std::optional<std::size_t> num_terms(std::size_t k) const override {
    if (k > 0 && (d_->max_arity() == std::optional<std::size_t>(0) || f_->max_arity() == std::optional<std::size_t>(0)))
      return 0;
    LinearOrder dfk = nested(fin_order(k));
    if (!dfk.finite()) return std::nullopt;
    std::size_t n = 0;
    for (std::size_t i = 0; i < *dfk.size(); ++i) n += covering(dfk, i, k).has_value();
    return n;
  }
  Term term(std::size_t k, std::size_t i) const override {
    LinearOrder dfk = nested(fin_order(k));
    std::size_t seen = 0;
    for (std::size_t j = 0; !dfk.size() || j < *dfk.size(); ++j) {
      if (j > 200000) throw BudgetExhausted("composite term search");
      if (auto t = covering(dfk, j, k)) {
        if (seen++ == i) return *t;
      }
    }
    throw Error("composite term index out of range");
  }
  std::size_t arity(const Term& t) const override { return t.v.at(0); }
  std::optional<std::size_t> max_arity() const override {
    auto a = d_->max_arity(), b = f_->max_arity();
    if (!a || !b) return std::nullopt;
    return *a * *b;
  }
  // F-denotations are compared on the merged positions, then D compares the
  // two lists of F-denotations by their induced pattern.
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    auto lift = [&](const Term& u, const std::vector<std::uint32_t>& ranks) {
      std::vector<Denotation> fs;
      std::size_t at = 1;
      for (std::size_t j = 1; j < u.sub.size(); ++j) {
        std::size_t m = u.v.at(at++);
        Denotation fd{u.sub[j], {}};
        for (std::size_t q = 0; q < m; ++q) fd.args.push_back(ranks.at(u.v.at(at++)));
        fs.push_back(fd);
      }
      return fs;
    };
    std::vector<Denotation> a = lift(s, p.left), b = lift(t, p.right);
    LinearOrder w = fin_order(p.width());
    auto fcmp = [&](const Denotation& x, const Denotation& y) {
      return f_->pattern_compare(x.term, y.term, pattern_of(w, x.args, y.args));
    };
    std::function<bool(std::size_t, std::size_t)> lr = [&](std::size_t i, std::size_t j) {
      return fcmp(a[i], b[j]) == Cmp::LT;
    };
    std::function<bool(std::size_t, std::size_t)> rl = [&](std::size_t j, std::size_t i) {
      return fcmp(b[j], a[i]) == Cmp::LT;
    };
    MergePattern q = merge_pattern(a.size(), b.size(), lr, rl);
    return d_->pattern_compare(s.sub.at(0), t.sub.at(0), q);
  }
  std::string expr() const override { return "comp(" + d_->expr() + "," + f_->expr() + ")"; }
  std::string term_string(const Term& t) const override {
    std::string s = d_->term_string(t.sub.at(0)) + "[";
    std::size_t at = 1;
    for (std::size_t j = 1; j < t.sub.size(); ++j) {
      std::size_t m = t.v.at(at++);
      s += (j > 1 ? "," : "") + f_->term_string(t.sub[j]) + "(";
      for (std::size_t q = 0; q < m; ++q) s += (q ? "," : "") + std::string("p") + std::to_string(t.v.at(at++));
      s += ")";
    }
    return s + "]";
  }
  LinearOrder evaluate(const LinearOrder& x) const override { return nested(x); }
  Denotation map(const Denotation& d, const CodeMap& f, const LinearOrder& x, const LinearOrder& y) const override {
    LinearOrder fx = f_->evaluate(x), fy = f_->evaluate(y);
    const auto& ex = as_evaluated(fx);
    const auto& ey = as_evaluated(fy);
    CodeMap g = [&](Code c) { return ey.code_of(f_->map(ex.denotation(c), f, x, y)); };
    return d_->map(d, g, fx, fy);
  }
  std::optional<Cnf> type_at(const LinearOrder& x) const override { return d_->type_at(f_->evaluate(x)); }
  std::optional<Cnf> value(const Denotation& d, const LinearOrder& x) const override {
    return d_->value(d, f_->evaluate(x));
  }
  std::optional<Denotation> unvalue(const Cnf& a, const LinearOrder& x) const override {
    return d_->unvalue(a, f_->evaluate(x));
  }
  DenChain probe(const LinearOrder& x, std::size_t depth, Budget& budget) const override {
    DenChain c = d_->probe(f_->evaluate(x), depth, budget);
    c.method = "outer at F(x): " + c.method;
    return c;
  }

  // Nested view of an element of (D o F)(x): the D-term with its F-denotations.
  std::pair<Term, std::vector<Denotation>> unnest(const Denotation& d, const LinearOrder& x) const {
    LinearOrder fx = f_->evaluate(x);
    std::vector<Denotation> fs;
    for (Code c : d.args) fs.push_back(as_evaluated(fx).denotation(c));
    return {d.term, fs};
  }
  const DenotationSystem& outer() const { return d_; }
  const DenotationSystem& inner() const { return f_; }

 private:
  LinearOrder nested(const LinearOrder& x) const { return d_->evaluate(f_->evaluate(x)); }

  std::optional<Term> covering(const LinearOrder& dfk, std::size_t j, std::size_t k) const {
    const auto& e = as_evaluated(dfk);
    Denotation dd = e.denotation(e.element(j));
    const auto& fk = as_evaluated(e.arg_order());
    Term t;
    t.v.push_back(static_cast<std::int64_t>(k));
    t.sub.push_back(dd.term);
    std::vector<bool> used(k, false);
    for (Code c : dd.args) {
      Denotation fd = fk.denotation(c);
      t.sub.push_back(fd.term);
      t.v.push_back(static_cast<std::int64_t>(fd.args.size()));
      for (Code a : fd.args) {
        t.v.push_back(static_cast<std::int64_t>(a));
        used.at(a) = true;
      }
    }
    if (!std::all_of(used.begin(), used.end(), [](bool b) { return b; })) return std::nullopt;
    return t;
  }

  DenotationSystem d_, f_;
};

// ---------------------------------------------------------------------------
// Explicit finite system: named terms with arities and a pattern table.

class TableSystem : public SystemImpl {
 public:
  struct Entry {
    std::string left, right;
    MergePattern pattern;
    Cmp cmp;
  };
  TableSystem(std::vector<std::pair<std::string, std::size_t>> terms, std::vector<Entry> table, std::string label)
      : terms_(std::move(terms)), label_(std::move(label)) {
    for (std::size_t i = 0; i < terms_.size(); ++i) ids_[terms_[i].first] = i;
    for (auto& e : table) {
      if (!ids_.count(e.left) || !ids_.count(e.right)) throw Error("pattern table names an unknown term");
      table_[{ids_[e.left], ids_[e.right], e.pattern}] = e.cmp;
    }
  }
  std::optional<std::size_t> num_terms(std::size_t k) const override {
    std::size_t n = 0;
    for (auto& t : terms_) n += t.second == k;
    return n;
  }
  Term term(std::size_t k, std::size_t i) const override {
    for (std::size_t j = 0; j < terms_.size(); ++j)
      if (terms_[j].second == k && i-- == 0) return Term{{static_cast<std::int64_t>(j)}, {}, {}};
    throw Error("table term index out of range");
  }
  std::size_t arity(const Term& t) const override { return terms_.at(t.v.at(0)).second; }
  std::optional<std::size_t> max_arity() const override {
    std::size_t m = 0;
    for (auto& t : terms_) m = std::max(m, t.second);
    return m;
  }
  Cmp pattern_compare(const Term& s, const Term& t, const MergePattern& p) const override {
    auto it = table_.find({static_cast<std::size_t>(s.v.at(0)), static_cast<std::size_t>(t.v.at(0)), p});
    if (it == table_.end())
      throw PatternInconsistency("pattern table has no entry for " + terms_[s.v[0]].first + " vs " +
                                 terms_[t.v[0]].first + " under " + to_string(p));
    return it->second;
  }
  std::string expr() const override { return label_; }
  std::string term_string(const Term& t) const override { return terms_.at(t.v.at(0)).first; }

 private:
  std::vector<std::pair<std::string, std::size_t>> terms_;
  std::map<std::string, std::size_t> ids_;
  std::map<std::tuple<std::size_t, std::size_t, MergePattern>, Cmp> table_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Constructors.

inline DenotationSystem id_system() { return DenotationSystem(std::make_shared<IdSystem>()); }
inline DenotationSystem constant(const LinearOrder& a) { return DenotationSystem(std::make_shared<ConstSystem>(a)); }
inline DenotationSystem exp_omega() { return DenotationSystem(std::make_shared<ExpOmegaSystem>()); }
inline DenotationSystem implication_dilator(const LinearOrder& a, const LinearOrder& b) {
  return DenotationSystem(std::make_shared<ImplSystem>(a, b));
}
inline DenotationSystem sum_systems(const DenotationSystem& d, const DenotationSystem& e) {
  return DenotationSystem(std::make_shared<SumSystem>(std::vector<DenotationSystem>{d, e},
                                                      "sum(" + d.expr() + "," + e.expr() + ")"));
}
// Finite prefix sum_{i<k} D_i of a stream.
inline DenotationSystem omega_sum(const std::vector<DenotationSystem>& stream, std::size_t k,
                                  std::string label = "") {
  if (k > stream.size()) throw StreamExhausted("stream has fewer than " + std::to_string(k) + " entries");
  std::vector<DenotationSystem> parts(stream.begin(), stream.begin() + k);
  if (label.empty()) {
    label = "osum[";
    for (std::size_t i = 0; i < k; ++i) label += (i ? ";" : "") + parts[i].expr();
    label += "]";
  }
  return DenotationSystem(std::make_shared<SumSystem>(std::move(parts), std::move(label)));
}
inline DenotationSystem recursive_copy(const std::vector<std::pair<DenotationSystem, std::string>>& stream,
                                       std::string label = "") {
  std::vector<DenotationSystem> parts;
  std::vector<std::string> certs;
  for (auto& [d, p] : stream) {
    parts.push_back(d);
    certs.push_back(p);
  }
  if (label.empty()) {
    label = "rcopy[";
    for (std::size_t i = 0; i < parts.size(); ++i) label += (i ? ";" : "") + parts[i].expr();
    label += "]";
  }
  return DenotationSystem(std::make_shared<SumSystem>(std::move(parts), std::move(label), std::move(certs)));
}
inline DenotationSystem compose(const DenotationSystem& d, const DenotationSystem& f) {
  return DenotationSystem(std::make_shared<ComposeSystem>(d, f));
}

// ---------------------------------------------------------------------------
// Law checking.

struct LawReport {
  bool ok = true;
  std::string failure;  // empty when ok
  std::optional<MergePattern> pattern;
  std::size_t levels_checked = 0, pairs_checked = 0, embeddings_checked = 0;
};

// All strictly increasing maps n -> m.
inline std::vector<std::vector<Code>> embeddings(std::size_t n, std::size_t m) {
  std::vector<std::vector<Code>> out;
  std::vector<Code> f;
  std::function<void(Code)> rec = [&](Code from) {
    if (f.size() == n) {
      out.push_back(f);
      return;
    }
    for (Code c = from; c < m; ++c) {
      f.push_back(c);
      rec(c + 1);
      f.pop_back();
    }
  };
  rec(0);
  return out;
}

inline std::vector<Denotation> level_prefix(const LinearOrder& level, std::size_t cap) {
  const auto& e = as_evaluated(level);
  std::vector<Denotation> out;
  std::size_t n = level.size() ? std::min(*level.size(), cap) : cap;
  for (std::size_t i = 0; i < n; ++i) out.push_back(e.denotation(i));
  return out;
}

// Level orders D(n) are checked on their first `cap` elements.
inline LawReport check_predilator(const DenotationSystem& d, std::size_t n_max, std::size_t cap = 20) {
  LawReport rep;
  // composites evaluate as nested orders, so print with the level's own system
  DenotationSystem shown = d;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.failure = std::move(msg);
    return rep;
  };
  std::vector<LinearOrder> levels;
  std::vector<std::vector<Denotation>> pre;
  try {
    for (std::size_t n = 0; n <= n_max; ++n) {
      levels.push_back(d->evaluate(fin_order(n)));
      pre.push_back(level_prefix(levels.back(), cap));
    }
    shown = as_evaluated(levels[0]).system();
    for (std::size_t n = 0; n <= n_max; ++n) {
      const auto& e = as_evaluated(levels[n]);
      const auto& p = pre[n];
      LinearOrder x = fin_order(n);
      std::vector<std::vector<Cmp>> c(p.size(), std::vector<Cmp>(p.size()));
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
          try {
            c[i][j] = e.compare_den(p[i], p[j]);
          } catch (const PatternInconsistency& ex) {
            rep.pattern = pattern_of(x, p[i].args, p[j].args);
            return fail("D(" + std::to_string(n) + ") " + ex.what());
          }
          ++rep.pairs_checked;
        }
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
          if (c[i][j] != flip(c[j][i])) {
            rep.pattern = pattern_of(x, p[i].args, p[j].args);
            return fail("D(" + std::to_string(n) + ") not antisymmetric on " + den_string(shown, p[i]) + ", " +
                        den_string(shown, p[j]) + " under pattern " + to_string(*rep.pattern));
          }
          if ((c[i][j] == Cmp::EQ) != (i == j))
            return fail("D(" + std::to_string(n) + ") identifies distinct denotations");
        }
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
          if (c[i][j] != Cmp::LT) continue;
          for (std::size_t k = 0; k < p.size(); ++k)
            if (c[j][k] == Cmp::LT && c[i][k] != Cmp::LT)
              return fail("D(" + std::to_string(n) + ") not transitive at " + den_string(shown, p[i]) + " < " +
                          den_string(shown, p[j]) + " < " + den_string(shown, p[k]));
        }
      ++rep.levels_checked;
    }
    for (std::size_t n = 0; n <= n_max; ++n) {
      for (const auto& den : pre[n])
        if (map(d, den, embeddings(n, n)[0], n) != den)
          return fail("D(id) is not the identity at " + den_string(shown, den));
      for (std::size_t m = n; m <= n_max; ++m) {
        const auto& em = as_evaluated(levels[m]);
        for (const auto& f : embeddings(n, m)) {
          ++rep.embeddings_checked;
          std::vector<Denotation> img;
          for (const auto& den : pre[n]) {
            Denotation y = map(d, den, f, m);
            if (!em.well_formed(y)) return fail("D(f) leaves D(" + std::to_string(m) + ") at " + den_string(shown, den));
            img.push_back(y);
          }
          const auto& e = as_evaluated(levels[n]);
          for (std::size_t i = 0; i < img.size(); ++i)
            for (std::size_t j = 0; j < img.size(); ++j)
              if (e.compare_den(pre[n][i], pre[n][j]) != em.compare_den(img[i], img[j]))
                return fail("D(f) not order-preserving on " + den_string(shown, pre[n][i]) + ", " +
                            den_string(shown, pre[n][j]));
          for (std::size_t k = m; k <= n_max; ++k)
            for (const auto& g : embeddings(m, k)) {
              std::vector<Code> gf;
              for (Code c : f) gf.push_back(g[c]);
              for (std::size_t i = 0; i < img.size(); ++i)
                if (map(d, img[i], g, k) != map(d, pre[n][i], gf, k))
                  return fail("D(g o f) != D(g) o D(f) at " + den_string(shown, pre[n][i]));
            }
        }
      }
    }
  } catch (const Error& ex) {
    return fail(std::string("error: ") + ex.what());
  }
  return rep;
}

// Finite-level approximation of a natural transformation D => E.
struct NatTransApprox {
  DenotationSystem source, target;
  std::function<Denotation(const Denotation&, std::size_t)> level;
};

inline LawReport check_natural(const NatTransApprox& eta, std::size_t n_max, std::size_t cap = 20) {
  LawReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.failure = std::move(msg);
    return rep;
  };
  try {
    for (std::size_t n = 0; n <= n_max; ++n) {
      LinearOrder dn = eta.source->evaluate(fin_order(n)), en = eta.target->evaluate(fin_order(n));
      const auto& ed = as_evaluated(dn);
      const auto& ee = as_evaluated(en);
      auto p = level_prefix(dn, cap);
      std::vector<Denotation> img;
      for (const auto& x : p) {
        Denotation y = eta.level(x, n);
        if (!ee.well_formed(y)) return fail("eta_" + std::to_string(n) + " leaves E(n)");
        img.push_back(y);
      }
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
          ++rep.pairs_checked;
          if (ed.compare_den(p[i], p[j]) != ee.compare_den(img[i], img[j]))
            return fail("eta_" + std::to_string(n) + " not order-preserving on " + den_string(eta.source, p[i]) +
                        ", " + den_string(eta.source, p[j]));
        }
      for (std::size_t m = n; m <= n_max; ++m)
        for (const auto& f : embeddings(n, m)) {
          ++rep.embeddings_checked;
          for (std::size_t i = 0; i < p.size(); ++i) {
            Denotation lhs = eta.level(map(eta.source, p[i], f, m), m);
            Denotation rhs = map(eta.target, img[i], f, m);
            if (lhs != rhs) {
              std::string fs;
              for (Code c : f) fs += (fs.empty() ? "" : ",") + std::to_string(c);
              return fail("naturality square fails for f=[" + fs + "] : " + std::to_string(n) + "->" +
                          std::to_string(m) + " at " + den_string(eta.source, p[i]));
            }
          }
        }
      ++rep.levels_checked;
    }
  } catch (const Error& ex) {
    return fail(std::string("error: ") + ex.what());
  }
  return rep;
}

// Inclusion of summand j into a sum system.
inline NatTransApprox summand_inclusion(const DenotationSystem& sum, std::size_t j) {
  const auto* s = dynamic_cast<const SumSystem*>(&sum.impl());
  if (!s) throw DomainMismatch("summand_inclusion needs a sum system");
  return {s->parts().at(j), sum, [s, j](const Denotation& d, std::size_t) { return s->inject(j, d); }};
}

}  // namespace ptyx
