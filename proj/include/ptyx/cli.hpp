#pragma once

#include <CLI11.hpp>
#include <iostream>
#include <random>

#include "io.hpp"

namespace ptyx::cli {

using io::json;

enum Exit { kOk = 0, kVerify = 1, kUsage = 2, kBudget = 3 };

struct RunConfig {
  std::string format = "text";
  std::uint64_t budget_nodes = 200000;
  std::optional<std::size_t> budget_depth;
  std::uint64_t seed = 1;
  std::string grid;
  std::vector<std::string> rels;

  std::size_t depth_or(std::size_t d) const { return budget_depth.value_or(d); }
};

// Arguments of every subcommand; unused fields stay at their defaults.
struct Args {
  std::string order, tree, x, y, from, into, left, right, dilator, outer, inner, a, b, stream, formula, embedding,
      alpha;
  std::size_t list = 10, random = 0, depth = 0, n_max = 4, cap = 20, level = 0, index = 0, stage = 0, k = 0, e = 0;
  std::optional<std::size_t> target, to;
  Code cx = 0, cy = 0;
};

struct Report {
  json j = json::object();
  std::vector<std::string> text;
  std::string dot;
  int code = kOk;

  void line(std::string s) { text.push_back(std::move(s)); }
};

class Usage : public Error {
 public:
  using Error::Error;
};

inline std::string cmp_symbol(Cmp c) { return c == Cmp::LT ? "<" : c == Cmp::EQ ? "=" : ">"; }

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline std::string codes_string(const std::vector<Code>& v) {
  std::vector<std::string> s;
  for (Code c : v) s.push_back(std::to_string(c));
  return "[" + join(s, ",") + "]";
}

struct Runner {
  RunConfig cfg;
  Args args;
  io::ParseContext ctx;

  LinearOrder order(const std::string& s, const char* flag) const {
    if (s.empty()) throw Usage(std::string("missing ") + flag);
    return io::parse_order(s, ctx);
  }
  DenotationSystem dilator(const std::string& s, const char* flag) const {
    if (s.empty()) throw Usage(std::string("missing ") + flag);
    return io::parse_dilator(s, ctx);
  }
  beta::Formula formula() const {
    if (args.formula.empty()) throw Usage("missing --formula");
    return beta::parse_formula(args.formula, ctx.sig);
  }
  TheoryStream stream() const {
    if (args.stream.empty()) throw Usage("missing --stream");
    return io::load_stream(args.stream);
  }
  std::vector<Cnf> grid() const {
    if (cfg.grid.empty()) throw Usage("missing --grid");
    return io::parse_grid(cfg.grid);
  }
  ProbeOptions probe_options() const { return {cfg.budget_nodes, cfg.depth_or(8)}; }

  void listing(Report& r, const LinearOrder& o, std::size_t n) const {
    r.j["elements"] = json::array();
    std::vector<std::string> shown;
    for (Code c : o.prefix(n)) {
      r.j["elements"].push_back(io::element_json(o, c));
      shown.push_back(io::element_string(o, c));
    }
    r.line("first " + std::to_string(shown.size()) + " enumerated: " + join(shown, " "));
  }

  void describe(Report& r, const LinearOrder& o) const {
    r.j["order"] = o.expr();
    r.j["size"] = o.size() ? json(*o.size()) : json(nullptr);
    r.j["type"] = o.type() ? json(to_string(*o.type())) : json(nullptr);
    r.j["has_descent"] = o.has_descent();
    r.line("order: " + o.expr());
    r.line("size: " + (o.size() ? std::to_string(*o.size()) : std::string("infinite")));
    if (o.type()) r.line("type: " + to_string(*o.type()));
  }

  void law(Report& r, const DenotationSystem& d, const char* key = "laws") const {
    LawReport lr = check_predilator(d, args.n_max, args.cap);
    r.j[key] = io::to_json(lr);
    r.line(std::string(key) + ": " + (lr.ok ? "pass" : "FAIL " + lr.failure) + " (levels " +
           std::to_string(lr.levels_checked) + ", pairs " + std::to_string(lr.pairs_checked) + ", embeddings " +
           std::to_string(lr.embeddings_checked) + ")");
    if (!lr.ok) r.code = kVerify;
  }

  void eval_if_order(Report& r, const DenotationSystem& d) const {
    if (args.order.empty()) return;
    LinearOrder x = order(args.order, "--order");
    LinearOrder e = d->evaluate(x);
    r.j["at"] = x.expr();
    r.j["value_type"] = e.type() ? json(to_string(*e.type())) : json(nullptr);
    r.j["value_size"] = e.size() ? json(*e.size()) : json(nullptr);
    r.line("at " + x.expr() + ": size " + (e.size() ? std::to_string(*e.size()) : std::string("infinite")) +
           (e.type() ? ", type " + to_string(*e.type()) : std::string()));
    listing(r, e, args.list);
  }

  // -------------------------------------------------------------------------
  // ord

  Report ord_eval() const {
    Report r;
    LinearOrder o = order(args.order, "--order");
    describe(r, o);
    listing(r, o, args.list);
    if (o.finite()) {
      r.j["ascending"] = json::array();
      std::vector<std::string> s;
      for (Code c : o.ascending()) {
        r.j["ascending"].push_back(c);
        s.push_back(io::element_string(o, c));
      }
      r.line("ascending: " + join(s, " < "));
    }
    return r;
  }

  Tree random_tree(std::size_t n) const {
    std::mt19937_64 rng(cfg.seed);
    std::vector<Node> nodes{Node{}};
    std::map<Node, std::uint64_t> kids;
    while (nodes.size() < n) {
      Node p = nodes[std::uniform_int_distribution<std::size_t>(0, nodes.size() - 1)(rng)];
      p.push_back(kids[p]++);
      nodes.push_back(p);
    }
    return Tree(nodes);
  }

  Report ord_kb() const {
    Report r;
    if (args.tree.empty() == (args.random == 0)) throw Usage("give exactly one of --tree and --random");
    Tree t = args.random ? random_tree(args.random) : io::tree_from_json(io::json_arg(args.tree));
    LinearOrder o = kb_order(t);
    const auto& kb = static_cast<const KbOrder&>(o.impl());
    r.j["tree"] = io::to_json(t);
    r.j["order"] = o.expr();
    r.j["nodes"] = t.size();
    r.j["height"] = t.height();
    r.j["wellfounded"] = true;
    r.j["ascending"] = json::array();
    std::vector<std::string> s;
    auto asc = o.ascending();
    for (std::size_t i = 0; i < asc.size() && i < args.list; ++i) {
      r.j["ascending"].push_back(kb.node(asc[i]));
      s.push_back(node_string(kb.node(asc[i])));
    }
    r.line("tree: " + io::to_json(t).dump());
    r.line("nodes: " + std::to_string(t.size()) + ", height " + std::to_string(t.height()));
    r.line("KB ascending: " + join(s, " < "));
    r.dot = io::to_dot(t);
    return r;
  }

  Report ord_compare() const {
    Report r;
    LinearOrder o = order(args.order, "--order");
    if (!o.contains(args.cx)) throw Usage("--x " + std::to_string(args.cx) + " is not an element of " + o.expr());
    if (!o.contains(args.cy)) throw Usage("--y " + std::to_string(args.cy) + " is not an element of " + o.expr());
    Cmp c = o.compare(args.cx, args.cy);
    r.j["order"] = o.expr();
    r.j["x"] = io::element_json(o, args.cx);
    r.j["y"] = io::element_json(o, args.cy);
    r.j["cmp"] = cmp_symbol(c);
    r.line(io::element_string(o, args.cx) + " " + cmp_symbol(c) + " " + io::element_string(o, args.cy));
    return r;
  }

  Report ord_chain() const {
    Report r;
    LinearOrder o = order(args.order, "--order");
    std::size_t depth = args.depth ? args.depth : cfg.depth_or(8);
    Budget b(cfg.budget_nodes);
    ChainResult c = o.find_chain(depth, b);
    if (c.status == Search::Found && !is_descending(o, c.chain)) throw Error("chain search returned a non-descending chain");
    r.j = io::to_json(c, o);
    r.j["order"] = o.expr();
    r.j["depth"] = depth;
    std::vector<std::string> s;
    for (Code x : c.chain) s.push_back(io::element_string(o, x));
    r.line("descending chain of length " + std::to_string(depth) + ": " + to_string(c.status));
    if (!s.empty()) r.line(join(s, " > "));
    if (c.status == Search::Exhausted) r.code = kBudget;
    return r;
  }

  Report ord_embed() const {
    Report r;
    LinearOrder a = order(args.from, "--from"), x = order(args.into, "--into");
    EmbeddingResult e = find_embedding(a, x, cfg.budget_nodes);
    r.j["from"] = a.expr();
    r.j["into"] = x.expr();
    r.j["status"] = to_string(e.status);
    r.j["map"] = json::array();
    r.line("embedding " + a.expr() + " -> " + x.expr() + ": " + to_string(e.status));
    if (e.embedding) {
      std::vector<std::string> s;
      for (auto& [p, q] : e.embedding->map) {
        r.j["map"].push_back({p, q});
        s.push_back(io::element_string(a, p) + "->" + io::element_string(x, q));
      }
      bool ok = e.embedding->order_preserving();
      r.j["order_preserving"] = ok;
      r.line(join(s, " "));
      if (!ok) r.code = kVerify;
    }
    if (e.status == Search::Exhausted) r.code = kBudget;
    return r;
  }

  Report ord_disj() const {
    Report r;
    LinearOrder a = order(args.left, "--left"), b = order(args.right, "--right");
    LinearOrder d = disj_order(a, b);
    const auto& dj = static_cast<const DisjOrder&>(d.impl());
    describe(r, d);
    listing(r, d, args.list);
    auto side = [&](const char* key, const LinearOrder& src, std::vector<Node> img) {
      std::vector<Code> codes;
      json arr = json::array();
      for (auto& n : img) {
        codes.push_back(dj.code_of(n));
        arr.push_back(n);
      }
      bool ok = true;
      auto pre = src.prefix(codes.size());
      for (std::size_t i = 0; i < codes.size(); ++i)
        for (std::size_t j = 0; j < codes.size(); ++j)
          if (src.compare(pre[i], pre[j]) != d.compare(codes[i], codes[j])) ok = false;
      r.j[key] = {{"images", arr}, {"order_preserving", ok}};
      r.line(std::string(key) + ": " + std::to_string(img.size()) + " elements, " +
             (ok ? "order-preserving" : "NOT order-preserving"));
      if (!ok) r.code = kVerify;
    };
    if (b.has_descent()) side("embed_left", a, disj_embed_left(dj, args.list));
    if (a.has_descent()) side("embed_right", b, disj_embed_right(dj, args.list));
    return r;
  }

  // -------------------------------------------------------------------------
  // dil

  Report dil_eval() const {
    Report r;
    DenotationSystem d = dilator(args.dilator, "--dilator");
    r.j["dilator"] = d.expr();
    r.line("dilator: " + d.expr());
    if (args.order.empty()) throw Usage("missing --order");
    eval_if_order(r, d);
    return r;
  }

  Report dil_check() const {
    Report r;
    DenotationSystem d = dilator(args.dilator, "--dilator");
    r.j["dilator"] = d.expr();
    r.j["n_max"] = args.n_max;
    r.line("dilator: " + d.expr());
    law(r, d);
    return r;
  }

  Report dil_map() const {
    Report r;
    DenotationSystem d = dilator(args.dilator, "--dilator");
    std::vector<Code> f = io::parse_codes(args.embedding, "embedding");
    if (f.size() != args.level) throw Usage("--embedding must list " + std::to_string(args.level) + " values");
    for (std::size_t i = 1; i < f.size(); ++i)
      if (f[i] <= f[i - 1]) throw Usage("--embedding must be strictly increasing");
    std::size_t m = args.target ? *args.target : (f.empty() ? 0 : f.back() + 1);
    if (!f.empty() && f.back() >= m) throw Usage("--embedding leaves the target level");
    LinearOrder dn = d->evaluate(fin_order(args.level));
    if (dn.size() && args.index >= *dn.size()) throw Usage("--index out of range for D(" + std::to_string(args.level) + ")");
    Denotation x = as_evaluated(dn).denotation(dn.element(args.index));
    Denotation y = map(d, x, f, m);
    LinearOrder dm = d->evaluate(fin_order(m));
    if (!as_evaluated(dm).well_formed(y)) throw Error("image is not a denotation of D(m)");
    r.j["dilator"] = d.expr();
    r.j["embedding"] = f;
    r.j["source_level"] = args.level;
    r.j["target_level"] = m;
    r.j["source"] = io::den_json(d, x);
    r.j["image"] = io::den_json(d, y);
    r.line(den_string(d, x) + " |-> " + den_string(d, y) + " along " + codes_string(f) + " : " +
           std::to_string(args.level) + " -> " + std::to_string(m));
    return r;
  }

  Report dil_built(const DenotationSystem& d) const {
    Report r;
    r.j["dilator"] = d.expr();
    r.line("dilator: " + d.expr());
    law(r, d);
    eval_if_order(r, d);
    return r;
  }

  Report dil_compose() const {
    return dil_built(compose(dilator(args.outer, "--outer"), dilator(args.inner, "--inner")));
  }

  Report dil_sum() const {
    DenotationSystem s = sum_systems(dilator(args.left, "--left"), dilator(args.right, "--right"));
    Report r = dil_built(s);
    for (std::size_t j = 0; j < 2; ++j) {
      LawReport nr = check_natural(summand_inclusion(s, j), args.n_max, args.cap);
      std::string key = "inclusion_" + std::to_string(j);
      r.j[key] = io::to_json(nr);
      r.line(key + " natural: " + (nr.ok ? "pass" : "FAIL " + nr.failure));
      if (!nr.ok) r.code = kVerify;
    }
    return r;
  }

  Report dil_impl() const {
    LinearOrder a = order(args.a, "--a"), b = order(args.b, "--b");
    DenotationSystem d = implication_dilator(a, b);
    Report r = dil_built(d);
    if (!args.order.empty()) {
      LinearOrder x = order(args.order, "--order");
      Budget bud(cfg.budget_nodes);
      DenChain c = d->probe(x, cfg.depth_or(a.size() ? *a.size() + 3 : 8), bud);
      r.j["witness"] = {{"status", to_string(c.status)}, {"method", c.method}, {"chain", json::array()}};
      for (auto& den : c.chain) r.j["witness"]["chain"].push_back(io::den_json(d, den));
      r.line("witness search at " + x.expr() + ": " + to_string(c.status) + " (" + c.method + ")");
      if (c.status == Search::Exhausted) r.code = std::max<int>(r.code, kBudget);
    }
    if (args.e) {
      auto img = embed_into_implication(d, args.e);
      LinearOrder da = d->evaluate(a);
      const auto& ev = as_evaluated(da);
      auto pre = b.prefix(img.size());
      bool ok = true;
      json arr = json::array();
      for (std::size_t i = 0; i < img.size(); ++i) {
        arr.push_back(io::den_json(d, img[i]));
        for (std::size_t j = 0; j < img.size(); ++j)
          if (b.compare(pre[i], pre[j]) != ev.compare_den(img[i], img[j])) ok = false;
      }
      r.j["e"] = {{"images", arr}, {"order_preserving", ok}};
      r.line("e on first " + std::to_string(img.size()) + " elements of b: " +
             (ok ? "order-preserving" : "NOT order-preserving"));
      if (!ok) r.code = kVerify;
    }
    return r;
  }

  Report dil_rcopy() const {
    TheoryStream s = stream();
    std::vector<std::pair<DenotationSystem, std::string>> pairs;
    for (auto& e : s.positive) pairs.push_back({e.system, e.cert.value_or("")});
    std::string label = args.stream[0] == '@' ? "rcopy(" + args.stream + ")" : "";
    return dil_built(recursive_copy(pairs, label));
  }

  // -------------------------------------------------------------------------
  // beta

  beta::SearchLimits limits() const { return {cfg.depth_or(1000), cfg.budget_nodes}; }

  Report beta_search() const {
    Report r;
    beta::Formula f = formula();
    beta::ProofTree t = beta::proof_search(f, args.stage, limits(), ctx.sig);
    const auto& root = t.nodes[0];
    r.j["formula"] = beta::to_string(f);
    r.j["stage"] = args.stage;
    r.j["status"] = beta::to_string(t.status);
    r.j["node_count"] = t.nodes.size();
    r.j["root"] = {{"rule", root.rule}, {"premises", root.kids.size()}};
    r.j["tree"] = io::to_json(t);
    r.line("formula: " + beta::to_string(f));
    r.line("stage " + std::to_string(args.stage) + ": " + beta::to_string(t.status));
    r.line("root rule: " + root.rule + " with " + std::to_string(root.kids.size()) + " premise" +
           (root.kids.size() == 1 ? "" : "s"));
    r.line("nodes: " + std::to_string(t.nodes.size()));
    r.dot = io::to_dot(t);
    if (t.status == beta::TreeStatus::DepthExhausted) r.code = kBudget;
    return r;
  }

  Report beta_functor() const {
    Report r;
    beta::Formula f = formula();
    std::vector<Code> fv = io::parse_codes(args.embedding, "embedding");
    std::size_t n = args.stage;
    std::size_t m = args.to ? *args.to : (fv.empty() ? 0 : fv.back() + 1);
    if (fv.size() != n) throw Usage("--embedding must list " + std::to_string(n) + " values");
    for (std::size_t i = 0; i < fv.size(); ++i)
      if ((i && fv[i] <= fv[i - 1]) || fv[i] >= m) throw Usage("--embedding must be strictly increasing into --to");
    beta::StageMap sm{fv, m};
    beta::ProofTree pn = beta::proof_search(f, n, limits(), ctx.sig);
    beta::ProofTree pm = beta::proof_search(beta::relabel(f, sm.fn()), m, limits(), ctx.sig);
    beta::ProofEmbedding e = beta::proof_functor(sm, pn, pm);
    beta::EmbeddingCheck c = beta::check_embedding(e, pn, pm);
    r.j["formula"] = beta::to_string(f);
    r.j["embedding"] = fv;
    r.j["from"] = n;
    r.j["to"] = m;
    r.j["map"] = e.map;
    r.j["predecessor"] = c.predecessor;
    r.j["conclusion"] = c.conclusion;
    r.j["relabel"] = c.relabel;
    r.j["ok"] = c.ok();
    if (!c.ok()) r.j["failure"] = c.failure;
    r.line("P(" + codes_string(fv) + ") : P(" + std::to_string(n) + ") -> P(" + std::to_string(m) + "), " +
           std::to_string(e.map.size()) + " nodes mapped");
    r.line(std::string("predecessor ") + (c.predecessor ? "ok" : "FAIL") + ", conclusion " +
           (c.conclusion ? "ok" : "FAIL") + ", relabel " + (c.relabel ? "ok" : "FAIL"));
    if (!c.ok()) {
      r.line("failure: " + c.failure);
      r.code = kVerify;
    }
    return r;
  }

  Report beta_check() const {
    Report r;
    if (args.tree.empty()) throw Usage("missing --tree");
    json j = io::json_arg(args.tree);
    if (j.contains("tree")) j = j["tree"];
    beta::ProofTree t = io::proof_tree_from_json(j);
    beta::AlphaCheck c = beta::check_alpha_proof(t);
    r.j["formula"] = beta::to_string(t.formula);
    r.j["stage"] = t.stage;
    r.j["ok"] = c.ok;
    if (!c.ok) r.j["failure"] = c.failure;
    r.line("check: " + (c.ok ? std::string("ok") : "FAIL " + c.failure));
    if (!c.ok) r.code = kVerify;
    return r;
  }

  Report beta_countermodel() const {
    Report r;
    beta::Formula f = formula();
    beta::ProofTree t = beta::proof_search(f, args.stage, limits(), ctx.sig);
    r.j["formula"] = beta::to_string(f);
    r.j["stage"] = args.stage;
    r.j["status"] = beta::to_string(t.status);
    if (t.status == beta::TreeStatus::DepthExhausted) {
      r.j["countermodel"] = nullptr;
      r.line("search exhausted its budget");
      r.code = kBudget;
      return r;
    }
    if (t.status == beta::TreeStatus::Closed) {
      r.j["countermodel"] = nullptr;
      r.line("no countermodel: the search closed");
      r.code = kVerify;
      return r;
    }
    beta::BetaStructure m = beta::extract_countermodel(t);
    bool falsifies = !beta::eval_in_structure(f, m);
    r.j["countermodel"] = io::to_json(m);
    r.j["leaf"] = t.branch.back();
    r.j["falsifies"] = falsifies;
    r.line("countermodel: " + beta::to_string(m));
    r.line(std::string("falsifies the formula: ") + (falsifies ? "yes" : "NO"));
    if (!falsifies) r.code = kVerify;
    return r;
  }

  Report beta_predilator() const {
    Report r;
    beta::Formula f = formula();
    DenotationSystem d = beta::proof_predilator(f, limits());
    const auto& ps = static_cast<const beta::ProofSystem&>(d.impl());
    r.j["formula"] = beta::to_string(f);
    r.j["dilator"] = d.expr();
    std::size_t n_max = args.n_max;
    r.j["n_max"] = n_max;
    r.line("dilator: " + d.expr());
    json lv = json::array();
    for (std::size_t n = 0; n <= n_max; ++n) {
      std::size_t nodes = ps.tree(n).nodes.size();
      std::size_t terms = *d->num_terms(n);
      std::size_t value = *d->evaluate(fin_order(n)).size();
      lv.push_back({{"n", n}, {"nodes", nodes}, {"terms", terms}, {"value_size", value}});
      r.line("level " + std::to_string(n) + ": |P(n)| = " + std::to_string(nodes) + ", terms " +
             std::to_string(terms) + ", |D(n)| = " + std::to_string(value));
      if (nodes != value) r.code = kVerify;
    }
    r.j["levels"] = lv;
    law(r, d);
    return r;
  }

  // -------------------------------------------------------------------------
  // norm

  Report norm_prefix() const {
    Report r;
    TheoryStream s = stream();
    DenotationSystem d = pi12_prefix(s, args.k);
    r.j["dilator"] = d.expr();
    r.j["k"] = args.k;
    r.line("prefix: " + d.expr());
    eval_if_order(r, d);
    return r;
  }

  static std::string grid_string(const std::vector<Cnf>& g) {
    std::vector<std::string> s;
    for (auto& a : normalize_grid(g)) s.push_back("cnf:" + to_string(a));
    return join(s, ",");
  }

  void probe_text(Report& r, const ProbeReport& p, const std::vector<StreamEntry>& list) const {
    if (p.witness) {
      r.line("least witness: alpha = " + to_string(p.witness->alpha) + ", entry " + std::to_string(p.witness->index) +
             " (" + list[p.witness->index].system.expr() + ")");
      r.line("method: " + p.witness->method);
      std::vector<std::string> c;
      for (auto& d : p.witness->chain) c.push_back(den_string(list[p.witness->index].system, d));
      if (!c.empty()) r.line("chain: " + join(c, " > "));
    } else {
      r.line(std::string("no witness on the grid") + (p.undecided ? " (some searches exhausted their budget)" : ""));
    }
  }

  Report norm_o12() const {
    Report r;
    TheoryStream s = stream();
    auto g = grid();
    ProbeReport p = o12_probe(s, g, probe_options());
    r.j = io::to_json(p, s);
    r.j["grid"] = grid_string(g);
    probe_text(r, p, s.positive);
    if (!p.witness && p.undecided) r.code = kBudget;
    return r;
  }

  Report norm_s12() const {
    Report r;
    TheoryStream s = stream();
    auto g = grid();
    S12Report p = s12_probe(s, g, probe_options());
    r.j["grid"] = grid_string(g);
    r.j["sup"] = p.sup ? json(to_string(*p.sup)) : json(nullptr);
    r.j["entries"] = json::array();
    bool undecided = false;
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
      json e = io::to_json(p.entries[i], TheoryStream{{}, {s.negative[i]}, ""}, true);
      e["entry"] = s.negative[i].system.expr();
      e["minimum"] = p.minima[i] ? json(to_string(*p.minima[i])) : json(nullptr);
      r.j["entries"].push_back(e);
      r.line("entry " + std::to_string(i) + " (" + s.negative[i].system.expr() +
             "): " + (p.minima[i] ? to_string(*p.minima[i]) : std::string("none")));
      if (!p.minima[i] && p.entries[i].undecided) undecided = true;
    }
    r.line("sup: " + (p.sup ? to_string(*p.sup) : std::string("none")));
    if (undecided) r.code = kBudget;
    return r;
  }

  Report norm_classify() const {
    Report r;
    TheoryStream s = stream();
    auto g = grid();
    CategoryVerdict v = classify(s, g, probe_options());
    g.push_back(Cnf{});
    r.j["grid"] = grid_string(g);
    r.j["category"] = to_string(v.category);
    r.j["evidence"] = io::to_json(v.evidence, s);
    r.line("category: " + std::string(to_string(v.category)));
    probe_text(r, v.evidence, s.positive);
    if (v.category == Category::CorD && v.evidence.undecided) r.code = kBudget;
    return r;
  }

  Report norm_relation() const {
    Report r;
    TheoryStream s = stream();
    LinearOrder x = order(args.order, "--order");
    RelationReport rel = check_ordinal_relation(s, args.k, x, args.cap);
    r.j["k"] = args.k;
    r.j["at"] = x.expr();
    r.j["ok"] = rel.ok;
    r.j["pairs_checked"] = rel.pairs_checked;
    r.j["iso"] = json::array();
    for (auto& [p, q] : rel.iso) r.j["iso"].push_back({p, q});
    if (!rel.ok) r.j["failure"] = rel.failure;
    r.line("prefix of length " + std::to_string(args.k) + " at " + x.expr() + ": " +
           (rel.ok ? "block isomorphism holds" : "FAIL " + rel.failure) + " (" + std::to_string(rel.pairs_checked) +
           " pairs)");
    if (!rel.ok) r.code = kVerify;
    return r;
  }

  Report norm_epsilon() const {
    Report r;
    DenotationSystem d = dilator(args.dilator, "--dilator");
    if (args.alpha.empty()) throw Usage("missing --alpha");
    Cnf a = args.alpha.rfind("cnf:", 0) == 0 ? parse_cnf(args.alpha.substr(4)) : parse_cnf(args.alpha);
    EpsilonReport e = epsilon_closure_check(d, a, probe_options());
    r.j["dilator"] = d.expr();
    r.j["alpha"] = to_string(a);
    r.j["consistent"] = e.consistent;
    r.j["rows"] = json::array();
    std::optional<std::size_t> least;
    for (auto& row : e.rows) {
      r.j["rows"].push_back({{"height", row.height},
                             {"point", to_string(row.point)},
                             {"composite", to_string(row.composite)},
                             {"direct", to_string(row.direct)},
                             {"method", row.method}});
      r.line("h=" + std::to_string(row.height) + " at " + to_string(row.point) + ": " + to_string(row.composite) +
             " (direct " + to_string(row.direct) + ")");
      if (row.point == a && row.composite == Search::Found && !least) least = row.height;
    }
    r.j["least_height"] = least ? json(*least) : json(nullptr);
    r.line("least height with a witness at " + to_string(a) + ": " +
           (least ? std::to_string(*least) : std::string("none")));
    if (!e.consistent) r.code = kVerify;
    return r;
  }
};

inline void emit(const Report& r, const std::string& command, const RunConfig& cfg, std::ostream& out) {
  if (cfg.format == "json") {
    json j = r.j;
    j["command"] = command;
    j["config"] = {{"budget_nodes", cfg.budget_nodes},
                   {"budget_depth", cfg.budget_depth ? json(*cfg.budget_depth) : json(nullptr)},
                   {"seed", cfg.seed}};
    j["exit"] = r.code;
    out << j.dump(2) << "\n";
  } else if (cfg.format == "dot") {
    out << r.dot;
  } else {
    for (auto& l : r.text) out << l << "\n";
  }
}

inline int run(std::vector<std::string> argv, std::ostream& out, std::ostream& err) {
  Runner run;
  RunConfig& cfg = run.cfg;
  Args& a = run.args;
  CLI::App app{"Computable orders, denotation systems, beta-proofs and soundness probes", "ptyx"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"text", "json", "dot"}));
  app.add_option("--budget-nodes", cfg.budget_nodes, "Node budget per search");
  app.add_option("--budget-depth", cfg.budget_depth, "Depth bound for chain and proof search");
  app.add_option("--seed", cfg.seed, "Seed for randomized generation");
  app.add_option("--grid", cfg.grid, "Probe grid, e.g. cnf:w,cnf:w^2");
  app.add_option("--rel", cfg.rels, "Relation symbol declaration NAME:ARITY");

  std::string chosen;
  std::map<std::string, std::function<Report()>> handlers;
  auto group = [&](const std::string& name, const std::string& desc) {
    auto* g = app.add_subcommand(name, desc);
    g->require_subcommand(1);
    g->fallthrough();
    return g;
  };
  auto cmd = [&](CLI::App* g, const std::string& name, const std::string& desc, std::function<Report()> h) {
    auto* c = g->add_subcommand(name, desc);
    c->fallthrough();
    std::string key = g->get_name() + " " + name;
    handlers[key] = std::move(h);
    c->callback([&chosen, key] { chosen = key; });
    return c;
  };

  auto* ord = group("ord", "Linear orders");
  auto* c = cmd(ord, "eval", "Describe an order", [&] { return run.ord_eval(); });
  c->add_option("--order", a.order)->required();
  c->add_option("--list", a.list);
  c = cmd(ord, "kb", "Kleene-Brouwer order of a finite tree", [&] { return run.ord_kb(); });
  c->add_option("--tree", a.tree, "@file or inline JSON");
  c->add_option("--random", a.random, "Generate a random tree with this many nodes");
  c->add_option("--list", a.list);
  c = cmd(ord, "compare", "Compare two codes", [&] { return run.ord_compare(); });
  c->add_option("--order", a.order)->required();
  c->add_option("--x", a.cx)->required();
  c->add_option("--y", a.cy)->required();
  c = cmd(ord, "chain", "Search a descending chain", [&] { return run.ord_chain(); });
  c->add_option("--order", a.order)->required();
  c->add_option("--depth", a.depth);
  c = cmd(ord, "embed", "Least embedding of a finite order", [&] { return run.ord_embed(); });
  c->add_option("--from", a.from)->required();
  c->add_option("--into", a.into)->required();
  c = cmd(ord, "disj", "Disjunction order", [&] { return run.ord_disj(); });
  c->add_option("--left", a.left)->required();
  c->add_option("--right", a.right)->required();
  c->add_option("--list", a.list);

  auto* dil = group("dil", "Denotation systems");
  c = cmd(dil, "eval", "Evaluate at an order", [&] { return run.dil_eval(); });
  c->add_option("--dilator", a.dilator)->required();
  c->add_option("--order", a.order)->required();
  c->add_option("--list", a.list);
  c = cmd(dil, "check", "Pre-dilator law suite", [&] { return run.dil_check(); });
  c->add_option("--dilator", a.dilator)->required();
  c->add_option("--n-max", a.n_max);
  c->add_option("--cap", a.cap);
  c = cmd(dil, "map", "Transport a denotation along an embedding", [&] { return run.dil_map(); });
  c->add_option("--dilator", a.dilator)->required();
  c->add_option("--level", a.level)->required();
  c->add_option("--index", a.index)->required();
  c->add_option("--embedding", a.embedding)->required();
  c->add_option("--target", a.target);
  for (auto [name, fn] : std::vector<std::pair<std::string, std::function<Report()>>>{
           {"compose", [&] { return run.dil_compose(); }},
           {"sum", [&] { return run.dil_sum(); }},
           {"impl", [&] { return run.dil_impl(); }},
           {"rcopy", [&] { return run.dil_rcopy(); }}}) {
    c = cmd(dil, name, "Build with " + name + " and check", fn);
    c->add_option("--order", a.order);
    c->add_option("--list", a.list);
    c->add_option("--n-max", a.n_max);
    c->add_option("--cap", a.cap);
    if (name == "compose") {
      c->add_option("--outer", a.outer)->required();
      c->add_option("--inner", a.inner)->required();
    } else if (name == "sum") {
      c->add_option("--left", a.left)->required();
      c->add_option("--right", a.right)->required();
    } else if (name == "impl") {
      c->add_option("--a", a.a)->required();
      c->add_option("--b", a.b)->required();
      c->add_option("--e", a.e, "Check e on this many elements of b");
    } else {
      c->add_option("--stream", a.stream)->required();
    }
  }

  auto* bet = group("beta", "Beta-proof search");
  c = cmd(bet, "search", "Proof search at a finite stage", [&] { return run.beta_search(); });
  c->add_option("--formula", a.formula)->required();
  c->add_option("--stage", a.stage)->required();
  c = cmd(bet, "functor", "Transport a proof along an embedding", [&] { return run.beta_functor(); });
  c->add_option("--formula", a.formula)->required();
  c->add_option("--stage", a.stage)->required();
  c->add_option("--to", a.to);
  c->add_option("--embedding", a.embedding)->required();
  c = cmd(bet, "check", "Check a proof tree", [&] { return run.beta_check(); });
  c->add_option("--tree", a.tree)->required();
  c = cmd(bet, "countermodel", "Countermodel from an open branch", [&] { return run.beta_countermodel(); });
  c->add_option("--formula", a.formula)->required();
  c->add_option("--stage", a.stage)->required();
  c = cmd(bet, "predilator", "The proof as a pre-dilator", [&] { return run.beta_predilator(); });
  c->add_option("--formula", a.formula)->required();
  c->add_option("--n-max", a.n_max);
  c->add_option("--cap", a.cap);

  auto* nrm = group("norm", "Theory streams");
  c = cmd(nrm, "prefix", "Finite prefix sum", [&] { return run.norm_prefix(); });
  c->add_option("--stream", a.stream)->required();
  c->add_option("--k", a.k)->required();
  c->add_option("--order", a.order);
  c->add_option("--list", a.list);
  c = cmd(nrm, "o12", "Least ill-foundedness witness", [&] { return run.norm_o12(); });
  c->add_option("--stream", a.stream)->required();
  c = cmd(nrm, "s12", "Witnesses of the negative list", [&] { return run.norm_s12(); });
  c->add_option("--stream", a.stream)->required();
  c = cmd(nrm, "classify", "Category from the probe", [&] { return run.norm_classify(); });
  c->add_option("--stream", a.stream)->required();
  c = cmd(nrm, "relation", "Prefix value against the block sum", [&] { return run.norm_relation(); });
  c->add_option("--stream", a.stream)->required();
  c->add_option("--k", a.k)->required();
  c->add_option("--order", a.order)->required();
  c->add_option("--cap", a.cap);
  c = cmd(nrm, "epsilon", "Witnesses along w-towers", [&] { return run.norm_epsilon(); });
  c->add_option("--dilator", a.dilator)->required();
  c->add_option("--alpha", a.alpha)->required();

  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    run.ctx.sig = beta::parse_signature(cfg.rels);
    Report r = handlers.at(chosen)();
    if (cfg.format == "dot" && r.dot.empty()) throw Usage("--format dot is available for ord kb and beta search");
    emit(r, chosen, cfg, out);
    return r.code;
  } catch (const ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Usage& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const StreamExhausted& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainMismatch& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const BudgetExhausted& e) {
    err << "budget exhausted: " << e.what() << "\n";
    return kBudget;
  } catch (const Error& e) {
    err << "verification failure: " << e.what() << "\n";
    return kVerify;
  }
}

}  // namespace ptyx::cli
