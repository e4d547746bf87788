#pragma once

#include <boost/beast/core/detail/base64.hpp>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "beta.hpp"
#include "cnf.hpp"
#include "core.hpp"
#include "dilator.hpp"
#include "norms.hpp"
#include "order.hpp"

namespace ptyx::io {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("@" + path, "file-ref", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("@" + path, "json", e.what());
  }
}

// "@path" reads a file, anything else is inline JSON.
inline json json_arg(const std::string& s) {
  if (!s.empty() && s[0] == '@') return read_json_file(s.substr(1));
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw ParseError(s.substr(0, 16), "json", e.what());
  }
}

inline std::string base64_decode(const std::string& s) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::decoded_size(s.size()), '\0');
  auto [written, read] = b64::decode(out.data(), s.data(), s.size());
  out.resize(written);
  std::string again(b64::encoded_size(out.size()), '\0');
  again.resize(b64::encode(again.data(), out.data(), out.size()));
  (void)read;
  if (again != s) throw ParseError(s, "certificate", "not canonical base64");
  return out;
}

inline std::string base64_encode(const std::string& s) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(s.size()), '\0');
  out.resize(b64::encode(out.data(), s.data(), s.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Trees.

inline Tree tree_from_json(const json& j) {
  if (!j.is_array()) throw ParseError(j.dump().substr(0, 16), "tree", "expected an array of integer arrays");
  std::vector<Node> nodes;
  for (const auto& n : j) {
    if (!n.is_array()) throw ParseError(n.dump(), "tree", "expected an integer array");
    Node v;
    for (const auto& x : n) {
      if (!x.is_number_unsigned()) throw ParseError(x.dump(), "tree", "expected a non-negative integer");
      v.push_back(x.get<std::uint64_t>());
    }
    nodes.push_back(std::move(v));
  }
  try {
    return Tree(nodes);
  } catch (const Error& e) {
    throw ParseError(j.dump().substr(0, 16), "tree", e.what());
  }
}

inline json to_json(const Tree& t) {
  json j = json::array();
  for (const auto& n : t.nodes()) j.push_back(n);
  return j;
}

// ---------------------------------------------------------------------------
// Order and dilator expressions.

struct ParseContext {
  beta::Signature sig;  // relation symbols for proof(...)
};

namespace detail {

class ExprParser {
 public:
  ExprParser(const std::string& s, const ParseContext& ctx) : s_(s), ctx_(ctx) {}

  LinearOrder order() {
    std::size_t start = pos();
    if (eat("fin:")) return fin();
    if (eat("cnf:")) {
      std::string body = until_delim();
      try {
        return cnf_order(parse_cnf(body));
      } catch (const ParseError& e) {
        throw ParseError(e.token, "order-cnf", e.message);
      }
    }
    if (eat_word("ws")) return omega_star();
    if (eat("kb:")) {
      if (peek() == '@') {
        ++p_;
        std::string path = until_delim();
        return kb_order(tree_from_json(read_json_file(path)), "kb:@" + path);
      }
      std::string body = bracketed("order-kb");
      return kb_order(tree_from_json(json_body(body, "order-kb")));
    }
    if (eat_word("sum")) {
      auto [a, b] = pair_of([&] { return order(); }, "order-sum");
      return sum_orders(a, b);
    }
    if (eat_word("disj")) {
      auto [a, b] = pair_of([&] { return order(); }, "order-disj");
      return disj_order(a, b);
    }
    p_ = start;
    fail("order", "expected fin:, cnf:, ws, kb:, sum( or disj(");
  }

  DenotationSystem dilator() {
    if (eat_word("id")) return id_system();
    if (eat_word("expw")) return exp_omega();
    if (eat_word("const")) {
      expect('(', "dilator-const");
      LinearOrder a = order();
      expect(')', "dilator-const");
      return constant(a);
    }
    if (eat_word("impl")) {
      auto [a, b] = pair_of([&] { return order(); }, "dilator-impl");
      return implication_dilator(a, b);
    }
    if (eat_word("sum")) {
      auto [a, b] = pair_of([&] { return dilator(); }, "dilator-sum");
      return sum_systems(a, b);
    }
    if (eat_word("comp")) {
      auto [a, b] = pair_of([&] { return dilator(); }, "dilator-comp");
      return compose(a, b);
    }
    if (eat_word("osum")) {
      expect('(', "dilator-osum");
      std::string path = file_ref("dilator-osum");
      expect(',', "dilator-osum");
      std::size_t k = number("dilator-osum");
      expect(')', "dilator-osum");
      TheoryStream st = load_stream_file(path);
      return pi12_prefix(st, k);
    }
    if (eat_word("rcopy")) {
      expect('(', "dilator-rcopy");
      std::string path = file_ref("dilator-rcopy");
      expect(')', "dilator-rcopy");
      TheoryStream st = load_stream_file(path);
      std::vector<std::pair<DenotationSystem, std::string>> pairs;
      for (auto& e : st.positive) pairs.push_back({e.system, e.cert.value_or("")});
      return recursive_copy(pairs, "rcopy(@" + path + ")");
    }
    if (eat_word("table")) {
      expect('(', "dilator-table");
      std::string path = file_ref("dilator-table");
      expect(')', "dilator-table");
      return table_from_json(read_json_file(path), "table(@" + path + ")");
    }
    if (eat_word("proof")) {
      std::string body = parenthesized("dilator-proof");
      beta::Formula f;
      try {
        f = beta::parse_formula(body.substr(1, body.size() - 2), ctx_.sig);
      } catch (const ParseError& e) {
        throw ParseError(e.token, "dilator-proof", e.message);
      }
      try {
        return beta::proof_predilator(f);
      } catch (const DomainMismatch& e) {
        throw ParseError(body, "dilator-proof", e.what());
      }
    }
    fail("dilator", "expected id, const(, impl(, expw, sum(, osum(, comp(, rcopy(, table( or proof(");
  }

  void finish(const std::string& prod) {
    skip_ws();
    if (p_ != s_.size()) fail(prod, "trailing input");
  }

  static DenotationSystem table_from_json(const json& j, const std::string& label);
  static TheoryStream load_stream_file(const std::string& path);

 private:
  const std::string& s_;
  const ParseContext& ctx_;
  std::size_t p_ = 0;

  std::size_t pos() {
    skip_ws();
    return p_;
  }
  void skip_ws() {
    while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
  }
  char peek() {
    skip_ws();
    return p_ < s_.size() ? s_[p_] : '\0';
  }
  bool eat(const std::string& lit) {
    skip_ws();
    if (s_.compare(p_, lit.size(), lit) != 0) return false;
    p_ += lit.size();
    return true;
  }
  // A keyword not followed by further identifier characters.
  bool eat_word(const std::string& w) {
    skip_ws();
    if (s_.compare(p_, w.size(), w) != 0) return false;
    std::size_t e = p_ + w.size();
    if (e < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[e])) || s_[e] == '_')) return false;
    p_ = e;
    return true;
  }
  [[noreturn]] void fail(const std::string& prod, const std::string& msg) {
    skip_ws();
    std::string tok;
    if (p_ >= s_.size()) tok = "<end>";
    else {
      std::size_t e = p_;
      while (e < s_.size() && e < p_ + 12 && s_[e] != ',' && s_[e] != ')' && s_[e] != '(') ++e;
      tok = s_.substr(p_, std::max<std::size_t>(e - p_, 1));
    }
    throw ParseError(tok, prod, msg);
  }
  void expect(char c, const std::string& prod) {
    if (peek() != c) fail(prod, std::string("expected '") + c + "'");
    ++p_;
  }
  template <class F>
  std::pair<std::invoke_result_t<F>, std::invoke_result_t<F>> pair_of(F f, const std::string& prod) {
    expect('(', prod);
    auto a = f();
    expect(',', prod);
    auto b = f();
    expect(')', prod);
    return std::make_pair(a, b);
  }
  // Text up to the next ',' or ')' at parenthesis depth 0.
  std::string until_delim() {
    skip_ws();
    std::size_t start = p_;
    int depth = 0;
    while (p_ < s_.size()) {
      char c = s_[p_];
      if (c == '(') ++depth;
      else if (c == ')') {
        if (depth == 0) break;
        --depth;
      } else if (c == ',' && depth == 0) break;
      ++p_;
    }
    std::string r = s_.substr(start, p_ - start);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
    return r;
  }
  std::string matched(char open, char close, const std::string& prod) {
    skip_ws();
    if (p_ >= s_.size() || s_[p_] != open) fail(prod, std::string("expected '") + open + "'");
    std::size_t start = p_;
    int depth = 0;
    for (; p_ < s_.size(); ++p_) {
      if (s_[p_] == open) ++depth;
      else if (s_[p_] == close && --depth == 0) {
        ++p_;
        return s_.substr(start, p_ - start);
      }
    }
    p_ = start;
    fail(prod, std::string("unbalanced '") + open + "'");
  }
  std::string bracketed(const std::string& prod) { return matched('[', ']', prod); }
  std::string parenthesized(const std::string& prod) { return matched('(', ')', prod); }
  json json_body(const std::string& body, const std::string& prod) {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw ParseError(body.substr(0, 16), prod, "malformed JSON");
    }
  }
  std::string file_ref(const std::string& prod) {
    if (peek() != '@') fail(prod, "expected '@file'");
    ++p_;
    std::string path = until_delim();
    if (path.empty()) fail(prod, "empty file name");
    return path;
  }
  std::size_t number(const std::string& prod) {
    skip_ws();
    std::size_t start = p_;
    while (p_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p_]))) ++p_;
    if (start == p_) fail(prod, "expected a number");
    return std::stoull(s_.substr(start, p_ - start));
  }
  LinearOrder fin() {
    expect('[', "order-fin");
    std::vector<Code> cs;
    if (peek() != ']') {
      cs.push_back(number("order-fin"));
      while (peek() == ',') {
        ++p_;
        cs.push_back(number("order-fin"));
      }
    }
    std::size_t at = p_;
    expect(']', "order-fin");
    try {
      return fin_order(cs);
    } catch (const Error& e) {
      p_ = at;
      fail("order-fin", e.what());
    }
  }
};

}  // namespace detail

inline LinearOrder parse_order(const std::string& s, const ParseContext& ctx = {}) {
  detail::ExprParser p(s, ctx);
  LinearOrder o = p.order();
  p.finish("order");
  return o;
}

inline DenotationSystem parse_dilator(const std::string& s, const ParseContext& ctx = {}) {
  detail::ExprParser p(s, ctx);
  DenotationSystem d = p.dilator();
  p.finish("dilator");
  return d;
}

// ---------------------------------------------------------------------------
// Explicit finite systems:
// {"terms":[{"name":"a","arity":1},...],
//  "table":[{"left":"a","right":"b","pattern":{"left":[0],"right":[1]},"cmp":"lt"},...]}

inline Cmp parse_cmp(const std::string& s) {
  if (s == "lt" || s == "<") return Cmp::LT;
  if (s == "eq" || s == "=") return Cmp::EQ;
  if (s == "gt" || s == ">") return Cmp::GT;
  throw ParseError(s, "table-cmp", "expected lt, eq or gt");
}

inline const char* cmp_name(Cmp c) { return c == Cmp::LT ? "lt" : c == Cmp::EQ ? "eq" : "gt"; }

inline DenotationSystem detail::ExprParser::table_from_json(const json& j, const std::string& label) {
  try {
    std::vector<std::pair<std::string, std::size_t>> terms;
    for (const auto& t : j.at("terms")) terms.push_back({t.at("name").get<std::string>(), t.at("arity").get<std::size_t>()});
    std::vector<TableSystem::Entry> rows;
    for (const auto& r : j.at("table")) {
      MergePattern p{r.at("pattern").at("left").get<std::vector<std::uint32_t>>(),
                     r.at("pattern").at("right").get<std::vector<std::uint32_t>>()};
      if (!p.valid()) throw ParseError(to_string(p), "table-pattern", "not a merge pattern");
      rows.push_back({r.at("left").get<std::string>(), r.at("right").get<std::string>(), p,
                      parse_cmp(r.at("cmp").get<std::string>())});
    }
    return DenotationSystem(std::make_shared<TableSystem>(terms, rows, label));
  } catch (const json::exception& e) {
    throw ParseError(label, "table", e.what());
  }
}

inline TheoryStream stream_from_json(const json& j, const std::string& source = "") {
  TheoryStream st;
  st.source = source;
  auto list = [&](const char* key, std::vector<StreamEntry>& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) throw ParseError(key, "stream", "expected an array");
    for (const auto& e : j[key]) {
      StreamEntry se;
      if (e.is_string()) {
        se.system = parse_dilator(e.get<std::string>());
      } else if (e.is_object() && e.contains("dilator") && e["dilator"].is_string()) {
        se.system = parse_dilator(e["dilator"].get<std::string>());
        if (e.contains("cert")) {
          if (!e["cert"].is_string()) throw ParseError(key, "stream-entry", "certificate must be a base64 string");
          se.cert = base64_decode(e["cert"].get<std::string>());
        }
      } else {
        throw ParseError(e.dump().substr(0, 16), "stream-entry", "expected a dilator string or {dilator, cert}");
      }
      out.push_back(std::move(se));
    }
  };
  if (!j.is_object()) throw ParseError(j.dump().substr(0, 16), "stream", "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "positive" && it.key() != "negative") throw ParseError(it.key(), "stream", "unknown key");
  list("positive", st.positive);
  list("negative", st.negative);
  check_duplicate_free(st.positive, "positive");
  check_duplicate_free(st.negative, "negative");
  return st;
}

inline TheoryStream detail::ExprParser::load_stream_file(const std::string& path) {
  return stream_from_json(read_json_file(path), path);
}

inline TheoryStream load_stream(const std::string& arg) {
  if (!arg.empty() && arg[0] == '@') return detail::ExprParser::load_stream_file(arg.substr(1));
  return stream_from_json(json_arg(arg));
}

// Comma-separated grid of cnf: orders.
inline std::vector<Cnf> parse_grid(const std::string& s) {
  std::vector<Cnf> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.erase(item.begin());
    if (item.rfind("cnf:", 0) != 0) throw ParseError(item.empty() ? "<empty>" : item, "grid", "expected cnf:<expr>");
    try {
      out.push_back(parse_cnf(item.substr(4)));
    } catch (const ParseError& e) {
      throw ParseError(e.token, "grid", e.message);
    }
  }
  if (out.empty()) throw ParseError("<empty>", "grid", "expected at least one point");
  return out;
}

inline std::vector<Code> parse_codes(const std::string& s, const std::string& prod) {
  std::vector<Code> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw ParseError(item.empty() ? "<empty>" : item, prod, "expected a comma-separated list of naturals");
    out.push_back(std::stoull(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON emitters.

inline std::string element_string(const LinearOrder& o, Code c) {
  if (auto* kb = dynamic_cast<const KbNodeOrder*>(&o.impl())) return node_string(kb->node(c));
  if (auto* ev = dynamic_cast<const EvaluatedOrder*>(&o.impl())) return den_string(ev->system(), ev->denotation(c));
  if (auto* cn = dynamic_cast<const CnfOrder*>(&o.impl())) return to_string(*cn->rank(c));
  if (auto* so = dynamic_cast<const SumOrder*>(&o.impl())) {
    auto [part, idx] = so->locate(c);
    const LinearOrder& p = so->parts()[part];
    return std::to_string(part) + "." + element_string(p, p.element(idx));
  }
  if (dynamic_cast<const OmegaStar*>(&o.impl())) return "-" + std::to_string(c + 1);
  return std::to_string(c);
}

inline json element_json(const LinearOrder& o, Code c) {
  json j{{"code", c}, {"show", element_string(o, c)}};
  if (auto r = o.rank(c)) j["rank"] = to_string(*r);
  return j;
}

inline json to_json(const ChainResult& r, const LinearOrder& o) {
  json j{{"status", to_string(r.status)}, {"chain", json::array()}};
  for (Code c : r.chain) j["chain"].push_back(element_json(o, c));
  return j;
}

inline json to_json(const LawReport& r) {
  json j{{"ok", r.ok},
         {"levels_checked", r.levels_checked},
         {"pairs_checked", r.pairs_checked},
         {"embeddings_checked", r.embeddings_checked}};
  if (!r.ok) {
    j["failure"] = r.failure;
    if (r.pattern) j["pattern"] = to_string(*r.pattern);
  }
  return j;
}

inline json den_json(const DenotationSystem& d, const Denotation& x) {
  return json{{"show", den_string(d, x)}, {"term", d->term_string(x.term)}, {"args", x.args}};
}

inline json to_json(const ProbeReport& r, const TheoryStream& s, bool negative = false) {
  const auto& list = negative ? s.negative : s.positive;
  json j{{"verdict", r.verdict()}, {"budget", r.budget}, {"depth", r.depth}, {"undecided", r.undecided},
         {"trail", json::array()}};
  for (const auto& t : r.trail)
    j["trail"].push_back({{"alpha", to_string(t.alpha)}, {"index", t.index}, {"status", to_string(t.status)},
                          {"method", t.method}, {"used", t.used}});
  if (r.witness) {
    json w{{"index", r.witness->index},
           {"alpha", to_string(r.witness->alpha)},
           {"entry", list.at(r.witness->index).system.expr()},
           {"method", r.witness->method},
           {"chain", json::array()}};
    for (const auto& d : r.witness->chain) w["chain"].push_back(den_json(list.at(r.witness->index).system, d));
    j["witness"] = w;
  } else {
    j["witness"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Proof trees.

inline json to_json(const beta::Choice& c) {
  json j{{"pick", c.pick}};
  if (!c.kids.empty()) {
    j["kids"] = json::array();
    for (const auto& k : c.kids) j["kids"].push_back(to_json(k));
  }
  return j;
}

inline beta::Choice choice_from_json(const json& j) {
  beta::Choice c;
  c.pick = j.at("pick").get<std::int64_t>();
  if (j.contains("kids"))
    for (const auto& k : j["kids"]) c.kids.push_back(choice_from_json(k));
  return c;
}

inline json to_json(const beta::Sequent& s) {
  json es = json::array();
  for (const auto& e : s.entries) {
    switch (e.kind) {
      case beta::Entry::Kind::Closed: es.push_back({{"kind", "closed"}, {"formula", beta::to_string(e.f)}}); break;
      case beta::Entry::Kind::Group:
        es.push_back({{"kind", "group"}, {"vars", e.vars}, {"formula", beta::to_string(e.f)}});
        break;
      case beta::Entry::Kind::Lits: {
        json ms = json::array();
        for (const auto& m : e.lits) ms.push_back({{"origin", m.origin}, {"literal", beta::to_string(m.lit)}});
        json ej{{"kind", "lits"}, {"members", ms}};
        if (e.f) ej["formula"] = beta::to_string(e.f);
        if (!e.vars.empty()) ej["vars"] = e.vars;
        es.push_back(ej);
        break;
      }
    }
  }
  return json{{"cursor", s.cursor}, {"entries", es}, {"show", beta::to_string(s)}};
}

inline beta::Formula formula_from(const json& j, const beta::Signature& sig) {
  return beta::nnf(beta::parse_formula(j.get<std::string>(), sig));
}

inline beta::Sequent sequent_from_json(const json& j, const beta::Signature& sig) {
  beta::Sequent s;
  s.cursor = j.at("cursor").get<std::size_t>();
  for (const auto& e : j.at("entries")) {
    beta::Entry en;
    std::string kind = e.at("kind").get<std::string>();
    if (kind == "closed") {
      en.kind = beta::Entry::Kind::Closed;
      en.f = formula_from(e.at("formula"), sig);
    } else if (kind == "group") {
      en.kind = beta::Entry::Kind::Group;
      en.vars = e.at("vars").get<std::vector<std::string>>();
      en.f = formula_from(e.at("formula"), sig);
    } else if (kind == "lits") {
      en.kind = beta::Entry::Kind::Lits;
      if (e.contains("formula")) en.f = formula_from(e["formula"], sig);
      if (e.contains("vars")) en.vars = e["vars"].get<std::vector<std::string>>();
      for (const auto& m : e.at("members"))
        en.lits.push_back({m.at("origin").get<std::vector<Code>>(), formula_from(m.at("literal"), sig)});
    } else {
      throw ParseError(kind, "proof-entry", "expected closed, group or lits");
    }
    s.entries.push_back(std::move(en));
  }
  return s;
}

inline json to_json(const beta::ProofTree& t) {
  json nodes = json::array();
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const auto& n = t.nodes[v];
    json nj{{"id", v},
            {"parent", n.parent ? json(*n.parent) : json(nullptr)},
            {"label", to_json(n.label)},
            {"rule", n.rule},
            {"principal", n.principal},
            {"status", beta::to_string(n.status)},
            {"depth", n.depth},
            {"kids", n.kids},
            {"sequent", to_json(n.seq)}};
    if (!n.note.empty()) nj["note"] = n.note;
    nodes.push_back(nj);
  }
  json sig = json::object();
  for (auto& [r, k] : t.sig) sig[r] = k;
  return json{{"formula", beta::to_string(t.formula)}, {"signature", sig}, {"stage", t.stage},
              {"status", beta::to_string(t.status)}, {"branch", t.branch}, {"nodes", nodes}};
}

inline beta::NodeStatus node_status(const std::string& s) {
  if (s == "inner") return beta::NodeStatus::Inner;
  if (s == "axiom") return beta::NodeStatus::Axiom;
  if (s == "open") return beta::NodeStatus::Open;
  if (s == "cut-off") return beta::NodeStatus::CutOff;
  throw ParseError(s, "proof-node", "unknown node status");
}

inline beta::ProofTree proof_tree_from_json(const json& j) {
  try {
    beta::ProofTree t;
    for (auto& [r, k] : j.at("signature").items()) t.sig[r] = k.get<std::size_t>();
    t.formula = beta::parse_formula(j.at("formula").get<std::string>(), t.sig);
    t.stage = j.at("stage").get<std::size_t>();
    std::string st = j.at("status").get<std::string>();
    t.status = st == "closed" ? beta::TreeStatus::Closed
               : st == "open-branch" ? beta::TreeStatus::OpenBranch
                                     : beta::TreeStatus::DepthExhausted;
    t.branch = j.at("branch").get<std::vector<std::size_t>>();
    for (const auto& nj : j.at("nodes")) {
      beta::ProofNode n;
      if (!nj.at("parent").is_null()) n.parent = nj["parent"].get<std::size_t>();
      n.label = choice_from_json(nj.at("label"));
      n.rule = nj.at("rule").get<std::string>();
      n.principal = nj.at("principal").get<std::size_t>();
      n.status = node_status(nj.at("status").get<std::string>());
      n.depth = nj.at("depth").get<std::size_t>();
      n.kids = nj.at("kids").get<std::vector<std::size_t>>();
      if (nj.contains("note")) n.note = nj["note"].get<std::string>();
      n.seq = sequent_from_json(nj.at("sequent"), t.sig);
      if (nj.at("id").get<std::size_t>() != t.nodes.size()) throw ParseError(nj["id"].dump(), "proof-node", "ids must be 0,1,2,...");
      t.nodes.push_back(std::move(n));
    }
    for (const auto& n : t.nodes)
      for (auto k : n.kids)
        if (k >= t.nodes.size()) throw ParseError(std::to_string(k), "proof-node", "kid out of range");
    return t;
  } catch (const json::exception& e) {
    throw ParseError("proof-tree", "proof-tree", e.what());
  }
}

inline std::string dot_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '"' || c == '\\') o += '\\';
    o += c;
  }
  return o;
}

inline std::string to_dot(const beta::ProofTree& t) {
  std::string s = "digraph proof {\n  node [shape=box, fontname=\"monospace\"];\n";
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const auto& n = t.nodes[v];
    std::string label = beta::to_string(n.seq) + "\\n[" + n.rule + "]";
    std::string style = n.status == beta::NodeStatus::Open ? ", color=red" : n.status == beta::NodeStatus::Axiom ? ", color=darkgreen" : "";
    s += "  n" + std::to_string(v) + " [label=\"" + dot_escape(label) + "\"" + style + "];\n";
  }
  for (std::size_t v = 0; v < t.nodes.size(); ++v)
    for (auto k : t.nodes[v].kids)
      s += "  n" + std::to_string(v) + " -> n" + std::to_string(k) + " [label=\"" + dot_escape(beta::to_string(t.nodes[k].label)) + "\"];\n";
  return s + "}\n";
}

inline std::string to_dot(const Tree& t) {
  std::string s = "digraph tree {\n";
  auto nodes = t.nodes();
  std::map<Node, std::size_t> id;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    id[nodes[i]] = i;
    s += "  t" + std::to_string(i) + " [label=\"" + node_string(nodes[i]) + "\"];\n";
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!nodes[i].empty())
      s += "  t" + std::to_string(id[Node(nodes[i].begin(), nodes[i].end() - 1)]) + " -> t" + std::to_string(i) + ";\n";
  return s + "}\n";
}

inline json to_json(const beta::BetaStructure& m) {
  json rel = json::object();
  for (auto& [r, ts] : m.rel) {
    json a = json::array();
    for (auto& t : ts) a.push_back(t);
    rel[r] = a;
  }
  return json{{"stage", m.n}, {"relations", rel}, {"show", beta::to_string(m)}};
}

}  // namespace ptyx::io
