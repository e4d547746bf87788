#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "ptyx/io.hpp"

using namespace ptyx;
using namespace ptyx::beta;

namespace {

const std::vector<oracle::CorpusFormula>& corpus() {
  static auto c = oracle::load_corpus(PTYX_FIXTURES "/corpus.json");
  return c;
}

std::size_t max_stage(const oracle::CorpusFormula& c) { return c.rels.empty() ? 4 : 3; }

// Random formula text over <, <=, R/1, S/2 and c0, c1.
std::string random_formula(std::mt19937_64& rng, int depth, std::vector<std::string>& bound) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto term = [&]() -> std::string {
    std::size_t k = pick(bound.size() + 2);
    return k < bound.size() ? bound[k] : "c" + std::to_string(k - bound.size());
  };
  if (depth == 0 || pick(4) == 0) {
    switch (pick(4)) {
      case 0: return term() + " < " + term();
      case 1: return term() + " <= " + term();
      case 2: return "R(" + term() + ")";
      default: return "S(" + term() + "," + term() + ")";
    }
  }
  switch (pick(6)) {
    case 0: return "~(" + random_formula(rng, depth - 1, bound) + ")";
    case 1: return "(" + random_formula(rng, depth - 1, bound) + " & " + random_formula(rng, depth - 1, bound) + ")";
    case 2: return "(" + random_formula(rng, depth - 1, bound) + " | " + random_formula(rng, depth - 1, bound) + ")";
    case 3: return "(" + random_formula(rng, depth - 1, bound) + " -> " + random_formula(rng, depth - 1, bound) + ")";
    default: {
      std::string v = "v" + std::to_string(bound.size());
      bound.push_back(v);
      std::string body = random_formula(rng, depth - 1, bound);
      bound.pop_back();
      return std::string("(") + (pick(2) ? "all " : "ex ") + v + " . " + body + ")";
    }
  }
}

oracle::Interp random_interp(std::mt19937_64& rng, std::size_t n) {
  oracle::Interp I;
  I["R"];
  I["S"];
  for (Code i = 0; i < n; ++i) {
    if (rng() & 1) I["R"].insert({i});
    for (Code j = 0; j < n; ++j)
      if (rng() & 1) I["S"].insert({i, j});
  }
  return I;
}

BetaStructure to_structure(const oracle::Interp& I, std::size_t n) {
  BetaStructure m;
  m.n = n;
  for (auto& [r, ts] : I)
    for (auto& t : ts) m.rel[r].insert(std::vector<Code>(t.begin(), t.end()));
  return m;
}

Formula parse(const oracle::CorpusFormula& c) { return parse_formula(c.text, parse_signature(c.rel_decls)); }

}  // namespace

TEST_CASE("formula parser agrees with the text evaluator", "[beta][oracle]") {
  std::mt19937_64 rng(4242);
  Signature sig{{"R", 1}, {"S", 2}};
  for (int round = 0; round < 300; ++round) {
    std::vector<std::string> bound;
    std::string text = random_formula(rng, 3, bound);
    INFO(text);
    Formula f = parse_formula(text, sig);
    CHECK(equal(parse_formula(to_string(f), sig), f));
    oracle::Formula g = oracle::FormulaReader(text).read();
    for (std::size_t n = 2; n <= 3; ++n) {
      auto I = random_interp(rng, n);
      std::map<std::string, std::size_t> env;
      bool want = oracle::holds(g, n, I, env);
      CHECK(eval_in_structure(f, to_structure(I, n)) == want);
      CHECK(eval_in_structure(nnf(f), to_structure(I, n)) == want);
    }
  }
}

TEST_CASE("formula parse errors", "[beta][io]") {
  CHECK_THROWS_AS(parse_formula("all x ."), ParseError);
  CHECK_THROWS_AS(parse_formula("R(c0)", {{"R", 2}}), ParseError);
  CHECK_THROWS_AS(parse_formula("x < c0 &"), ParseError);
  CHECK_THROWS_AS(parse_signature({"R"}), ParseError);
}

TEST_CASE("search closes exactly the valid corpus formulas", "[beta][completeness]") {
  for (const auto& c : corpus()) {
    Formula phi = parse(c);
    for (std::size_t n = c.min_stage; n <= max_stage(c); ++n) {
      INFO(c.text << " at " << n);
      ProofTree t = proof_search(phi, n);
      REQUIRE(t.status != TreeStatus::DepthExhausted);
      CHECK((t.status == TreeStatus::Closed) == oracle::valid_at(c.text, n, c.rels));
      CHECK(check_alpha_proof(t).ok);
    }
  }
}

TEST_CASE("countermodels falsify the formula", "[beta][countermodel]") {
  for (const auto& c : corpus()) {
    Formula phi = parse(c);
    for (std::size_t n = c.min_stage; n <= max_stage(c); ++n) {
      ProofTree t = proof_search(phi, n);
      if (t.status != TreeStatus::OpenBranch) continue;
      INFO(c.text << " at " << n);
      BetaStructure m = extract_countermodel(t);
      CHECK(m.n == n);
      CHECK_FALSE(eval_in_structure(phi, m));
      oracle::Interp I;
      for (auto& [r, ts] : m.rel)
        for (auto& tu : ts) I[r].insert(std::vector<std::size_t>(tu.begin(), tu.end()));
      std::map<std::string, std::size_t> env;
      CHECK_FALSE(oracle::holds(oracle::FormulaReader(c.text).read(), n, I, env));
    }
  }
  ProofTree closed_tree = proof_search(parse_formula("c0 < c1"), 2);
  CHECK_THROWS_AS(extract_countermodel(closed_tree), Error);
}

TEST_CASE("proof functor satisfies its invariants and composes", "[beta][functor]") {
  for (const auto& c : corpus()) {
    Formula phi = parse(c);
    std::size_t top = max_stage(c);
    std::map<std::pair<std::size_t, std::vector<Code>>, ProofTree> image;
    auto at = [&](std::size_t n, const StageMap& f) -> const ProofTree& {
      auto key = std::make_pair(f.m, f.f);
      auto it = image.find(key);
      if (it == image.end()) it = image.emplace(key, proof_search(relabel(phi, f.fn()), f.m)).first;
      return it->second;
    };
    for (std::size_t n = c.min_stage; n <= top; ++n) {
      StageMap idn = StageMap::identity(n);
      const ProofTree& pn = at(n, idn);
      for (std::size_t m = n; m <= top; ++m)
        for (const auto& fv : embeddings(n, m)) {
          StageMap f{fv, m};
          const ProofTree& pm = at(m, f);
          INFO(c.text << " f: " << n << "->" << m);
          ProofEmbedding e = proof_functor(f, pn, pm);
          EmbeddingCheck chk = check_embedding(e, pn, pm);
          CHECK(chk.ok());
          CHECK(chk.failure.empty());
          for (std::size_t k = m; k <= top && k <= m + 1; ++k)
            for (const auto& gv : embeddings(m, k)) {
              StageMap g{gv, k};
              StageMap gf = f.then(g);
              const ProofTree& pk = at(k, gf);
              ProofEmbedding eg = proof_functor(g, pm, pk);
              ProofEmbedding egf = proof_functor(gf, pn, pk);
              for (std::size_t v = 0; v < pn.nodes.size(); ++v) REQUIRE(egf.map[v] == eg.map[e.map[v]]);
            }
        }
    }
  }
}

TEST_CASE("functor rejects mismatched trees", "[beta][functor]") {
  Formula phi = parse_formula("all x . ex y . x < y");
  ProofTree p2 = proof_search(phi, 2), p3 = proof_search(phi, 3);
  CHECK_THROWS_AS(proof_functor(StageMap{{0, 1}, 2}, p2, p3), StructureMismatch);
  CHECK_THROWS_AS(proof_functor(StageMap{{1, 0}, 3}, p2, p3), DomainMismatch);
  Formula psi = parse_formula("c0 < c1");
  CHECK_THROWS_AS(proof_functor(StageMap{{0, 2}, 3}, proof_search(psi, 2), proof_search(psi, 3)), StructureMismatch);
}

TEST_CASE("the checker catches planted defects", "[beta][defect]") {
  ProofTree t = proof_search(parse_formula("all x . ex y . (y <= x & ~(y < x))"), 3);
  REQUIRE(t.status == TreeStatus::Closed);
  REQUIRE(check_alpha_proof(t).ok);

  ProofTree dropped = t;
  bool planted = false;
  for (auto& nd : dropped.nodes)
    if (nd.rule == "n-rule" && nd.kids.size() >= 2) {
      nd.kids.erase(nd.kids.begin() + 1);
      planted = true;
      break;
    }
  REQUIRE(planted);
  AlphaCheck a = check_alpha_proof(dropped);
  CHECK_FALSE(a.ok);
  CHECK(a.failure.find("missing premise \xce\xb9=1") != std::string::npos);

  ProofTree open = proof_search(parse_formula("all x . ex y . x < y"), 3);
  REQUIRE(open.status == TreeStatus::OpenBranch);
  ProofTree forged = open;
  forged.nodes[forged.branch.back()].status = NodeStatus::Axiom;
  forged.nodes[forged.branch.back()].rule = "axiom";
  AlphaCheck b = check_alpha_proof(forged);
  CHECK_FALSE(b.ok);
  CHECK(b.failure.find("forged axiom") != std::string::npos);

  ProofTree wrong = t;
  REQUIRE(wrong.nodes[0].rule == "n-rule");
  wrong.nodes[0].rule = "and";
  AlphaCheck w = check_alpha_proof(wrong);
  CHECK_FALSE(w.ok);
  CHECK(w.failure.find("where n-rule is due") != std::string::npos);
}

TEST_CASE("proof pre-dilator values count the proof tree", "[beta][predilator]") {
  for (const auto& c : corpus()) {
    if (c.has_constants()) continue;
    Formula phi = parse(c);
    DenotationSystem d = proof_predilator(phi);
    const auto& ps = static_cast<const ProofSystem&>(d.impl());
    for (std::size_t n = 0; n <= max_stage(c); ++n) {
      INFO(c.text << " at " << n);
      LinearOrder dn = d->evaluate(fin_order(n));
      REQUIRE(dn.size());
      CHECK(*dn.size() == ps.tree(n).nodes.size());
      const auto& ev = as_evaluated(dn);
      std::set<std::size_t> nodes;
      for (std::size_t i = 0; i < *dn.size(); ++i) nodes.insert(ps.node_of(ev.denotation(i), n));
      CHECK(nodes.size() == *dn.size());
    }
  }
  CHECK_THROWS_AS(proof_predilator(parse_formula("c0 < c1")), DomainMismatch);
}

TEST_CASE("proof pre-dilators obey the laws", "[beta][predilator][laws]") {
  for (const auto& c : corpus()) {
    if (c.has_constants()) continue;
    INFO(c.text);
    LawReport r = check_predilator(proof_predilator(parse(c)), c.rels.empty() ? 4 : 3);
    CHECK(r.ok);
    CHECK(r.failure.empty());
  }
}

TEST_CASE("proof tree json round-trips", "[beta][io]") {
  for (const auto& c : corpus()) {
    Formula phi = parse(c);
    std::size_t n = std::max<std::size_t>(c.min_stage, 2);
    ProofTree t = proof_search(phi, n);
    nlohmann::json j = io::to_json(t);
    ProofTree back = io::proof_tree_from_json(j);
    CHECK(io::to_json(back) == j);
    CHECK(check_alpha_proof(back).ok);
    CHECK(back.status == t.status);
    CHECK(io::to_dot(back) == io::to_dot(t));
  }
}
