// Prints one PASS/FAIL line per acceptance criterion; nonzero exit on any FAIL.
#include <chrono>
#include <iomanip>
#include <iostream>

#include "oracles.hpp"
#include "ptyx/io.hpp"

using namespace ptyx;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

std::vector<std::vector<Code>> permutations(std::size_t n) {
  std::vector<Code> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<Code>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<std::size_t> ranks(const std::vector<Code>& presentation) {
  std::vector<std::size_t> r(presentation.size());
  for (std::size_t i = 0; i < presentation.size(); ++i) r[presentation[i]] = i;
  return r;
}

std::vector<Cnf> cnfs(std::initializer_list<const char*> g) {
  std::vector<Cnf> out;
  for (auto s : g) out.push_back(parse_cnf(s));
  return out;
}

TheoryStream stream_of(const std::vector<std::string>& pos, const std::vector<std::string>& neg = {}) {
  TheoryStream s;
  for (auto& p : pos) s.positive.push_back({io::parse_dilator(p), std::nullopt});
  for (auto& n : neg) s.negative.push_back({io::parse_dilator(n), std::nullopt});
  return s;
}

const auto& corpus() {
  static auto c = oracle::load_corpus(PTYX_FIXTURES "/corpus.json");
  return c;
}

beta::Formula parse(const oracle::CorpusFormula& c) {
  return beta::parse_formula(c.text, beta::parse_signature(c.rel_decls));
}

std::size_t top_stage(const oracle::CorpusFormula& c) { return c.rels.empty() ? 4 : 3; }

Outcome kb_trees() {
  Outcome o;
  std::mt19937_64 rng(1);
  std::size_t pairs = 0;
  for (int round = 0; round < 200; ++round) {
    std::size_t n = 1 + rng() % 25;
    auto nodes = oracle::random_tree(rng, n);
    LinearOrder ord = kb_order(Tree(nodes));
    const auto& kb = static_cast<const KbOrder&>(ord.impl());
    for (Code a = 0; a < n; ++a)
      for (Code b = 0; b < n; ++b, ++pairs)
        if (ord.less(a, b) != oracle::kb_less(kb.node(a), kb.node(b))) o.fail("kb order disagrees on tree " + std::to_string(round));
    Budget bud(1u << 22);
    if (ord.find_chain(n + 1, bud).status != Search::None) o.fail("chain of length nodes+1 not refuted");
  }
  if (o.ok) o.detail = "200 trees, " + std::to_string(pairs) + " pairs";
  return o;
}

Outcome impl_characterization() {
  Outcome o;
  std::size_t cases = 0;
  for (std::size_t k = 0; k <= 5; ++k)
    for (const auto& pa : permutations(k))
      for (std::size_t n = 0; n <= 5; ++n)
        for (const auto& px : permutations(n)) {
          ++cases;
          DenotationSystem d = implication_dilator(fin_order(pa), omega_star());
          LinearOrder e = d->evaluate(fin_order(px));
          Budget b(1u << 24);
          DenChain c = as_evaluated(e).find_den_chain(k + 3, b);
          bool emb = oracle::embeds(ranks(pa), ranks(px));
          if (c.status == Search::Exhausted) o.fail("search exhausted at |a|=" + std::to_string(k));
          else if ((c.status == Search::Found) != emb) o.fail("mismatch at |a|=" + std::to_string(k) + " |x|=" + std::to_string(n));
          else if (c.status == Search::Found && !as_evaluated(e).is_descending(c.chain)) o.fail("chain not descending");
        }
  if (o.ok) o.detail = std::to_string(cases) + " (a, x) presentations";
  return o;
}

Outcome e_embedding() {
  Outcome o;
  for (const char* bs : {"ws", "fin:[0,1,2,3,4]", "sum(fin:[0,1,2],ws)"})
    for (const char* as : {"fin:[0,1,2]", "cnf:w"}) {
      LinearOrder b = io::parse_order(bs);
      DenotationSystem d = implication_dilator(io::parse_order(as), b);
      auto img = embed_into_implication(d, 20);
      LinearOrder da = d->evaluate(io::parse_order(as));
      const auto& ev = as_evaluated(da);
      auto pre = b.prefix(img.size());
      for (std::size_t i = 0; i < img.size(); ++i) {
        if (!ev.well_formed(img[i])) o.fail(std::string("image outside D(a) for b=") + bs);
        for (std::size_t j = 0; j < img.size(); ++j)
          if (b.compare(pre[i], pre[j]) != ev.compare_den(img[i], img[j])) o.fail(std::string("order broken for b=") + bs);
      }
      if (img.size() != std::min<std::size_t>(20, b.size().value_or(20))) o.fail("short image");
    }
  if (o.ok) o.detail = "3 orders b, 2 orders a";
  return o;
}

Outcome law_suite() {
  Outcome o;
  LinearOrder two = fin_order(2);
  std::vector<DenotationSystem> ds{
      id_system(),
      constant(two),
      constant(omega_star()),
      exp_omega(),
      implication_dilator(two, omega_star()),
      implication_dilator(cnf_order(parse_cnf("w")), fin_order({1, 0})),
      sum_systems(id_system(), constant(two)),
      sum_systems(exp_omega(), id_system()),
      omega_sum({id_system(), constant(two), exp_omega()}, 3),
      compose(exp_omega(), sum_systems(id_system(), id_system())),
      compose(implication_dilator(two, omega_star()), exp_omega()),
      io::parse_dilator("rcopy(@" PTYX_FIXTURES "/certs.json)"),
  };
  for (const auto& c : corpus())
    if (!c.has_constants()) ds.push_back(beta::proof_predilator(parse(c)));
  std::size_t emb = 0;
  for (const auto& d : ds) {
    LawReport r = check_predilator(d, 4);
    emb += r.embeddings_checked;
    if (!r.ok) o.fail(d.expr() + ": " + r.failure);
  }
  if (o.ok) o.detail = std::to_string(ds.size()) + " systems, " + std::to_string(emb) + " embeddings";
  return o;
}

Outcome completeness() {
  Outcome o;
  std::size_t runs = 0;
  for (const auto& c : corpus()) {
    beta::Formula phi = parse(c);
    for (std::size_t n = c.min_stage; n <= top_stage(c); ++n, ++runs) {
      beta::ProofTree t = beta::proof_search(phi, n);
      bool valid = oracle::valid_at(c.text, n, c.rels);
      if (t.status == beta::TreeStatus::DepthExhausted) o.fail("search cut off on " + c.text);
      else if ((t.status == beta::TreeStatus::Closed) != valid) o.fail("wrong verdict on " + c.text);
      if (!beta::check_alpha_proof(t).ok) o.fail("tree fails the checker on " + c.text);
      if (t.status == beta::TreeStatus::OpenBranch && beta::eval_in_structure(phi, beta::extract_countermodel(t)))
        o.fail("countermodel satisfies " + c.text);
    }
  }
  if (o.ok) o.detail = std::to_string(corpus().size()) + " formulas, " + std::to_string(runs) + " stages";
  return o;
}

Outcome functoriality() {
  Outcome o;
  std::size_t maps = 0;
  for (const auto& c : corpus()) {
    beta::Formula phi = parse(c);
    std::size_t top = top_stage(c);
    std::map<std::vector<Code>, beta::ProofTree> trees;
    auto tree = [&](const beta::StageMap& f) -> const beta::ProofTree& {
      std::vector<Code> key = f.f;
      key.push_back(f.m);
      auto it = trees.find(key);
      if (it == trees.end()) it = trees.emplace(key, beta::proof_search(beta::relabel(phi, f.fn()), f.m)).first;
      return it->second;
    };
    for (std::size_t n = c.min_stage; n <= top; ++n) {
      const auto& pn = tree(beta::StageMap::identity(n));
      for (std::size_t m = n; m <= top; ++m)
        for (const auto& fv : embeddings(n, m)) {
          beta::StageMap f{fv, m};
          const auto& pm = tree(f);
          auto e = beta::proof_functor(f, pn, pm);
          ++maps;
          auto chk = beta::check_embedding(e, pn, pm);
          if (!chk.ok()) o.fail(c.text + ": " + chk.failure);
          for (std::size_t k = m; k <= top; ++k)
            for (const auto& gv : embeddings(m, k)) {
              beta::StageMap g{gv, k};
              beta::StageMap gf = f.then(g);
              const auto& pk = tree(gf);
              auto eg = beta::proof_functor(g, pm, pk);
              auto egf = beta::proof_functor(gf, pn, pk);
              for (std::size_t v = 0; v < pn.nodes.size(); ++v)
                if (egf.map[v] != eg.map[e.map[v]]) o.fail(c.text + ": P(g o f) != P(g) o P(f)");
            }
        }
    }
  }
  if (o.ok) o.detail = std::to_string(maps) + " stage maps";
  return o;
}

std::vector<std::string> planted_pool() {
  return {"id", "expw", "const(fin:[0,1])", "impl(cnf:w,ws)", "impl(cnf:w^2,ws)", "impl(cnf:w^w,ws)",
          "const(ws)", "comp(expw,expw)", "impl(fin:[0,1,2],ws)", "sum(id,const(fin:[0]))"};
}

Outcome permutation_invariance() {
  Outcome o;
  auto pool = planted_pool();
  auto grid = cnfs({"0", "1", "3", "w", "w+1", "w^2", "w^w", "w^w^w"});
  std::mt19937_64 rng(2);
  std::size_t perms = 0;
  for (int s = 0; s < 20; ++s) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::string> entries;
    std::size_t len = 1 + rng() % 4;
    for (std::size_t i = 0; i < len; ++i) entries.push_back(pool[idx[i]]);
    ProbeReport base = o12_probe(stream_of(entries), grid);
    if (base.undecided) o.fail("undecided probe on planted stream " + std::to_string(s));
    std::sort(entries.begin(), entries.end());
    do {
      ++perms;
      ProbeReport p = o12_probe(stream_of(entries), grid);
      bool same = p.witness.has_value() == base.witness.has_value() && (!p.witness || p.witness->alpha == base.witness->alpha);
      if (!same) o.fail("least witness moves under permutation on stream " + std::to_string(s));
    } while (std::next_permutation(entries.begin(), entries.end()));
  }
  if (o.ok) o.detail = "20 streams, " + std::to_string(perms) + " orderings";
  return o;
}

Outcome classifier() {
  Outcome o;
  auto grid = cnfs({"1", "2", "w", "w+1", "w*2", "w^2", "w^2+1", "w^3", "w^w", "w^w+1", "w^w^w"});
  std::vector<std::string> fillers{"id", "expw", "const(fin:[0,1])"};
  for (std::size_t pos = 0; pos <= fillers.size(); ++pos) {
    auto a = fillers;
    a.insert(a.begin() + pos, "const(ws)");
    CategoryVerdict v = classify(stream_of(a), grid);
    if (v.category != Category::A || !v.evidence.witness->alpha.is_zero()) o.fail("planted constant not classified A");
  }
  for (const char* t : {"w", "w^2", "w^w"})
    for (std::size_t pos = 0; pos <= fillers.size(); ++pos) {
      auto b = fillers;
      b.insert(b.begin() + pos, std::string("impl(cnf:") + t + ",ws)");
      CategoryVerdict v = classify(stream_of(b), grid);
      if (v.category != Category::B) o.fail(std::string("planted ") + t + " not classified B");
      else if (v.evidence.witness->alpha != parse_cnf(t)) o.fail(std::string("least witness is not ") + t);
    }
  if (o.ok) o.detail = "A with 4 placements, B for w, w^2, w^w with 4 placements each";
  return o;
}

Outcome cnf_oracle() {
  Outcome o;
  auto es = oracle::exprs_up_to(4);
  std::vector<Cnf> lib;
  std::vector<oracle::Ord> ref;
  for (auto& e : es) {
    lib.push_back(parse_cnf(oracle::text(e)));
    ref.push_back(oracle::value(e));
    if (to_string(lib.back()) != oracle::show(ref.back())) o.fail("value of " + oracle::text(e));
  }
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (to_string(cnf_omega_pow(lib[i])) != oracle::show(oracle::wpow(ref[i]))) o.fail("w^" + oracle::text(es[i]));
    for (std::size_t j = 0; j < es.size(); ++j) {
      int c = oracle::cmp(ref[i], ref[j]);
      if (compare(lib[i], lib[j]) != (c < 0 ? Cmp::LT : c > 0 ? Cmp::GT : Cmp::EQ)) o.fail("compare");
      if (to_string(cnf_add(lib[i], lib[j])) != oracle::show(oracle::add(ref[i], ref[j]))) o.fail("add");
    }
  }
  if (o.ok) o.detail = std::to_string(es.size()) + " notations";
  return o;
}

Outcome s12_below_o12() {
  Outcome o;
  auto grid = cnfs({"0", "1", "2", "3", "w", "w+1", "w*2", "w^2", "w^w", "w^w^w"});
  for (int i = 1; i <= 6; ++i) {
    std::string name = "p" + std::to_string(i);
    TheoryStream s = io::load_stream("@" PTYX_FIXTURES "/paired/" + name + ".json");
    ProbeReport p = o12_probe(s, grid);
    S12Report r = s12_probe(s, grid);
    if (!p.witness) o.fail(name + ": no o12 witness");
    else if (r.sup && p.witness->alpha < *r.sup) o.fail(name + ": s12 exceeds o12");
  }
  if (o.ok) o.detail = "6 paired streams";
  return o;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kb order vs brute force", kb_trees},
      {"implication dilator vs injection oracle", impl_characterization},
      {"embedding e into the implication value", e_embedding},
      {"pre-dilator law suite", law_suite},
      {"beta completeness on the corpus", completeness},
      {"proof functoriality", functoriality},
      {"o12 permutation invariance", permutation_invariance},
      {"category classifier", classifier},
      {"cnf arithmetic vs rewriting oracle", cnf_oracle},
      {"s12 <= o12 on paired streams", s12_below_o12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " (" << o.detail
              << ", " << std::fixed << std::setprecision(2) << secs << "s)\n";
  }
  return failed ? 1 : 0;
}
