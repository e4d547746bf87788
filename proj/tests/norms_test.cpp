#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "ptyx/cli.hpp"

using namespace ptyx;
using nlohmann::json;

namespace {

const std::string F = PTYX_FIXTURES;

TheoryStream stream_of(std::vector<std::string> pos, std::vector<std::string> neg = {}) {
  TheoryStream s;
  for (auto& p : pos) s.positive.push_back({io::parse_dilator(p), std::nullopt});
  for (auto& n : neg) s.negative.push_back({io::parse_dilator(n), std::nullopt});
  return s;
}

std::vector<Cnf> grid(std::initializer_list<const char*> g) {
  std::vector<Cnf> out;
  for (auto s : g) out.push_back(parse_cnf(s));
  return out;
}

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream o, e;
  int c = cli::run(std::move(args), o, e);
  return {c, o.str(), e.str()};
}

const oracle::SchemaValidator& output_schema() {
  static oracle::SchemaValidator v(oracle::read_json(PTYX_SCHEMAS "/ptyx-output.schema.json"));
  return v;
}

}  // namespace

TEST_CASE("o12 on single-entry streams", "[norms]") {
  auto g = grid({"0", "1", "5", "w", "w*5", "w^2", "w^3", "w^w", "w^w^w"});
  CHECK_FALSE(o12_probe(stream_of({"id"}), g).witness);
  CHECK_FALSE(o12_probe(stream_of({"expw"}), g).witness);
  CHECK_FALSE(o12_probe(stream_of({"id"}), g).undecided);
  auto c = o12_probe(stream_of({"const(ws)"}), g);
  REQUIRE(c.witness);
  CHECK(c.witness->alpha.is_zero());
  auto i = o12_probe(stream_of({"impl(cnf:w^w,ws)"}), g);
  REQUIRE(i.witness);
  CHECK(i.witness->alpha == parse_cnf("w^w"));
  CHECK(i.witness->chain.size() == 8);
  for (const char* a : {"w*5", "w^2", "w^3"})
    CHECK_FALSE(o12_probe(stream_of({"impl(cnf:w^w,ws)"}), grid({a})).witness);
}

TEST_CASE("s12 takes the sup of negative minima", "[norms]") {
  auto g = grid({"0", "1", "w", "w^2", "w^w"});
  auto s = s12_probe(stream_of({}, {"impl(cnf:w,ws)"}), g);
  REQUIRE(s.sup);
  CHECK(*s.sup == parse_cnf("w"));
  auto t = s12_probe(stream_of({}, {"impl(cnf:w,ws)", "id", "impl(cnf:w^2,ws)"}), g);
  REQUIRE(t.minima.size() == 3);
  CHECK_FALSE(t.minima[1]);
  CHECK(*t.sup == parse_cnf("w^2"));
  CHECK_FALSE(s12_probe(stream_of({"id"}), g).sup);
}

TEST_CASE("epsilon fixture classifies B at the top of the tower", "[norms]") {
  TheoryStream s = io::load_stream("@" + F + "/epsilon.json");
  auto v = classify(s, grid({"w", "w^w", "w^w^w"}));
  CHECK(v.category == Category::B);
  REQUIRE(v.evidence.witness);
  CHECK(v.evidence.witness->alpha == parse_cnf("w^w^w"));
}

TEST_CASE("ordinal relation on two identities at 3", "[norms]") {
  RelationReport r = check_ordinal_relation(stream_of({"id", "id"}), 2, fin_order(3));
  CHECK(r.ok);
  CHECK(r.pairs_checked == 15);
  CHECK(r.iso.size() == 6);
  RelationReport w = check_ordinal_relation(stream_of({"expw", "const(fin:[0,1])", "id"}), 3, cnf_order(parse_cnf("w")));
  CHECK(w.ok);
  CHECK_THROWS_AS(check_ordinal_relation(stream_of({"id"}), 2, fin_order(2)), StreamExhausted);
}

TEST_CASE("o12 is invariant under permuting the positive list", "[norms][property]") {
  std::vector<std::string> pool{"id", "expw", "impl(cnf:w,ws)", "impl(cnf:w^2,ws)", "impl(cnf:w^w,ws)",
                                "const(fin:[0,1])", "impl(fin:[0,1,2],ws)", "comp(expw,id)"};
  auto g = grid({"0", "2", "w", "w^2", "w^w", "w^w^w"});
  std::mt19937_64 rng(99);
  for (int round = 0; round < 15; ++round) {
    std::vector<std::string> pick;
    std::size_t n = 1 + rng() % 4;
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n; ++i) pick.push_back(pool[idx[i]]);
    auto base = o12_probe(stream_of(pick), g);
    std::sort(pick.begin(), pick.end());
    do {
      auto p = o12_probe(stream_of(pick), g);
      REQUIRE(p.witness.has_value() == base.witness.has_value());
      if (p.witness) CHECK(p.witness->alpha == base.witness->alpha);
    } while (std::next_permutation(pick.begin(), pick.end()));
  }
}

TEST_CASE("o12 is monotone in the stream and the grid", "[norms][property]") {
  auto g = grid({"w", "w^2", "w^w"});
  auto small = o12_probe(stream_of({"impl(cnf:w^w,ws)"}), g);
  auto big = o12_probe(stream_of({"impl(cnf:w^w,ws)", "impl(cnf:w^2,ws)"}), g);
  REQUIRE(small.witness);
  REQUIRE(big.witness);
  CHECK(big.witness->alpha <= small.witness->alpha);
  auto finer = o12_probe(stream_of({"impl(cnf:w^w,ws)"}), grid({"w", "w^2", "w^3", "w^w", "w^w+1"}));
  CHECK(finer.witness->alpha == small.witness->alpha);
}

TEST_CASE("classifier on the category fixtures", "[norms]") {
  auto a = classify(io::load_stream("@" + F + "/catA.json"), grid({"w"}));
  CHECK(a.category == Category::A);
  auto b = classify(io::load_stream("@" + F + "/catB.json"), grid({"w", "w^2", "w^w"}));
  CHECK(b.category == Category::B);
  CHECK(b.evidence.witness->alpha == parse_cnf("w^2"));
  CHECK(b.evidence.witness->index == 1);
  auto c = classify(stream_of({"id", "expw"}), grid({"w", "w^w"}));
  CHECK(c.category == Category::CorD);
  CHECK(std::string(to_string(c.category)) == "C-or-D-indistinguishable");
}

TEST_CASE("s12 never exceeds o12 on the paired fixtures", "[norms]") {
  auto g = grid({"0", "1", "2", "3", "w", "w+1", "w*2", "w^2", "w^w", "w^w^w"});
  for (int i = 1; i <= 6; ++i) {
    TheoryStream s = io::load_stream("@" + F + "/paired/p" + std::to_string(i) + ".json");
    INFO("p" << i);
    auto o = o12_probe(s, g);
    auto r = s12_probe(s, g);
    REQUIRE(o.witness);
    if (r.sup) CHECK(*r.sup <= o.witness->alpha);
  }
}

TEST_CASE("streams reject duplicates and unknown keys", "[norms][io]") {
  CHECK_THROWS_AS(io::load_stream(R"({"positive":["id","id"],"negative":[]})"), Error);
  CHECK_THROWS_AS(io::load_stream(R"({"positive":["id"],"extra":1})"), Error);
  TheoryStream c = io::load_stream("@" + F + "/certs.json");
  CHECK(c.has_certificates(3));
  CHECK(pi12_prefix(c, 3).expr() == "rcopy(@" + F + "/certs.json)");
  CHECK_THROWS_AS(pi12_prefix(c, 4), StreamExhausted);
}

TEST_CASE("epsilon closure rows agree", "[norms]") {
  EpsilonReport r = epsilon_closure_check(io::parse_dilator("impl(cnf:w^w,ws)"), parse_cnf("w"), {}, 2);
  CHECK(r.consistent);
  CHECK(r.rows.size() == 3 * 3);
  CHECK(tower_value(2, parse_cnf("w")) == parse_cnf("w^w^w"));
}

// ---------------------------------------------------------------------------
// The command line.

TEST_CASE("cli examples", "[cli]") {
  Run kb = invoke({"ord", "kb", "--tree", "@" + F + "/t.json", "--list", "10"});
  CHECK(kb.code == 0);
  CHECK(kb.out.find("(0,0) < (0,1) < (0) < (1,0,0) < (1,0) < (1) < (2) < ()") != std::string::npos);
  Run bs = invoke({"beta", "search", "--formula", "all x . ~(x < c0)", "--stage", "3"});
  CHECK(bs.code == 0);
  CHECK(bs.out.find("closed") != std::string::npos);
  CHECK(bs.out.find("n-rule with 3 premises") != std::string::npos);
  Run cl = invoke({"norm", "classify", "--stream", "@" + F + "/catA.json", "--grid", "cnf:0"});
  CHECK(cl.code == 0);
  CHECK(cl.out.find("category: A") != std::string::npos);
}

TEST_CASE("cli json output validates and is deterministic", "[cli][schema]") {
  std::string t = "@" + F + "/t.json", a = "@" + F + "/catA.json", b = "@" + F + "/catB.json";
  std::vector<std::vector<std::string>> cmds{
      {"ord", "eval", "--order", "cnf:w^2"},
      {"ord", "kb", "--tree", t},
      {"ord", "kb", "--random", "12"},
      {"ord", "compare", "--order", "ws", "--x", "1", "--y", "3"},
      {"ord", "chain", "--order", "sum(fin:[0,1],ws)", "--depth", "5"},
      {"ord", "embed", "--from", "fin:[1,0,2]", "--into", "cnf:w"},
      {"ord", "disj", "--left", "cnf:w", "--right", "ws"},
      {"dil", "eval", "--dilator", "impl(fin:[0,1],ws)", "--order", "fin:[0,1,2]"},
      {"dil", "check", "--dilator", "sum(id,expw)", "--n-max", "3"},
      {"dil", "map", "--dilator", "expw", "--level", "2", "--index", "3", "--embedding", "0,2"},
      {"dil", "compose", "--outer", "expw", "--inner", "id", "--n-max", "2"},
      {"dil", "sum", "--left", "id", "--right", "const(fin:[0])", "--n-max", "2"},
      {"dil", "impl", "--a", "fin:[0,1]", "--b", "ws", "--order", "fin:[0,1]", "--e", "6"},
      {"dil", "rcopy", "--stream", "@" + F + "/certs.json", "--n-max", "2"},
      {"beta", "search", "--formula", "all x . ex y . x < y", "--stage", "2"},
      {"beta", "functor", "--formula", "all x . ~(x < c0)", "--stage", "1", "--to", "3", "--embedding", "0"},
      {"beta", "countermodel", "--formula", "all x . ex y . x < y", "--stage", "2"},
      {"beta", "predilator", "--formula", "all x . ex y . x < y", "--n-max", "2"},
      {"norm", "prefix", "--stream", b, "--k", "2", "--order", "fin:[0,1]"},
      {"--grid", "cnf:w,cnf:w^2", "norm", "o12", "--stream", b},
      {"--grid", "cnf:w,cnf:w^w", "norm", "s12", "--stream", "@" + F + "/paired/p1.json"},
      {"--grid", "cnf:0", "norm", "classify", "--stream", a},
      {"norm", "relation", "--stream", R"({"positive":["id","expw"]})", "--k", "2", "--order", "fin:[0,1,2]"},
      {"norm", "epsilon", "--dilator", "impl(cnf:w,ws)", "--alpha", "w"},
  };
  std::set<std::string> seen;
  for (auto args : cmds) {
    args.insert(args.begin(), {"--format", "json"});
    std::string shown;
    for (auto& s : args) shown += s + " ";
    INFO(shown);
    Run r = invoke(args);
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(output_schema().validate(j) == "");
    CHECK(j["exit"] == 0);
    seen.insert(j["command"].get<std::string>());
    CHECK(invoke(args).out == r.out);
    for (const char* key : {"order", "at", "from", "into"})
      if (j.contains(key) && j[key].is_string()) CHECK(io::parse_order(j[key]).expr() == j[key]);
    if (j.contains("dilator") && j["dilator"].is_string())
      CHECK(io::parse_dilator(j["dilator"]).expr() == j["dilator"]);
  }
  CHECK(seen.size() == 23);  // beta check needs a tree, see below
}

TEST_CASE("beta check accepts search output", "[cli]") {
  Run s = invoke({"--format", "json", "beta", "search", "--formula", "all x . ex y . (y <= x & ~(y < x))", "--stage", "2"});
  REQUIRE(s.code == 0);
  Run c = invoke({"--format", "json", "beta", "check", "--tree", s.out});
  CHECK(c.code == 0);
  json j = json::parse(c.out);
  CHECK(output_schema().validate(j) == "");
  json bad = json::parse(s.out);
  bad["tree"]["nodes"][0]["rule"] = "and";
  CHECK(invoke({"beta", "check", "--tree", bad.dump()}).code == 1);
}

TEST_CASE("cli dot output", "[cli]") {
  Run d = invoke({"--format", "dot", "beta", "search", "--formula", "all x . ~(x < c0)", "--stage", "2"});
  CHECK(d.code == 0);
  CHECK(d.out.rfind("digraph", 0) == 0);
  CHECK(invoke({"--format", "dot", "ord", "eval", "--order", "ws"}).code == 2);
}

TEST_CASE("cli exit codes", "[cli]") {
  CHECK(invoke({"dil", "check", "--dilator", "table(@" + F + "/table_asym.json)"}).code == 1);
  CHECK(invoke({"beta", "countermodel", "--formula", "c0 < c1", "--stage", "2"}).code == 1);
  Run u = invoke({"ord", "eval", "--order", "sum(ws"});
  CHECK(u.code == 2);
  CHECK(u.err.find("order-sum") != std::string::npos);
  CHECK(invoke({"ord", "bogus"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"norm", "prefix", "--stream", "@" + F + "/catA.json", "--k", "5"}).code == 2);
  std::string tight = R"j({"positive":["impl(cnf:w,sum(fin:[0],ws))"]})j";
  CHECK(invoke({"--grid", "cnf:w", "--budget-nodes", "1", "norm", "o12", "--stream", tight}).code == 0);
  CHECK(invoke({"--budget-nodes", "2", "ord", "embed", "--from", "fin:[0,1,2,3]", "--into", "kb:[[],[0],[1],[2],[3]]"}).code ==
        3);
}
