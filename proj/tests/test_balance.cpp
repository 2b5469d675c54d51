#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "lmu/balance.hpp"

using namespace lmu;
using namespace fixtures;

TEST_CASE("similarity enumeration") {
  auto net = token_ring(3);

  SECTION("identity is always present") {
    for (NodeId n = 0; n < 3; ++n) {
      auto sims = enumerate_similarities(net, n, n);
      bool has_id = false;
      for (auto& s : sims)
        if (s.port_map == std::vector<int>{0, 1}) has_id = true;
      CHECK(has_id);
    }
  }

  SECTION("uniform ring nodes: exactly the port-respecting map") {
    auto sims = enumerate_similarities(net, 0, 1);
    REQUIRE(sims.size() == 1);
    CHECK(sims[0].port_map == std::vector<int>{0, 1});
    // the In/Out-crossing map has compatible modes here (both readwrite)
    // but fails the semantic process-isomorphism check
  }

  SECTION("different degrees yield nothing") {
    ProcessNetwork net2;
    net2.name = "mixed";
    auto tok = tok_domain();
    auto phil = phil_template();
    net2.edges.push_back({"e0", tok, {}});
    net2.edges.push_back({"e1", tok, {}});
    NodeDecl a{"a", phil, {0, 1}};
    NodeDecl b{"b", phil, {1, 0}};
    NodeDecl c{"c", empty_template(), {}};
    net2.nodes = {a, b, c};
    net2.edges[0].ends = {{0, 0}, {1, 1}};
    net2.edges[1].ends = {{0, 1}, {1, 0}};
    net2.finalize();
    CHECK(enumerate_similarities(net2, 0, 2).empty());
  }
}

TEST_CASE("largest balance on the uniform 3-ring relates all pairs") {
  auto net = token_ring(3);
  auto B = largest_balance(net);
  CHECK(B.triples.size() == 9);  // one triple per ordered pair
  CHECK(is_balance_relation(net, B));
  CHECK(B.classes(3).size() == 1);
}

TEST_CASE("single node without edges balances with itself") {
  auto net = isolated_node();
  auto B = largest_balance(net);
  REQUIRE(B.triples.size() == 1);
  CHECK(B.triples[0].m == 0);
  CHECK(B.triples[0].n == 0);
}

TEST_CASE("identity-only relation is always valid") {
  auto net = token_ring(4);
  BalanceRelation B;
  for (NodeId n = 0; n < 4; ++n) B.triples.push_back(Similarity::identity(n, 2));
  B.canonicalize();
  CHECK(is_balance_relation(net, B));
}

TEST_CASE("output of largest_balance validates") {
  auto net = token_ring(5);
  auto B = largest_balance(net);
  CHECK(is_balance_relation(net, B));
  CHECK(B.classes(5).size() == 1);
}

TEST_CASE("ring node against a chain-end node: pointing violation") {
  // a 3-ring plus a 2-chain with dangling boundary edges
  auto phil = phil_template();
  auto tok = tok_domain();
  ProcessNetwork net;
  net.name = "ring_plus_chain";
  for (int i = 0; i < 3; ++i) net.edges.push_back({"e" + std::to_string(i), tok, {}});
  for (int i = 0; i < 3; ++i) {
    NodeDecl nd{"p" + std::to_string(i), phil, {i, (i + 1) % 3}};
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % 3].ends.emplace_back(i, 1);
  }
  for (int i = 0; i < 3; ++i) net.edges.push_back({"c" + std::to_string(i), tok, {}});
  NodeDecl q0{"q0", phil, {3, 4}};
  NodeDecl q1{"q1", phil, {4, 5}};
  net.nodes.push_back(q0);
  net.nodes.push_back(q1);
  net.edges[3].ends = {{3, 0}};
  net.edges[4].ends = {{3, 1}, {4, 0}};
  net.edges[5].ends = {{4, 1}};
  net.finalize();

  // candidate: relate ring node p0 with chain node q1 (plus inverse)
  BalanceRelation cand;
  Similarity s;
  s.m = 0;
  s.n = 4;
  s.port_map = {0, 1};
  cand.triples = {s, s.inverse()};
  cand.canonicalize();
  auto v = balance_violation(net, cand);
  REQUIRE(v.has_value());
  CHECK(v->reason == "pointing condition fails");
  REQUIRE(v->unmatched_pointer.has_value());

  // and the largest balance never mixes ring and chain nodes
  auto B = largest_balance(net);
  for (auto& t : B.triples) {
    bool ring_m = t.m < 3, ring_n = t.n < 3;
    CHECK(ring_m == ring_n);
  }
}

TEST_CASE("representatives and gamma transfer") {
  auto net = token_ring(3);
  auto B = largest_balance(net);
  auto scheme = representatives(net, B);
  REQUIRE(scheme.classes.size() == 1);
  CHECK(scheme.classes[0] == std::vector<NodeId>{0, 1, 2});
  for (NodeId n = 0; n < 3; ++n) {
    CHECK(scheme.rep_of[n] == 0);
    CHECK(scheme.gamma[n].m == 0);
    CHECK(scheme.gamma[n].n == n);
  }
  CHECK(scheme.gamma[0].port_map == std::vector<int>{0, 1});

  SECTION("identity-only balance: every node its own class") {
    BalanceRelation I;
    for (NodeId n = 0; n < 3; ++n) I.triples.push_back(Similarity::identity(n, 2));
    I.canonicalize();
    auto si = representatives(net, I);
    CHECK(si.classes.size() == 3);
  }

  SECTION("invalid relation is rejected") {
    BalanceRelation bad;
    Similarity s;
    s.m = 0;
    s.n = 1;
    s.port_map = {0, 1};
    bad.triples = {s};  // inverse missing
    CHECK_THROWS_AS(representatives(net, bad), ModelError);
  }
}

TEST_CASE("communication relation shapes") {
  auto ring3 = token_ring(3);
  auto cr3 = communication_relation(ring3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(cr3.edge(a, b) == (a != b));

  auto iso = isolated_node();
  auto cri = communication_relation(iso);
  CHECK(cri.num_nodes == 1);

  auto ring4 = token_ring(4);
  auto cr4 = communication_relation(ring4);
  for (int a = 0; a < 4; ++a) {
    CHECK(cr4.degree(a) == 2);
    CHECK(cr4.edge(a, (a + 1) % 4));
    CHECK(!cr4.edge(a, (a + 2) % 4));
  }
}

TEST_CASE("automorphism counts of small graphs") {
  auto triangle = communication_relation(token_ring(3));
  CHECK(find_automorphisms(triangle).size() == 6);  // S3

  auto c4 = communication_relation(token_ring(4));
  CHECK(find_automorphisms(c4).size() == 8);  // dihedral D4

  CommunicationRelation path;
  path.num_nodes = 3;
  path.adj = {{false, true, false}, {true, false, true}, {false, true, false}};
  CHECK(find_automorphisms(path).size() == 2);

  CommunicationRelation big;
  big.num_nodes = 11;
  big.adj.assign(11, std::vector<bool>(11, false));
  CHECK_THROWS_AS(find_automorphisms(big), CapError);
}

TEST_CASE("balance from automorphisms of CR") {
  auto net = token_ring(4);

  SECTION("rotation by one") {
    std::vector<int> rot = {1, 2, 3, 0};
    auto triples = balance_from_automorphism(net, rot);
    BalanceRelation B;
    B.triples = triples;
    B.canonicalize();
    CHECK(is_balance_relation(net, B));
    bool found = false;
    for (auto& t : triples)
      if (t.m == 0 && t.n == 1) found = true;
    CHECK(found);
  }

  SECTION("identity permutation yields identity similarities") {
    std::vector<int> id = {0, 1, 2, 3};
    auto triples = balance_from_automorphism(net, id);
    for (auto& t : triples) CHECK(t.m == t.n);
  }

  SECTION("reflection is a CR automorphism but not liftable on a directed ring") {
    std::vector<int> refl = {0, 3, 2, 1};
    CHECK_THROWS_AS(balance_from_automorphism(net, refl), ModelError);
  }

  SECTION("non-automorphism rejected") {
    ProcessNetwork net2 = token_ring(3);
    NodeDecl extra{"x", empty_template(), {}};
    net2.nodes.push_back(extra);
    net2.finalize();
    std::vector<int> swap = {3, 1, 2, 0};  // swaps a ring node with the isolate
    CHECK_THROWS_AS(balance_from_automorphism(net2, swap), ModelError);
  }
}

TEST_CASE("automorphism-induced balance is contained in the largest") {
  auto net = token_ring(4);
  REQUIRE(is_normal(net));
  auto L = largest_balance(net);
  auto cr = communication_relation(net);
  for (auto& pi : find_automorphisms(cr)) {
    std::vector<Similarity> triples;
    try {
      triples = balance_from_automorphism(net, pi);
    } catch (const ModelError&) {
      continue;  // reflections are not liftable here
    }
    for (auto& t : triples) CHECK(L.contains(t));
  }
}

TEST_CASE("normal form detection") {
  CHECK(is_normal(token_ring(3)));

  // guard coupling two neighbors' variables in one atom
  auto st = std::make_shared<Domain>(Domain{"St", {"T", "H", "E"}});
  auto tok = tok_domain();
  ProcessTemplate t;
  t.name = "Coupled";
  t.internals = {{"state", st, false, PortMode::ReadWrite}};
  t.ports = {{"xin", tok, true, PortMode::ReadWrite}, {"xout", tok, true, PortMode::ReadWrite}};
  t.init = BoolExpr::eq(0, 0);
  t.commands.push_back({"both", BoolExpr::disj({BoolExpr::eq(1, 1), BoolExpr::eq(2, 1)}), {{0, true, 1, -1}}});
  auto net = token_ring(3, std::make_shared<ProcessTemplate>(std::move(t)));
  CHECK(!is_normal(net));

  // no commands is vacuously normal
  auto quiet = std::make_shared<ProcessTemplate>(*phil_template());
  const_cast<ProcessTemplate&>(*quiet).commands.clear();
  CHECK(is_normal(token_ring(3, quiet)));
}

TEST_CASE("groupoid laws for the largest balance") {
  for (int n : {3, 4}) {
    auto net = token_ring(n);
    auto B = largest_balance(net);
    for (auto& t : B.triples) CHECK(B.contains(t.inverse()));
    for (auto& a : B.triples)
      for (auto& b : B.triples)
        if (a.n == b.m) CHECK(B.contains(a.compose(b)));
  }
}

TEST_CASE("maximality: re-adding a deleted similarity fails validation") {
  // open chain where end nodes are not balanced with the middle node
  auto phil = phil_template();
  auto tok = tok_domain();
  ProcessNetwork net;
  net.name = "chain3";
  for (int i = 0; i < 4; ++i) net.edges.push_back({"c" + std::to_string(i), tok, {}});
  for (int i = 0; i < 3; ++i) {
    NodeDecl nd{"q" + std::to_string(i), phil, {i, i + 1}};
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[i + 1].ends.emplace_back(i, 1);
  }
  net.finalize();
  auto B = largest_balance(net);
  for (NodeId m = 0; m < 3; ++m)
    for (NodeId n = 0; n < 3; ++n)
      for (auto& s : enumerate_similarities(net, m, n)) {
        if (B.contains(s)) continue;
        BalanceRelation extended = B;
        extended.triples.push_back(s);
        extended.triples.push_back(s.inverse());
        extended.canonicalize();
        CHECK(!is_balance_relation(net, extended));
      }
}

TEST_CASE("deletion order does not affect the fixpoint") {
  auto net = token_ring(4);
  auto reference = largest_balance(net);
  std::mt19937 rng(7);
  for (int round = 0; round < 5; ++round) {
    BalanceRelation B;
    for (NodeId m = 0; m < net.num_nodes(); ++m)
      for (NodeId n = 0; n < net.num_nodes(); ++n)
        for (auto& s : enumerate_similarities(net, m, n)) B.triples.push_back(std::move(s));
    std::shuffle(B.triples.begin(), B.triples.end(), rng);
    // one-at-a-time deletion in shuffled order
    bool changed = true;
    while (changed) {
      changed = false;
      BalanceRelation view = B;
      view.canonicalize();
      std::vector<Similarity> keep;
      for (auto& t : B.triples) {
        bool ok = view.contains(t.inverse());
        for (NodeId k = 0; ok && k < net.num_nodes(); ++k) {
          if (!net.points_to(k, t.m)) continue;
          bool matched = false;
          for (auto& g : view.triples) {
            if (g.m != k || !net.points_to(g.n, t.n)) continue;
            bool agrees = true;
            for (EdgeId e : net.shared_edges(t.m, k))
              if (g.map_edge(net, e) != t.map_edge(net, e)) agrees = false;
            if (agrees) matched = true;
          }
          ok = matched;
        }
        if (ok)
          keep.push_back(t);
        else
          changed = true;
      }
      B.triples = std::move(keep);
    }
    B.canonicalize();
    CHECK(B.triples == reference.triples);
  }
}
