#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmu/model.hpp"

namespace lmu {

// A neighborhood similarity (m, beta, n). beta is stored as a port
// permutation: port i of m corresponds to port_map[i] of n, which induces
// the edge bijection through the port bindings.
struct Similarity {
  NodeId m = -1;
  NodeId n = -1;
  std::vector<int> port_map;

  auto operator<=>(const Similarity&) const = default;

  EdgeId map_edge(const ProcessNetwork& net, EdgeId e) const {
    int p = net.port_of_edge(m, e);
    if (p < 0) throw ModelError("edge not connected to node " + net.nodes[m].name);
    return net.nodes[n].port_edges[port_map[p]];
  }

  // beta lifted to local states: internals identical, edge values moved to
  // the corresponding edge.
  LocalState apply(const ProcessNetwork& net, const LocalState& s) const {
    const auto& tm = *net.nodes[m].tmpl;
    const auto& tn = *net.nodes[n].tmpl;
    LocalState t;
    t.node = n;
    t.vals.assign(tn.frame_size(), 0);
    for (int i = 0; i < tm.num_internals(); ++i) t.vals[i] = s.vals[i];
    for (int p = 0; p < tm.num_ports(); ++p) t.vals[tn.port_slot(port_map[p])] = s.vals[tm.port_slot(p)];
    return t;
  }

  Similarity inverse() const {
    Similarity r;
    r.m = n;
    r.n = m;
    r.port_map.assign(port_map.size(), -1);
    for (std::size_t i = 0; i < port_map.size(); ++i) r.port_map[port_map[i]] = static_cast<int>(i);
    return r;
  }

  // this: m -> q, o: q -> n, result: m -> n
  Similarity compose(const Similarity& o) const {
    if (n != o.m) throw ModelError("similarities not composable");
    Similarity r;
    r.m = m;
    r.n = o.n;
    r.port_map.resize(port_map.size());
    for (std::size_t i = 0; i < port_map.size(); ++i) r.port_map[i] = o.port_map[port_map[i]];
    return r;
  }

  static Similarity identity(NodeId node, int ports) {
    Similarity s;
    s.m = s.n = node;
    s.port_map.resize(ports);
    std::iota(s.port_map.begin(), s.port_map.end(), 0);
    return s;
  }
};

struct BalanceRelation {
  std::vector<Similarity> triples;  // sorted, unique

  void canonicalize() {
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  }
  bool contains(const Similarity& s) const {
    return std::binary_search(triples.begin(), triples.end(), s);
  }
  // Classes of the induced equivalence m ~ n iff some (m, beta, n) present.
  std::vector<std::vector<NodeId>> classes(int numNodes) const {
    std::vector<int> parent(numNodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& t : triples) {
      int a = find(t.m), b = find(t.n);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::map<int, std::vector<NodeId>> by;
    for (int i = 0; i < numNodes; ++i) by[find(i)].push_back(i);
    std::vector<std::vector<NodeId>> out;
    for (auto& [r, v] : by) out.push_back(std::move(v));
    return out;
  }
};

struct RepresentativeScheme {
  std::vector<std::vector<NodeId>> classes;
  std::vector<NodeId> rep_of;       // node -> representative (least in class)
  std::vector<Similarity> gamma;    // node -> similarity (rep_of[n], gamma, n)
};

struct CommunicationRelation {
  int num_nodes = 0;
  std::vector<std::vector<bool>> adj;

  bool edge(int a, int b) const { return adj[a][b]; }
  int degree(int a) const {
    int d = 0;
    for (bool x : adj[a]) d += x;
    return d;
  }
};

namespace detail {

// Structural admissibility of a port permutation: modes and domains line up
// and the internal state spaces coincide.
inline bool ports_compatible(const ProcessNetwork& net, NodeId m, NodeId n, const std::vector<int>& pm) {
  const auto& tm = *net.nodes[m].tmpl;
  const auto& tn = *net.nodes[n].tmpl;
  for (int i = 0; i < tm.num_ports(); ++i) {
    const auto& a = tm.ports[i];
    const auto& b = tn.ports[pm[i]];
    if (a.mode != b.mode || !a.domain->same_values(*b.domain)) return false;
  }
  return true;
}

inline bool respects_processes(const ProcessNetwork& net, const Similarity& sim) {
  const auto& tm = *net.nodes[sim.m].tmpl;
  const auto& tn = *net.nodes[sim.n].tmpl;
  if (!tm.same_internal_signature(tn)) return false;
  for (const auto& s : enumerate_local_states(net, sim.m)) {
    LocalState bs = sim.apply(net, s);
    if (tm.init.eval(s.vals.data()) != tn.init.eval(bs.vals.data())) return false;
    std::set<std::vector<Val>> img, succ;
    for (auto& [cmd, t2] : step_successors(net, sim.m, s)) {
      (void)cmd;
      img.insert(sim.apply(net, t2).vals);
    }
    for (auto& [cmd, t2] : step_successors(net, sim.n, bs)) {
      (void)cmd;
      succ.insert(t2.vals);
    }
    if (img != succ) return false;
  }
  return true;
}

}  // namespace detail

// All direction-preserving edge bijections under which the assigned
// processes are isomorphic, checked by exhaustive state enumeration.
inline std::vector<Similarity> enumerate_similarities(const ProcessNetwork& net, NodeId m, NodeId n,
                                                      int degree_cap = 6) {
  net.check_node(m);
  net.check_node(n);
  const auto& tm = *net.nodes[m].tmpl;
  const auto& tn = *net.nodes[n].tmpl;
  std::vector<Similarity> out;
  if (tm.num_ports() != tn.num_ports()) return out;
  if (!tm.same_internal_signature(tn)) return out;
  if (tm.num_ports() > degree_cap)
    throw CapError("node degree " + std::to_string(tm.num_ports()) + " exceeds similarity cap");
  std::vector<int> pm(tm.num_ports());
  std::iota(pm.begin(), pm.end(), 0);
  do {
    if (!detail::ports_compatible(net, m, n, pm)) continue;
    Similarity sim{m, n, pm};
    if (detail::respects_processes(net, sim)) out.push_back(sim);
  } while (std::next_permutation(pm.begin(), pm.end()));
  std::sort(out.begin(), out.end());
  return out;
}

struct BalanceViolation {
  std::string reason;
  std::optional<Similarity> triple;
  std::optional<NodeId> unmatched_pointer;  // the node k with no matching l
};

// Checks the three clauses of the balance definition within B itself.
inline std::optional<BalanceViolation> balance_violation(const ProcessNetwork& net, const BalanceRelation& B,
                                                         int degree_cap = 6) {
  for (const auto& t : B.triples) {
    net.check_node(t.m);
    net.check_node(t.n);
    const auto& tm = *net.nodes[t.m].tmpl;
    const auto& tn = *net.nodes[t.n].tmpl;
    bool structural = tm.num_ports() == tn.num_ports() &&
                      static_cast<int>(t.port_map.size()) == tm.num_ports() && tm.num_ports() <= degree_cap &&
                      detail::ports_compatible(net, t.m, t.n, t.port_map);
    if (!structural || !detail::respects_processes(net, t))
      return BalanceViolation{"triple is not a similarity", t, std::nullopt};
    if (!B.contains(t.inverse())) return BalanceViolation{"inverse triple missing", t, std::nullopt};
    for (NodeId k = 0; k < net.num_nodes(); ++k) {
      if (!net.points_to(k, t.m)) continue;
      bool matched = false;
      for (const auto& g : B.triples) {
        if (g.m != k || !net.points_to(g.n, t.n)) continue;
        bool agrees = true;
        for (EdgeId e : net.shared_edges(t.m, k)) {
          if (g.map_edge(net, e) != t.map_edge(net, e)) {
            agrees = false;
            break;
          }
        }
        if (agrees) {
          matched = true;
          break;
        }
      }
      if (!matched) return BalanceViolation{"pointing condition fails", t, k};
    }
  }
  return std::nullopt;
}

inline bool is_balance_relation(const ProcessNetwork& net, const BalanceRelation& B, int degree_cap = 6) {
  return !balance_violation(net, B, degree_cap).has_value();
}

// Greatest fixpoint by iterated deletion, starting from all similarities.
inline BalanceRelation largest_balance(const ProcessNetwork& net, int degree_cap = 6) {
  BalanceRelation B;
  for (NodeId m = 0; m < net.num_nodes(); ++m)
    for (NodeId n = 0; n < net.num_nodes(); ++n)
      for (auto& s : enumerate_similarities(net, m, n, degree_cap)) B.triples.push_back(std::move(s));
  B.canonicalize();
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Similarity> keep;
    keep.reserve(B.triples.size());
    for (const auto& t : B.triples) {
      bool ok = B.contains(t.inverse());
      if (ok) {
        for (NodeId k = 0; ok && k < net.num_nodes(); ++k) {
          if (!net.points_to(k, t.m)) continue;
          bool matched = false;
          for (const auto& g : B.triples) {
            if (g.m != k || !net.points_to(g.n, t.n)) continue;
            bool agrees = true;
            for (EdgeId e : net.shared_edges(t.m, k))
              if (g.map_edge(net, e) != t.map_edge(net, e)) {
                agrees = false;
                break;
              }
            if (agrees) {
              matched = true;
              break;
            }
          }
          ok = matched;
        }
      }
      if (ok)
        keep.push_back(t);
      else
        changed = true;
    }
    B.triples = std::move(keep);
  }
  return B;
}

// Classes of ~B with least representatives and a deterministic gamma per
// node. gamma is found by composing triples along a BFS path from the
// representative, preferring the least similarity at each step.
inline RepresentativeScheme representatives(const ProcessNetwork& net, const BalanceRelation& B,
                                            int degree_cap = 6) {
  if (auto v = balance_violation(net, B, degree_cap))
    throw ModelError("not a balance relation: " + v->reason);
  RepresentativeScheme scheme;
  scheme.classes = B.classes(net.num_nodes());
  scheme.rep_of.assign(net.num_nodes(), -1);
  scheme.gamma.resize(net.num_nodes());
  for (auto& cls : scheme.classes) {
    NodeId r = cls.front();
    for (NodeId n : cls) scheme.rep_of[n] = r;
    // BFS from r over triples; triples are sorted so the first similarity
    // found for a node is canonical.
    scheme.gamma[r] = Similarity::identity(r, net.nodes[r].tmpl->num_ports());
    std::vector<bool> done(net.num_nodes(), false);
    done[r] = true;
    std::vector<NodeId> frontier = {r};
    while (!frontier.empty()) {
      std::vector<NodeId> next;
      for (NodeId q : frontier) {
        for (const auto& t : B.triples) {
          if (t.m != q || done[t.n]) continue;
          scheme.gamma[t.n] = scheme.gamma[q].compose(t);
          done[t.n] = true;
          next.push_back(t.n);
        }
      }
      frontier = std::move(next);
    }
    for (NodeId n : cls)
      if (!done[n]) throw ModelError("class member unreachable from representative");
  }
  return scheme;
}

inline CommunicationRelation communication_relation(const ProcessNetwork& net) {
  CommunicationRelation cr;
  cr.num_nodes = net.num_nodes();
  cr.adj.assign(cr.num_nodes, std::vector<bool>(cr.num_nodes, false));
  for (int m = 0; m < cr.num_nodes; ++m)
    for (int n = 0; n < cr.num_nodes; ++n)
      if (m != n && net.nbr(m, n)) cr.adj[m][n] = true;
  return cr;
}

// Brute-force graph automorphisms with degree pruning.
inline std::vector<std::vector<int>> find_automorphisms(const CommunicationRelation& cr, int node_cap = 10) {
  if (cr.num_nodes > node_cap) throw CapError("automorphism search limited to " + std::to_string(node_cap) + " nodes");
  int n = cr.num_nodes;
  std::vector<int> deg(n);
  for (int i = 0; i < n; ++i) deg[i] = cr.degree(i);
  std::vector<std::vector<int>> out;
  std::vector<int> perm(n, -1);
  std::vector<bool> used(n, false);
  auto rec = [&](auto&& self, int i) -> void {
    if (i == n) {
      out.push_back(perm);
      return;
    }
    for (int v = 0; v < n; ++v) {
      if (used[v] || deg[v] != deg[i]) continue;
      bool ok = true;
      for (int j = 0; j < i && ok; ++j)
        if (cr.edge(i, j) != cr.edge(v, perm[j])) ok = false;
      if (!ok) continue;
      perm[i] = v;
      used[v] = true;
      self(self, i + 1);
      used[v] = false;
      perm[i] = -1;
    }
  };
  rec(rec, 0);
  return out;
}

// Triples induced by a CR automorphism pi, lifted to edges through the
// port-name correspondence (same template, same port index). The result is
// validated; a lift that does not produce a balance relation is an error.
inline std::vector<Similarity> balance_from_automorphism(const ProcessNetwork& net, const std::vector<int>& pi,
                                                         int degree_cap = 6) {
  auto cr = communication_relation(net);
  if (static_cast<int>(pi.size()) != net.num_nodes()) throw ModelError("permutation size mismatch");
  std::vector<bool> seen(pi.size(), false);
  for (int v : pi) {
    if (v < 0 || v >= net.num_nodes() || seen[v]) throw ModelError("not a permutation");
    seen[v] = true;
  }
  for (int a = 0; a < net.num_nodes(); ++a)
    for (int b = 0; b < net.num_nodes(); ++b)
      if (cr.edge(a, b) != cr.edge(pi[a], pi[b])) throw ModelError("not an automorphism of CR");

  BalanceRelation B;
  std::vector<int> inv(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) inv[pi[i]] = static_cast<int>(i);
  for (auto perm : {pi, inv}) {
    for (NodeId m = 0; m < net.num_nodes(); ++m) {
      NodeId n = perm[m];
      if (net.nodes[m].tmpl->name != net.nodes[n].tmpl->name ||
          net.nodes[m].tmpl->num_ports() != net.nodes[n].tmpl->num_ports())
        throw ModelError("edge lift undefined: nodes " + net.nodes[m].name + ", " + net.nodes[n].name +
                         " have different templates");
      Similarity s = Similarity::identity(m, net.nodes[m].tmpl->num_ports());
      s.n = n;
      B.triples.push_back(std::move(s));
    }
  }
  B.canonicalize();
  if (auto v = balance_violation(net, B, degree_cap))
    throw ModelError("automorphism does not induce a balance relation: " + v->reason);
  return B.triples;
}

namespace detail {

inline void flatten_conjuncts(const BoolExpr& e, std::vector<const BoolExpr*>& out) {
  if (e.kind == BoolExpr::Kind::And) {
    for (const auto& c : e.children) flatten_conjuncts(c, out);
  } else {
    out.push_back(&e);
  }
}

}  // namespace detail

// Normal-form conformance: two-party edges, guards that split into
// conjuncts each touching at most one neighbor, and actions that assign
// constants or swap variable values.
inline bool is_normal(const ProcessNetwork& net) {
  for (const auto& e : net.edges) {
    std::set<NodeId> ends;
    for (auto [n, p] : e.ends) {
      (void)p;
      ends.insert(n);
    }
    if (ends.size() != 2) return false;
  }
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    const auto& t = *net.nodes[n].tmpl;
    for (const auto& cmd : t.commands) {
      std::vector<const BoolExpr*> conj;
      detail::flatten_conjuncts(cmd.guard, conj);
      for (const auto* c : conj) {
        std::vector<int> slots;
        c->collect_slots(slots);
        std::set<NodeId> touched;
        for (int slot : slots) {
          if (slot < t.num_internals()) continue;
          EdgeId e = net.nodes[n].port_edges[slot - t.num_internals()];
          for (auto [k, p] : net.edges[e].ends) {
            (void)p;
            if (k != n) touched.insert(k);
          }
        }
        if (touched.size() > 1) return false;
      }
      for (const auto& a : cmd.updates) {
        if (a.from_const) continue;
        bool swapped = false;
        for (const auto& b : cmd.updates)
          if (!b.from_const && b.target == a.src && b.src == a.target) swapped = true;
        if (!swapped) return false;
      }
    }
  }
  return true;
}

}  // namespace lmu
