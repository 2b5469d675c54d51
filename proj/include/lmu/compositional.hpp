#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmu/balance.hpp"
#include "lmu/model.hpp"

namespace lmu {

// Per-node sets of local states, stored once per representative and
// materialized for other nodes through the scheme's gamma isomorphisms.
struct CompositionalInvariant {
  RepresentativeScheme scheme;
  std::map<NodeId, std::vector<LocalState>> per_rep;  // sorted state vectors

  const std::vector<LocalState>& rep_states(NodeId r) const {
    auto it = per_rep.find(r);
    if (it == per_rep.end()) throw ModelError("no invariant stored for node " + std::to_string(r));
    return it->second;
  }

  std::vector<LocalState> materialize(const ProcessNetwork& net, NodeId n) const {
    NodeId r = scheme.rep_of[n];
    std::vector<LocalState> out;
    for (const auto& s : rep_states(r)) out.push_back(scheme.gamma[n].apply(net, s));
    std::sort(out.begin(), out.end());
    return out;
  }

  bool contains(const ProcessNetwork& net, const LocalState& s) const {
    auto set = materialize(net, s.node);
    return std::binary_search(set.begin(), set.end(), s);
  }
};

namespace detail {

struct StateIndexed {
  std::vector<LocalState> states;
  std::set<std::vector<Val>> index;

  bool insert(const LocalState& s) {
    if (!index.insert(s.vals).second) return false;
    states.push_back(s);
    return true;
  }
  bool contains(const std::vector<Val>& v) const { return index.count(v) > 0; }
};

// Shared-edge view of a local state of node a toward node b.
inline std::vector<Val> shared_view(const ProcessNetwork& net, NodeId a, const LocalState& s,
                                    const std::vector<EdgeId>& shared) {
  std::vector<Val> key;
  key.reserve(shared.size());
  const auto& t = *net.nodes[a].tmpl;
  for (EdgeId e : shared) key.push_back(s.vals[t.port_slot(net.port_of_edge(a, e))]);
  return key;
}

}  // namespace detail

// Least fixpoint of Init/Step/Non-Interference, computed over representatives
// only. Neighbor sets are obtained through the scheme's gamma transfer.
inline CompositionalInvariant strongest_compositional_invariant(const ProcessNetwork& net,
                                                                const RepresentativeScheme& scheme) {
  if (static_cast<int>(scheme.rep_of.size()) != net.num_nodes())
    throw ModelError("representative scheme does not match the network");
  // the scheme must come from a relation the network respects
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    const auto& g = scheme.gamma[n];
    if (g.m != scheme.rep_of[n] || g.n != n) throw ModelError("scheme gamma inconsistent");
    if (!detail::respects_processes(net, g))
      throw ModelError("network does not respect the scheme's similarity at node " + net.nodes[n].name);
  }

  std::map<NodeId, detail::StateIndexed> sets;
  std::vector<NodeId> reps;
  for (const auto& cls : scheme.classes) reps.push_back(cls.front());
  for (NodeId r : reps) {
    auto& s = sets[r];
    for (const auto& x : initial_consistent_local_states(net, r)) s.insert(x);
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId r : reps) {
      auto& set = sets[r];
      // Step closure
      for (std::size_t i = 0; i < set.states.size(); ++i) {
        LocalState s = set.states[i];
        for (auto& [cmd, t2] : step_successors(net, r, s)) {
          (void)cmd;
          changed |= set.insert(t2);
        }
      }
      // Non-Interference closure, per neighbor, joined on shared edges
      for (NodeId m : net.neighbors(r)) {
        auto shared = net.shared_edges(r, m);
        NodeId rm = scheme.rep_of[m];
        std::map<std::vector<Val>, std::vector<LocalState>> byShared;
        for (const auto& u0 : sets[rm].states) {
          LocalState u = scheme.gamma[m].apply(net, u0);
          byShared[detail::shared_view(net, m, u, shared)].push_back(u);
        }
        for (std::size_t i = 0; i < set.states.size(); ++i) {
          LocalState s = set.states[i];
          auto it = byShared.find(detail::shared_view(net, r, s, shared));
          if (it == byShared.end()) continue;
          for (const auto& u : it->second) {
            for (auto& [cmd, s2, u2] : interference_successors(net, r, s, m, u)) {
              (void)cmd;
              (void)u2;
              changed |= set.insert(s2);
            }
          }
        }
      }
    }
  }

  CompositionalInvariant inv;
  inv.scheme = scheme;
  for (NodeId r : reps) {
    auto v = sets[r].states;
    std::sort(v.begin(), v.end());
    inv.per_rep[r] = std::move(v);
  }
  return inv;
}

// Convenience: identity scheme (every node its own representative), used by
// the all-nodes fixpoint cross-check.
inline RepresentativeScheme identity_scheme(const ProcessNetwork& net) {
  RepresentativeScheme s;
  s.rep_of.resize(net.num_nodes());
  s.gamma.resize(net.num_nodes());
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    s.rep_of[n] = n;
    s.gamma[n] = Similarity::identity(n, net.nodes[n].tmpl->num_ports());
    s.classes.push_back({n});
  }
  return s;
}

enum class InvariantRule { Init, Step, NonInterference };

struct InvariantViolation {
  InvariantRule rule;
  NodeId node;
  LocalState witness;               // the state outside theta
  std::optional<LocalState> from;   // step/interference source at `node`
  std::optional<LocalState> other;  // neighbor state for Non-Interference
  std::optional<NodeId> neighbor;
};

// Exhaustive check of Init/Step/Non-Interference over all nodes.
inline std::optional<InvariantViolation> check_compositional(const ProcessNetwork& net,
                                                             const std::map<NodeId, std::vector<LocalState>>& theta) {
  auto member = [&](NodeId n, const LocalState& s) {
    auto it = theta.find(n);
    if (it == theta.end()) throw ModelError("theta missing node " + std::to_string(n));
    return std::binary_search(it->second.begin(), it->second.end(), s);
  };
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    for (const auto& s : initial_consistent_local_states(net, n))
      if (!member(n, s)) return InvariantViolation{InvariantRule::Init, n, s, {}, {}, {}};
  }
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    for (const auto& s : theta.at(n)) {
      for (auto& [cmd, t2] : step_successors(net, n, s)) {
        (void)cmd;
        if (!member(n, t2)) return InvariantViolation{InvariantRule::Step, n, t2, s, {}, {}};
      }
    }
  }
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    for (NodeId m : net.neighbors(n)) {
      auto shared = net.shared_edges(n, m);
      for (const auto& s : theta.at(n)) {
        auto sKey = detail::shared_view(net, n, s, shared);
        for (const auto& u : theta.at(m)) {
          if (detail::shared_view(net, m, u, shared) != sKey) continue;
          for (auto& [cmd, s2, u2] : interference_successors(net, n, s, m, u)) {
            (void)cmd;
            (void)u2;
            if (!member(n, s2))
              return InvariantViolation{InvariantRule::NonInterference, n, s2, s, u, m};
          }
        }
      }
    }
  }
  return std::nullopt;
}

struct OracleResult {
  bool holds = false;
  std::string reason;
  std::optional<GlobalState> counterexample;
  std::size_t reachable_states = 0;
};

// Brute-force witness for the conjunction theorem: every reachable global
// state projects into every theta_n, and the conjunction set is inductive.
inline OracleResult global_invariant_oracle(const ProcessNetwork& net,
                                            const std::map<NodeId, std::vector<LocalState>>& theta,
                                            std::size_t state_cap = 1000000) {
  OracleResult res;
  auto member = [&](NodeId n, const LocalState& s) {
    const auto& v = theta.at(n);
    return std::binary_search(v.begin(), v.end(), s);
  };
  auto in_theta = [&](const GlobalState& g) {
    for (NodeId n = 0; n < net.num_nodes(); ++n)
      if (!member(n, project(net, g, n))) return false;
    return true;
  };

  auto reach = reachable_global(net, state_cap);
  res.reachable_states = reach.states.size();
  for (const auto& g : reach.states) {
    if (!in_theta(g)) {
      res.reason = "reachable state escapes the conjunction";
      res.counterexample = g;
      return res;
    }
  }

  // inductiveness of the conjunction set: enumerate it by backtracking over
  // nodes (joined on edge values) and check closure under successors
  std::vector<int> edgeAssign(net.num_edges(), -1);
  std::vector<Val> internals(net.total_internals, 0);
  std::size_t seen = 0;
  std::optional<GlobalState> bad;
  auto rec = [&](auto&& self, NodeId n) -> bool {
    if (n == net.num_nodes()) {
      GlobalState g;
      g.vals = internals;
      g.vals.resize(net.global_size());
      for (int e = 0; e < net.num_edges(); ++e) g.vals[net.edge_slot(e)] = static_cast<Val>(edgeAssign[e]);
      if (++seen > state_cap) throw CapError("conjunction set cap exceeded");
      for (auto& [actor, g2] : global_successors(net, g)) {
        (void)actor;
        if (!in_theta(g2)) {
          bad = g;
          return false;
        }
      }
      return true;
    }
    const auto& t = *net.nodes[n].tmpl;
    for (const auto& s : theta.at(n)) {
      bool compat = true;
      for (int p = 0; p < t.num_ports(); ++p) {
        EdgeId e = net.nodes[n].port_edges[p];
        int want = s.vals[t.port_slot(p)];
        if (edgeAssign[e] >= 0 && edgeAssign[e] != want) {
          compat = false;
          break;
        }
      }
      if (!compat) continue;
      std::vector<std::pair<EdgeId, int>> undo;
      for (int p = 0; p < t.num_ports(); ++p) {
        EdgeId e = net.nodes[n].port_edges[p];
        if (edgeAssign[e] < 0) {
          undo.emplace_back(e, -1);
          edgeAssign[e] = s.vals[t.port_slot(p)];
        }
      }
      std::copy(s.vals.begin(), s.vals.begin() + t.num_internals(), internals.begin() + net.internal_offset[n]);
      if (!self(self, n + 1)) return false;
      for (auto& [e, old] : undo) edgeAssign[e] = old;
    }
    return true;
  };
  if (!rec(rec, 0)) {
    res.reason = "conjunction not inductive";
    res.counterexample = bad;
    return res;
  }
  res.holds = true;
  return res;
}

// theta respects B: for every (m, beta, n), theta_n equals the beta-image of
// theta_m.
inline bool respects_invariant(const ProcessNetwork& net,
                               const std::map<NodeId, std::vector<LocalState>>& theta,
                               const BalanceRelation& B) {
  for (const auto& t : B.triples) {
    std::vector<LocalState> image;
    for (const auto& s : theta.at(t.m)) image.push_back(t.apply(net, s));
    std::sort(image.begin(), image.end());
    if (image != theta.at(t.n)) return false;
  }
  return true;
}

inline std::map<NodeId, std::vector<LocalState>> materialize_all(const ProcessNetwork& net,
                                                                 const CompositionalInvariant& inv) {
  std::map<NodeId, std::vector<LocalState>> theta;
  for (NodeId n = 0; n < net.num_nodes(); ++n) theta[n] = inv.materialize(net, n);
  return theta;
}

}  // namespace lmu
