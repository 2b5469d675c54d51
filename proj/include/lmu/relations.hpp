#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmu/lts.hpp"
#include "lmu/mucalc.hpp"

namespace lmu {

struct CheckVerdict {
  bool holds = false;
  bool refused = false;  // precondition could not be established
  std::string reason;
  // counterexample: [A-state, label, A-target, B-state] when present
  std::vector<std::string> trace;

  static CheckVerdict ok() { return CheckVerdict{true, false, "", {}}; }
  static CheckVerdict fail(std::string why, std::vector<std::string> tr = {}) {
    return CheckVerdict{false, false, std::move(why), std::move(tr)};
  }
  static CheckVerdict refuse(std::string why) { return CheckVerdict{false, true, std::move(why), {}}; }
};

// Label correspondence between two systems; tau always maps to tau.
struct LabelMap {
  std::map<int, int> fwd;  // A label id -> B label id

  int operator()(int a) const {
    if (a == LabeledTS::TAU) return LabeledTS::TAU;
    auto it = fwd.find(a);
    if (it == fwd.end()) return -1;
    return it->second;
  }
  LabelMap inverted() const {
    LabelMap r;
    for (auto [a, b] : fwd) r.fwd[b] = a;
    return r;
  }
};

inline LabelMap label_map_by_name(const LabeledTS& A, const LabeledTS& B,
                                  const std::map<std::string, std::string>& rename = {}) {
  LabelMap m;
  for (std::size_t i = 1; i < A.labels.size(); ++i) {
    auto it = rename.find(A.labels[i]);
    std::string want = it == rename.end() ? A.labels[i] : it->second;
    int b = B.label_id(want);
    if (b >= 0) m.fwd[static_cast<int>(i)] = b;
  }
  return m;
}

// A relation between the states of two systems, with fast membership and
// per-A-state images.
struct StateRelation {
  std::vector<std::pair<int, int>> pairs;  // sorted

  void canonicalize() {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  }
  bool related(int a, int b) const {
    return std::binary_search(pairs.begin(), pairs.end(), std::make_pair(a, b));
  }
  std::vector<int> image(int a) const {
    std::vector<int> r;
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(a, -1));
    for (; it != pairs.end() && it->first == a; ++it) r.push_back(it->second);
    return r;
  }
  StateRelation inverted() const {
    StateRelation r;
    for (auto [a, b] : pairs) r.pairs.emplace_back(b, a);
    r.canonicalize();
    return r;
  }
  static StateRelation same_propositions(const LabeledTS& A, const LabeledTS& B) {
    StateRelation r;
    for (int a = 0; a < A.num_states(); ++a)
      for (int b = 0; b < B.num_states(); ++b)
        if (A.prop_mask[a] == B.prop_mask[b]) r.pairs.emplace_back(a, b);
    r.canonicalize();
    return r;
  }
};

namespace detail {

struct MatchOptions {
  bool stutter_any_label = false;  // stutter moves may carry any label
  bool absorb_visible = false;     // a visible move with (s', t) related needs no answer
};

// One obligation of the (branching-style, divergence-blind) stuttering
// condition: the move s --a--> s2 of A must be answered from t in B, going
// through stutter states related to s and ending with a map(a)-labeled move
// into a state related to s2.
inline bool match_move(const LabeledTS& B, const StateRelation& R, const LabelMap& map, int s, int a, int s2,
                       int t, const MatchOptions& opts) {
  if (a == LabeledTS::TAU || opts.absorb_visible) {
    if (R.related(s2, t)) return true;
  }
  int want = map(a);
  if (want < 0) return false;
  // breadth-first stutter closure from t through states related to s
  std::deque<int> work{t};
  std::set<int> seen{t};
  while (!work.empty()) {
    int y = work.front();
    work.pop_front();
    for (auto& [lab, dst] : B.adj[y]) {
      if (lab == want && R.related(s2, dst)) return true;
      bool may_stutter = opts.stutter_any_label || lab == LabeledTS::TAU;
      if (may_stutter && R.related(s, dst) && seen.insert(dst).second) work.push_back(dst);
    }
  }
  return false;
}

inline std::vector<std::string> trace_of(const LabeledTS& A, const LabeledTS& B, int s, int a, int s2, int t) {
  return {A.state_name(s), A.labels[a], A.state_name(s2), B.state_name(t)};
}

}  // namespace detail

// Verifies that a GIVEN relation is a stuttering simulation from A to B in
// the branching style: related states agree on propositions, every move of
// the A side is matched modulo stuttering, and every initial state of A is
// related to some initial state of B.
inline CheckVerdict check_fixed_stuttering_simulation(const LabeledTS& A, const LabeledTS& B,
                                                      const StateRelation& R, const LabelMap& map,
                                                      bool check_props = true,
                                                      bool stutter_any_label = false,
                                                      bool absorb_visible = false) {
  detail::MatchOptions opts{stutter_any_label, absorb_visible};
  for (auto [s, t] : R.pairs) {
    if (check_props && A.prop_mask[s] != B.prop_mask[t])
      return CheckVerdict::fail("related states disagree on propositions",
                                {A.state_name(s), "", "", B.state_name(t)});
    for (auto& [a, s2] : A.adj[s]) {
      if (!detail::match_move(B, R, map, s, a, s2, t, opts))
        return CheckVerdict::fail("unmatched move", detail::trace_of(A, B, s, a, s2, t));
    }
  }
  for (int i : A.initial) {
    bool covered = false;
    for (int j : B.initial)
      if (R.related(i, j)) covered = true;
    if (!covered)
      return CheckVerdict::fail("initial state not covered", {A.state_name(i), "", "", ""});
  }
  return CheckVerdict::ok();
}

namespace detail {

// Greatest simulation inside the candidate, by iterated deletion.
template <typename Obligation>
inline StateRelation refine(StateRelation R, const Obligation& ok) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<int, int>> keep;
    keep.reserve(R.pairs.size());
    for (auto [s, t] : R.pairs) {
      if (ok(R, s, t))
        keep.push_back({s, t});
      else
        changed = true;
    }
    R.pairs = std::move(keep);
  }
  return R;
}

}  // namespace detail

// Greatest strong simulation contained in the candidate (or in the
// same-propositions relation), then initial coverage.
inline CheckVerdict check_strong_simulation(const LabeledTS& A, const LabeledTS& B, const LabelMap& map,
                                            std::optional<StateRelation> seed = std::nullopt) {
  StateRelation R = seed ? *seed : StateRelation::same_propositions(A, B);
  R.pairs.erase(std::remove_if(R.pairs.begin(), R.pairs.end(),
                               [&](auto p) { return A.prop_mask[p.first] != B.prop_mask[p.second]; }),
                R.pairs.end());
  R = detail::refine(R, [&](const StateRelation& cur, int s, int t) {
    for (auto& [a, s2] : A.adj[s]) {
      int want = map(a);
      if (want < 0) return false;
      bool matched = false;
      for (auto& [b, t2] : B.adj[t])
        if (b == want && cur.related(s2, t2)) {
          matched = true;
          break;
        }
      if (!matched) return false;
    }
    return true;
  });
  for (int i : A.initial) {
    bool covered = false;
    for (int j : B.initial)
      if (R.related(i, j)) covered = true;
    if (!covered) {
      // reconstruct a reason from the original obligations
      return CheckVerdict::fail("initial state not simulated", {A.state_name(i), "", "", ""});
    }
  }
  return CheckVerdict::ok();
}

// Greatest stuttering simulation (branching style, divergence blind)
// contained in the candidate, then initial coverage.
inline CheckVerdict check_stuttering_simulation(const LabeledTS& A, const LabeledTS& B, const LabelMap& map,
                                                std::optional<StateRelation> seed = std::nullopt) {
  StateRelation R = seed ? *seed : StateRelation::same_propositions(A, B);
  R.pairs.erase(std::remove_if(R.pairs.begin(), R.pairs.end(),
                               [&](auto p) { return A.prop_mask[p.first] != B.prop_mask[p.second]; }),
                R.pairs.end());
  detail::MatchOptions opts{};
  R = detail::refine(R, [&](const StateRelation& cur, int s, int t) {
    for (auto& [a, s2] : A.adj[s])
      if (!detail::match_move(B, cur, map, s, a, s2, t, opts)) return false;
    return true;
  });
  for (int i : A.initial) {
    bool covered = false;
    for (int j : B.initial)
      if (R.related(i, j)) covered = true;
    if (!covered) return CheckVerdict::fail("initial state not simulated", {A.state_name(i), "", "", ""});
  }
  return CheckVerdict::ok();
}

// The greatest relation the refinement converges to, exposed for the
// fixed-point property tests.
inline StateRelation greatest_stuttering_simulation(const LabeledTS& A, const LabeledTS& B,
                                                    const LabelMap& map) {
  StateRelation R = StateRelation::same_propositions(A, B);
  detail::MatchOptions opts{};
  return detail::refine(R, [&](const StateRelation& cur, int s, int t) {
    for (auto& [a, s2] : A.adj[s])
      if (!detail::match_move(B, cur, map, s, a, s2, t, opts)) return false;
    return true;
  });
}

// ---------------------------------------------------------------------------
// Theorem-level checks
// ---------------------------------------------------------------------------

// Exact correspondence of two local spaces under beta: the graph of the
// state map is a strong bisimulation with the beta-induced label map.
inline CheckVerdict check_lts_bisimulation_via_map(const LabeledTS& A, const LabeledTS& B,
                                                   const std::function<LocalState(const LocalState&)>& stateMap,
                                                   const LabelMap& map) {
  if (A.num_states() != B.num_states())
    return CheckVerdict::fail("state counts differ: " + std::to_string(A.num_states()) + " vs " +
                              std::to_string(B.num_states()));
  std::map<std::vector<Val>, int> bIndex;
  for (int b = 0; b < B.num_states(); ++b) bIndex[std::get<LocalState>(B.payloads[b]).vals] = b;
  std::vector<int> f(A.num_states(), -1);
  for (int a = 0; a < A.num_states(); ++a) {
    auto img = stateMap(std::get<LocalState>(A.payloads[a]));
    auto it = bIndex.find(img.vals);
    if (it == bIndex.end())
      return CheckVerdict::fail("beta image of a state is missing", {A.state_name(a), "", "", ""});
    f[a] = it->second;
  }
  auto inv = map.inverted();
  for (int a = 0; a < A.num_states(); ++a) {
    int b = f[a];
    if (A.prop_mask[a] != B.prop_mask[b])
      return CheckVerdict::fail("propositions do not respect beta", {A.state_name(a), "", "", B.state_name(b)});
    for (auto& [la, a2] : A.adj[a]) {
      int lb = map(la);
      if (lb < 0 || !B.has_transition(b, lb, f[a2]))
        return CheckVerdict::fail("move unmatched under beta", detail::trace_of(A, B, a, la, a2, b));
    }
    for (auto& [lb, b2] : B.adj[b]) {
      int la = inv(lb);
      // f is a bijection on states (size equality + injective map), so the
      // inverse image of b2 is found by search over A's moves
      bool matched = false;
      if (la >= 0)
        for (auto& [l2, a2] : A.adj[a])
          if (l2 == la && f[a2] == b2) matched = true;
      if (!matched)
        return CheckVerdict::fail("reverse move unmatched under beta",
                                  {B.state_name(b), B.labels[lb], B.state_name(b2), A.state_name(a)});
    }
  }
  for (int i : A.initial)
    if (!std::binary_search(B.initial.begin(), B.initial.end(), f[i]))
      return CheckVerdict::fail("initial states do not correspond", {A.state_name(i), "", "", ""});
  std::set<int> aInitImg;
  for (int i : A.initial) aInitImg.insert(f[i]);
  for (int j : B.initial)
    if (!aInitImg.count(j))
      return CheckVerdict::fail("initial states do not correspond", {"", "", "", B.state_name(j)});
  return CheckVerdict::ok();
}

// Theorem-4-style check: the two local spaces of a balanced pair are
// bisimilar up to beta.
inline CheckVerdict check_bisimulation_up_to_beta(const ProcessNetwork& net, const CompositionalInvariant& inv,
                                                  const PropositionSet& props, const Similarity& beta) {
  if (!detail::ports_compatible(net, beta.m, beta.n, beta.port_map) || !detail::respects_processes(net, beta))
    throw ModelError("beta is not a similarity");
  auto Hm = build_local_space(net, inv, beta.m, props);
  auto Hn = build_local_space(net, inv, beta.n, props);
  std::map<std::string, std::string> rename;
  const auto& tm = *net.nodes[beta.m].tmpl;
  const auto& tn = *net.nodes[beta.n].tmpl;
  for (int p = 0; p < tm.num_ports(); ++p) rename[tm.ports[p].name] = tn.ports[beta.port_map[p]].name;
  rename["self"] = "self";
  auto map = label_map_by_name(Hm, Hn, rename);
  return check_lts_bisimulation_via_map(
      Hm, Hn, [&](const LocalState& s) { return beta.apply(net, s); }, map);
}

// The relation of the local-global theorems: reachable, theta-consistent
// global states paired with their local projection.
inline StateRelation local_global_relation(const ProcessNetwork& net, const LabeledTS& G, const LabeledTS& H,
                                           const std::map<NodeId, std::vector<LocalState>>& theta, NodeId m) {
  std::map<std::vector<Val>, int> hIndex;
  for (int h = 0; h < H.num_states(); ++h) hIndex[std::get<LocalState>(H.payloads[h]).vals] = h;
  StateRelation R;
  for (int g = 0; g < G.num_states(); ++g) {
    const auto& gs = std::get<GlobalState>(G.payloads[g]);
    bool consistent = true;
    for (NodeId n = 0; n < net.num_nodes() && consistent; ++n) {
      auto p = project(net, gs, n);
      const auto& set = theta.at(n);
      consistent = std::binary_search(set.begin(), set.end(), p);
    }
    if (!consistent) continue;
    auto it = hIndex.find(project(net, gs, m).vals);
    if (it == hIndex.end()) throw ModelError("projection escapes theta; invariant not compositional");
    R.pairs.emplace_back(g, it->second);
  }
  R.canonicalize();
  return R;
}

// Theorem-5-style check: H_m simulates G_m up to stuttering through the
// projection relation.
inline CheckVerdict check_theorem5(const ProcessNetwork& net, const CompositionalInvariant& inv, NodeId m,
                                   std::size_t state_cap = 1000000,
                                   std::optional<PropositionSet> propsOpt = std::nullopt) {
  auto props = propsOpt ? *propsOpt : PropositionSet::of_template(*net.nodes[m].tmpl);
  auto H = build_local_space(net, inv, m, props);
  auto G = build_global_space(net, m, props, state_cap);
  auto theta = materialize_all(net, inv);
  auto R = local_global_relation(net, G, H, theta, m);
  auto map = label_map_by_name(G, H);
  return check_fixed_stuttering_simulation(G, H, R, map);
}

enum class OutwardMode {
  Literal,   // stuttering bisimulation on the full local space
  OwnSteps,  // restricted to the node's own step transitions
};

// Relabels H_n toward neighbor m: a transition is visible iff it changes
// some shared edge (label: the tuple of new shared-edge values), else tau.
inline LabeledTS outward_view(const ProcessNetwork& net, const CompositionalInvariant& inv, NodeId n, NodeId m,
                              OutwardMode mode) {
  if (!net.nbr(m, n)) throw ModelError("nodes are not neighbors");
  auto theta_n = inv.materialize(net, n);
  auto shared = net.shared_edges(n, m);
  const auto& t = *net.nodes[n].tmpl;
  std::vector<int> sharedSlots;
  for (EdgeId e : shared) sharedSlots.push_back(t.port_slot(net.port_of_edge(n, e)));

  LabeledTS lts;
  std::map<std::vector<Val>, int> id;
  for (const auto& s : theta_n) id[s.vals] = lts.add_state(s, 0);
  auto add = [&](const LocalState& from, const LocalState& to) {
    bool changed = false;
    std::string lab = "w";
    for (int slot : sharedSlots) {
      if (from.vals[slot] != to.vals[slot]) changed = true;
      lab += ":" + std::to_string(int(to.vals[slot]));
    }
    lts.add_transition(id.at(from.vals), changed ? lts.intern_label(lab) : LabeledTS::TAU, id.at(to.vals));
  };
  for (const auto& s : theta_n) {
    for (auto& [cmd, s2] : step_successors(net, n, s)) {
      (void)cmd;
      add(s, s2);
    }
    if (mode == OutwardMode::Literal) {
      for (NodeId k : net.neighbors(n)) {
        auto sharedK = net.shared_edges(n, k);
        auto theta_k = inv.materialize(net, k);
        for (const auto& u : theta_k) {
          if (detail::shared_view(net, k, u, sharedK) != detail::shared_view(net, n, s, sharedK)) continue;
          for (auto& [cmd, s2, u2] : interference_successors(net, n, s, k, u)) {
            (void)cmd;
            (void)u2;
            add(s, s2);
          }
        }
      }
    }
  }
  lts.dedup_transitions();
  return ensure_total(std::move(lts));
}

// Is process n outward-facing toward its neighbor m: the shared-edge
// agreement relation is a stuttering bisimulation of the relabeled space
// with itself.
inline CheckVerdict check_outward_facing(const ProcessNetwork& net, const CompositionalInvariant& inv, NodeId n,
                                         NodeId m, OutwardMode mode = OutwardMode::Literal) {
  auto view = outward_view(net, inv, n, m, mode);
  auto shared = net.shared_edges(n, m);
  const auto& t = *net.nodes[n].tmpl;
  std::vector<int> sharedSlots;
  for (EdgeId e : shared) sharedSlots.push_back(t.port_slot(net.port_of_edge(n, e)));
  StateRelation B;
  for (int a = 0; a < view.num_states(); ++a) {
    const auto& u = std::get<LocalState>(view.payloads[a]);
    for (int b = 0; b < view.num_states(); ++b) {
      const auto& v = std::get<LocalState>(view.payloads[b]);
      bool agree = true;
      for (int slot : sharedSlots)
        if (u.vals[slot] != v.vals[slot]) agree = false;
      if (agree) B.pairs.emplace_back(a, b);
    }
  }
  B.canonicalize();
  LabelMap idm = label_map_by_name(view, view);
  // the relation is symmetric, so checking every pair covers both directions
  return check_fixed_stuttering_simulation(view, view, B, idm, /*check_props=*/false);
}

// Both directions of the local-global correspondence, without insisting on
// the outward-facing precondition. The downward direction is the strict
// check of the simulation theorem; the upward direction allows the matching
// path to pass through any moves that keep the global state related to the
// source, which is exactly the obligation the exactness theorem's proof
// constructs.
inline CheckVerdict check_local_global_bisimulation(const ProcessNetwork& net, const CompositionalInvariant& inv,
                                                    NodeId m, std::size_t state_cap = 1000000) {
  auto props = PropositionSet::of_template(*net.nodes[m].tmpl);
  auto H = build_local_space(net, inv, m, props);
  auto G = build_global_space(net, m, props, state_cap);
  auto theta = materialize_all(net, inv);
  auto R = local_global_relation(net, G, H, theta, m);
  auto down = check_fixed_stuttering_simulation(G, H, R, label_map_by_name(G, H));
  if (!down.holds) {
    down.reason = "global-to-local direction: " + down.reason;
    return down;
  }
  auto up = check_fixed_stuttering_simulation(H, G, R.inverted(), label_map_by_name(H, G),
                                              /*check_props=*/true,
                                              /*stutter_any_label=*/true,
                                              /*absorb_visible=*/true);
  if (!up.holds) {
    up.reason = "local-to-global direction: " + up.reason;
    return up;
  }
  return CheckVerdict::ok();
}

// Theorem-6-style check. The precondition uses the own-steps reading of
// outward-facing: the exactness proof realizes matching sequences by the
// interfering process alone, so only that reading makes the transfer sound.
inline CheckVerdict check_theorem6(const ProcessNetwork& net, const CompositionalInvariant& inv, NodeId m,
                                   std::size_t state_cap = 1000000) {
  for (NodeId n : net.neighbors(m)) {
    auto pre = check_outward_facing(net, inv, n, m, OutwardMode::OwnSteps);
    if (!pre.holds)
      return CheckVerdict::refuse("outward-facing precondition not established for interference of " +
                                  net.nodes[n].name + " on " + net.nodes[m].name + ": " + pre.reason);
  }
  return check_local_global_bisimulation(net, inv, m, state_cap);
}

}  // namespace lmu
