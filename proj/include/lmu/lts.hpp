#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "lmu/compositional.hpp"
#include "lmu/model.hpp"

namespace lmu {

// Labels: index 0 is always tau; "self" and port names follow as needed.
struct LabeledTS {
  static constexpr int TAU = 0;

  std::vector<std::string> labels{"tau"};
  std::vector<std::string> prop_names;
  using Payload = std::variant<std::monostate, LocalState, GlobalState>;
  std::vector<Payload> payloads;
  std::vector<std::uint32_t> prop_mask;                 // per state
  std::vector<std::vector<std::pair<int, int>>> adj;    // per state: (label, dst)
  std::vector<int> initial;
  std::vector<int> totalized;  // states that received a tau self-loop

  int num_states() const { return static_cast<int>(adj.size()); }

  int label_id(const std::string& name) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == name) return static_cast<int>(i);
    return -1;
  }
  int intern_label(const std::string& name) {
    int id = label_id(name);
    if (id >= 0) return id;
    labels.push_back(name);
    return static_cast<int>(labels.size()) - 1;
  }
  int prop_id(const std::string& name) const {
    for (std::size_t i = 0; i < prop_names.size(); ++i)
      if (prop_names[i] == name) return static_cast<int>(i);
    return -1;
  }
  bool has_prop(int state, int pid) const { return (prop_mask[state] >> pid) & 1; }

  int add_state(Payload p, std::uint32_t mask) {
    payloads.push_back(std::move(p));
    prop_mask.push_back(mask);
    adj.emplace_back();
    return num_states() - 1;
  }
  void add_transition(int src, int label, int dst) { adj[src].emplace_back(label, dst); }

  void dedup_transitions() {
    for (auto& v : adj) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  bool has_transition(int src, int label, int dst) const {
    return std::binary_search(adj[src].begin(), adj[src].end(), std::make_pair(label, dst));
  }

  std::string state_name(int id) const {
    if (std::holds_alternative<LocalState>(payloads[id])) {
      const auto& s = std::get<LocalState>(payloads[id]);
      std::string r = "s" + std::to_string(id) + "(";
      for (std::size_t i = 0; i < s.vals.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(int(s.vals[i]));
      }
      return r + ")";
    }
    return "s" + std::to_string(id);
  }
};

// Named boolean predicates evaluated on a template frame.
struct PropositionSet {
  std::vector<PropDef> defs;

  static PropositionSet of_template(const ProcessTemplate& t) {
    PropositionSet ps;
    ps.defs = t.props;
    return ps;
  }
  void add(const std::string& name, BoolExpr pred) {
    for (const auto& d : defs)
      if (d.name == name) return;
    defs.push_back({name, std::move(pred)});
  }
  std::uint32_t mask_of(const std::vector<Val>& frame) const {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < defs.size(); ++i)
      if (defs[i].pred.eval(frame.data())) m |= (std::uint32_t{1} << i);
    return m;
  }
};

// Interference labels: the lexicographically least port of n bound to an
// edge shared with the acting neighbor. Node ids would break formula
// portability across balanced nodes; ports keep one formula text evaluable
// everywhere.
inline std::string interference_port_label(const ProcessNetwork& net, NodeId n, NodeId actor) {
  const auto& t = *net.nodes[n].tmpl;
  std::string best;
  for (EdgeId e : net.shared_edges(n, actor)) {
    const std::string& pn = t.ports[net.port_of_edge(n, e)].name;
    if (best.empty() || pn < best) best = pn;
  }
  if (best.empty()) throw ModelError("nodes share no edge");
  return best;
}

// Adds a tau self-loop to every deadlocked state; records which states were
// totalized.
inline LabeledTS ensure_total(LabeledTS lts) {
  lts.totalized.clear();
  for (int s = 0; s < lts.num_states(); ++s) {
    if (lts.adj[s].empty()) {
      lts.add_transition(s, LabeledTS::TAU, s);
      lts.totalized.push_back(s);
    }
  }
  lts.dedup_transitions();
  return lts;
}

// The local state space H_n over theta: states are theta_n, moves are the
// node's own steps (self) plus all theta-consistent interference, labeled by
// the port toward the acting neighbor.
inline LabeledTS build_local_space(const ProcessNetwork& net, const CompositionalInvariant& inv, NodeId n,
                                   const PropositionSet& props) {
  net.check_node(n);
  auto theta_n = inv.materialize(net, n);
  LabeledTS lts;
  for (const auto& d : props.defs) lts.prop_names.push_back(d.name);
  if (lts.prop_names.size() > 32) throw ModelError("too many propositions");

  std::map<std::vector<Val>, int> id;
  for (const auto& s : theta_n) {
    id[s.vals] = lts.add_state(s, props.mask_of(s.vals));
  }
  auto state_id = [&](const LocalState& s) {
    auto it = id.find(s.vals);
    if (it == id.end()) throw ModelError("interference target escapes theta; invariant not compositional");
    return it->second;
  };

  int self = lts.intern_label("self");
  for (const auto& s : theta_n) {
    for (auto& [cmd, t2] : step_successors(net, n, s)) {
      (void)cmd;
      lts.add_transition(id[s.vals], self, state_id(t2));
    }
  }
  for (NodeId m : net.neighbors(n)) {
    int lab = lts.intern_label(interference_port_label(net, n, m));
    auto shared = net.shared_edges(n, m);
    auto theta_m = inv.materialize(net, m);
    std::map<std::vector<Val>, std::vector<LocalState>> byShared;
    for (const auto& u : theta_m) byShared[detail::shared_view(net, m, u, shared)].push_back(u);
    for (const auto& s : theta_n) {
      auto it = byShared.find(detail::shared_view(net, n, s, shared));
      if (it == byShared.end()) continue;
      for (const auto& u : it->second)
        for (auto& [cmd, s2, u2] : interference_successors(net, n, s, m, u)) {
          (void)cmd;
          (void)u2;
          lts.add_transition(id[s.vals], lab, state_id(s2));
        }
    }
  }
  for (const auto& s : initial_consistent_local_states(net, n)) {
    auto it = id.find(s.vals);
    if (it != id.end()) lts.initial.push_back(it->second);
  }
  std::sort(lts.initial.begin(), lts.initial.end());
  lts.dedup_transitions();
  return ensure_total(std::move(lts));
}

// The reachable global space with node-relative labels: self for n's moves,
// the shared-port label for neighbor moves, tau for everything else. States
// carry the propositions of their n-projection.
inline LabeledTS build_global_space(const ProcessNetwork& net, NodeId n, const PropositionSet& props,
                                    std::size_t state_cap = 1000000) {
  net.check_node(n);
  auto reach = reachable_global(net, state_cap);
  LabeledTS lts;
  for (const auto& d : props.defs) lts.prop_names.push_back(d.name);
  if (lts.prop_names.size() > 32) throw ModelError("too many propositions");
  int self = lts.intern_label("self");
  std::vector<int> actorLabel(net.num_nodes(), LabeledTS::TAU);
  actorLabel[n] = self;
  for (NodeId m : net.neighbors(n)) actorLabel[m] = lts.intern_label(interference_port_label(net, n, m));

  for (const auto& g : reach.states) {
    auto p = project(net, g, n);
    lts.add_state(g, props.mask_of(p.vals));
  }
  for (std::size_t s = 0; s < reach.states.size(); ++s)
    for (auto& [actor, dst] : reach.succ[s]) lts.add_transition(static_cast<int>(s), actorLabel[actor], dst);
  lts.initial = reach.initial;
  std::sort(lts.initial.begin(), lts.initial.end());
  lts.dedup_transitions();
  return ensure_total(std::move(lts));
}

// True when the only tau transitions are the self-loops added by
// totalization; such a space is exact for direct formula evaluation.
inline bool tau_free(const LabeledTS& lts) {
  for (int s = 0; s < lts.num_states(); ++s)
    for (auto& [lab, dst] : lts.adj[s]) {
      if (lab != LabeledTS::TAU) continue;
      bool totalization_loop =
          dst == s && std::find(lts.totalized.begin(), lts.totalized.end(), s) != lts.totalized.end();
      if (!totalization_loop) return false;
    }
  return true;
}

// One line per transition plus a state table; consumed by `spaces --dump`.
inline std::string dump_lts(const LabeledTS& lts) {
  std::string out;
  out += "states " + std::to_string(lts.num_states()) + "\n";
  for (int s = 0; s < lts.num_states(); ++s) {
    out += "state " + std::to_string(s);
    if (std::binary_search(lts.initial.begin(), lts.initial.end(), s)) out += " initial";
    out += " " + lts.state_name(s);
    for (std::size_t p = 0; p < lts.prop_names.size(); ++p)
      if (lts.has_prop(s, static_cast<int>(p))) out += " " + lts.prop_names[p];
    out += "\n";
  }
  for (int s = 0; s < lts.num_states(); ++s)
    for (auto& [lab, dst] : lts.adj[s])
      out += std::to_string(s) + " " + lts.labels[lab] + " " + std::to_string(dst) + "\n";
  return out;
}

}  // namespace lmu
