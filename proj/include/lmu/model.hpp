#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmu/core.hpp"
#include "lmu/expr.hpp"

namespace lmu {

struct Domain {
  std::string name;
  std::vector<std::string> values;

  int index_of(const std::string& v) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] == v) return static_cast<int>(i);
    return -1;
  }
  bool same_values(const Domain& o) const { return values == o.values; }
};

using DomainPtr = std::shared_ptr<const Domain>;

enum class PortMode : std::uint8_t { Read, Write, ReadWrite };

inline const char* to_string(PortMode m) {
  switch (m) {
    case PortMode::Read: return "read";
    case PortMode::Write: return "write";
    case PortMode::ReadWrite: return "readwrite";
  }
  return "?";
}

struct VariableDecl {
  std::string name;
  DomainPtr domain;
  bool is_port = false;
  PortMode mode = PortMode::ReadWrite;  // ports only
};

struct Assign {
  int target = -1;  // template frame slot
  bool from_const = true;
  Val const_val = 0;
  int src = -1;  // slot when !from_const
  bool operator==(const Assign&) const = default;
};

struct GuardedCommand {
  std::string name;
  BoolExpr guard;
  std::vector<Assign> updates;
  bool operator==(const GuardedCommand&) const = default;
};

struct PropDef {
  std::string name;
  BoolExpr pred;
  bool operator==(const PropDef&) const = default;
};

// A process template: variables (internal + port), an init predicate and
// guarded commands, all compiled against the frame [internals..., ports...].
struct ProcessTemplate {
  std::string name;
  std::vector<VariableDecl> internals;
  std::vector<VariableDecl> ports;
  BoolExpr init;
  std::vector<GuardedCommand> commands;
  std::vector<PropDef> props;

  int frame_size() const { return static_cast<int>(internals.size() + ports.size()); }
  int num_internals() const { return static_cast<int>(internals.size()); }
  int num_ports() const { return static_cast<int>(ports.size()); }
  int port_slot(int p) const { return num_internals() + p; }

  int find_port(const std::string& n) const {
    for (int i = 0; i < num_ports(); ++i)
      if (ports[i].name == n) return i;
    return -1;
  }
  int find_internal(const std::string& n) const {
    for (int i = 0; i < num_internals(); ++i)
      if (internals[i].name == n) return i;
    return -1;
  }
  // Slot for either kind of variable, -1 if unknown.
  int find_slot(const std::string& n) const {
    int i = find_internal(n);
    if (i >= 0) return i;
    int p = find_port(n);
    if (p >= 0) return port_slot(p);
    return -1;
  }
  const VariableDecl& slot_var(int slot) const {
    return slot < num_internals() ? internals[slot] : ports[slot - num_internals()];
  }
  const PropDef* find_prop(const std::string& n) const {
    for (const auto& p : props)
      if (p.name == n) return &p;
    return nullptr;
  }

  // Internal state spaces must be identical (positionally, by value lists)
  // for a similarity to exist between instances of two templates.
  bool same_internal_signature(const ProcessTemplate& o) const {
    if (internals.size() != o.internals.size()) return false;
    for (std::size_t i = 0; i < internals.size(); ++i)
      if (!internals[i].domain->same_values(*o.internals[i].domain)) return false;
    return true;
  }
};

using TemplatePtr = std::shared_ptr<const ProcessTemplate>;

struct NodeDecl {
  std::string name;
  TemplatePtr tmpl;
  std::vector<EdgeId> port_edges;  // indexed by template port
};

struct EdgeDecl {
  std::string name;
  DomainPtr domain;
  std::vector<std::pair<NodeId, int>> ends;  // (node, port index at that node)
};

// Network graph plus template assignment. In(n)/Out(n) derive from port
// modes: an edge bound to a read or readwrite port is in In(n), to a write
// or readwrite port in Out(n).
struct ProcessNetwork {
  std::string name;
  std::vector<NodeDecl> nodes;
  std::vector<EdgeDecl> edges;
  std::optional<BoolExpr> initially;  // over edge values, frame = edges by id

  // derived by finalize()
  std::vector<int> internal_offset;
  int total_internals = 0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int global_size() const { return total_internals + num_edges(); }
  int edge_slot(EdgeId e) const { return total_internals + e; }

  void check_node(NodeId n) const {
    if (n < 0 || n >= num_nodes()) throw ModelError("unknown node id " + std::to_string(n));
  }

  void finalize() {
    internal_offset.assign(nodes.size(), 0);
    total_internals = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      internal_offset[i] = total_internals;
      total_internals += nodes[i].tmpl->num_internals();
    }
    for (auto& e : edges) {
      std::sort(e.ends.begin(), e.ends.end());
      e.ends.erase(std::unique(e.ends.begin(), e.ends.end()), e.ends.end());
    }
    validate();
  }

  void validate() const {
    for (NodeId n = 0; n < num_nodes(); ++n) {
      const auto& nd = nodes[n];
      if (!nd.tmpl) throw ModelError("node " + nd.name + " has no template");
      if (static_cast<int>(nd.port_edges.size()) != nd.tmpl->num_ports())
        throw ModelError("node " + nd.name + ": every template port must be bound to an edge");
      std::set<EdgeId> seen;
      for (int p = 0; p < nd.tmpl->num_ports(); ++p) {
        EdgeId e = nd.port_edges[p];
        if (e < 0 || e >= num_edges()) throw ModelError("node " + nd.name + ": port bound to unknown edge");
        if (!seen.insert(e).second)
          throw ModelError("node " + nd.name + ": two ports bound to edge " + edges[e].name);
        if (!edges[e].domain->same_values(*nd.tmpl->ports[p].domain))
          throw ModelError("edge " + edges[e].name + " domain differs from port " + nd.tmpl->ports[p].name +
                           " at node " + nd.name);
      }
    }
    for (EdgeId e = 0; e < num_edges(); ++e) {
      if (edges[e].ends.empty()) throw ModelError("edge " + edges[e].name + " connects no node");
      for (auto [n, p] : edges[e].ends) {
        if (n < 0 || n >= num_nodes() || p < 0 || p >= nodes[n].tmpl->num_ports() ||
            nodes[n].port_edges[p] != e)
          throw ModelError("edge " + edges[e].name + " has inconsistent attachment");
      }
    }
  }

  // Port of n bound to e, or -1.
  int port_of_edge(NodeId n, EdgeId e) const {
    const auto& pe = nodes[n].port_edges;
    for (std::size_t p = 0; p < pe.size(); ++p)
      if (pe[p] == e) return static_cast<int>(p);
    return -1;
  }

  bool edge_in(NodeId n, EdgeId e) const {
    int p = port_of_edge(n, e);
    return p >= 0 && nodes[n].tmpl->ports[p].mode != PortMode::Write;
  }
  bool edge_out(NodeId n, EdgeId e) const {
    int p = port_of_edge(n, e);
    return p >= 0 && nodes[n].tmpl->ports[p].mode != PortMode::Read;
  }

  std::vector<EdgeId> connected_edges(NodeId n) const {
    std::vector<EdgeId> r(nodes[n].port_edges);
    std::sort(r.begin(), r.end());
    return r;
  }
  std::vector<EdgeId> in_edges(NodeId n) const {
    std::vector<EdgeId> r;
    for (int p = 0; p < nodes[n].tmpl->num_ports(); ++p)
      if (nodes[n].tmpl->ports[p].mode != PortMode::Write) r.push_back(nodes[n].port_edges[p]);
    std::sort(r.begin(), r.end());
    return r;
  }
  std::vector<EdgeId> out_edges(NodeId n) const {
    std::vector<EdgeId> r;
    for (int p = 0; p < nodes[n].tmpl->num_ports(); ++p)
      if (nodes[n].tmpl->ports[p].mode != PortMode::Read) r.push_back(nodes[n].port_edges[p]);
    std::sort(r.begin(), r.end());
    return r;
  }

  std::vector<EdgeId> shared_edges(NodeId m, NodeId n) const {
    std::vector<EdgeId> a = connected_edges(m), b = connected_edges(n), r;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r));
    return r;
  }

  bool nbr(NodeId m, NodeId n) const { return m != n && !shared_edges(m, n).empty(); }

  std::vector<NodeId> neighbors(NodeId n) const {
    std::set<NodeId> s;
    for (EdgeId e : nodes[n].port_edges)
      for (auto [k, p] : edges[e].ends)
        if (k != n) s.insert(k);
    return {s.begin(), s.end()};
  }

  // "k points to m": some edge in Out(k) and In(m).
  bool points_to(NodeId k, NodeId m) const {
    if (k == m) return false;
    for (EdgeId e : shared_edges(k, m))
      if (edge_out(k, e) && edge_in(m, e)) return true;
    return false;
  }
};

// A local state: values of a node's internal variables followed by the
// values of its connected edges, indexed by template port.
struct LocalState {
  NodeId node = -1;
  std::vector<Val> vals;

  auto operator<=>(const LocalState&) const = default;
};

struct GlobalState {
  std::vector<Val> vals;  // per-node internal blocks, then edges by id
  auto operator<=>(const GlobalState&) const = default;
};

inline LocalState project(const ProcessNetwork& net, const GlobalState& g, NodeId n) {
  net.check_node(n);
  const auto& nd = net.nodes[n];
  LocalState s;
  s.node = n;
  s.vals.reserve(nd.tmpl->frame_size());
  int off = net.internal_offset[n];
  for (int i = 0; i < nd.tmpl->num_internals(); ++i) s.vals.push_back(g.vals[off + i]);
  for (EdgeId e : nd.port_edges) s.vals.push_back(g.vals[net.edge_slot(e)]);
  return s;
}

inline std::vector<LocalState> enumerate_local_states(const ProcessNetwork& net, NodeId n) {
  net.check_node(n);
  const auto& t = *net.nodes[n].tmpl;
  std::vector<int> sizes;
  for (const auto& v : t.internals) sizes.push_back(static_cast<int>(v.domain->values.size()));
  for (const auto& v : t.ports) sizes.push_back(static_cast<int>(v.domain->values.size()));
  std::vector<LocalState> out;
  LocalState cur;
  cur.node = n;
  cur.vals.assign(sizes.size(), 0);
  while (true) {
    out.push_back(cur);
    int i = static_cast<int>(sizes.size()) - 1;
    for (; i >= 0; --i) {
      if (cur.vals[i] + 1 < sizes[i]) {
        ++cur.vals[i];
        std::fill(cur.vals.begin() + i + 1, cur.vals.end(), Val{0});
        break;
      }
    }
    if (i < 0) break;
  }
  return out;
}

inline std::vector<LocalState> initial_local_states(const ProcessNetwork& net, NodeId n) {
  std::vector<LocalState> out;
  for (auto& s : enumerate_local_states(net, n))
    if (net.nodes[n].tmpl->init.eval(s.vals.data())) out.push_back(std::move(s));
  return out;
}

inline std::vector<std::pair<std::string, LocalState>> step_successors(const ProcessNetwork& net, NodeId n,
                                                                       const LocalState& s) {
  net.check_node(n);
  const auto& t = *net.nodes[n].tmpl;
  if (s.node != n || static_cast<int>(s.vals.size()) != t.frame_size())
    throw ModelError("state does not belong to node " + net.nodes[n].name);
  std::vector<std::pair<std::string, LocalState>> out;
  for (const auto& c : t.commands) {
    if (!c.guard.eval(s.vals.data())) continue;
    LocalState t2 = s;
    for (const auto& a : c.updates) t2.vals[a.target] = a.from_const ? a.const_val : s.vals[a.src];
    out.emplace_back(c.name, std::move(t2));
  }
  return out;
}

// Steps of neighbor m from a joint state (s, u); the result copies u' onto
// the shared edges of s and leaves everything else in s unchanged.
inline std::vector<std::tuple<std::string, LocalState, LocalState>> interference_successors(
    const ProcessNetwork& net, NodeId n, const LocalState& s, NodeId m, const LocalState& u) {
  net.check_node(n);
  net.check_node(m);
  auto shared = net.shared_edges(n, m);
  for (EdgeId e : shared) {
    int pn = net.port_of_edge(n, e), pm = net.port_of_edge(m, e);
    if (s.vals[net.nodes[n].tmpl->port_slot(pn)] != u.vals[net.nodes[m].tmpl->port_slot(pm)])
      throw ModelError("not a joint state: disagreement on shared edge " + net.edges[e].name);
  }
  std::vector<std::tuple<std::string, LocalState, LocalState>> out;
  for (auto& [cmd, u2] : step_successors(net, m, u)) {
    LocalState s2 = s;
    for (EdgeId e : shared) {
      int pn = net.port_of_edge(n, e), pm = net.port_of_edge(m, e);
      s2.vals[net.nodes[n].tmpl->port_slot(pn)] = u2.vals[net.nodes[m].tmpl->port_slot(pm)];
    }
    out.emplace_back(cmd, std::move(s2), std::move(u2));
  }
  return out;
}

namespace detail {

// Per-node table of edge valuations (by port) that admit some internal
// valuation satisfying the node's init predicate; internal completions kept.
struct InitEdgeTable {
  const ProcessNetwork* net = nullptr;
  NodeId n = -1;
  std::map<std::vector<Val>, std::vector<std::vector<Val>>> completions;

  void build(const ProcessNetwork& network, NodeId node) {
    net = &network;
    n = node;
    const auto& t = *network.nodes[node].tmpl;
    for (const auto& s : enumerate_local_states(network, node)) {
      if (!t.init.eval(s.vals.data())) continue;
      std::vector<Val> ev(s.vals.begin() + t.num_internals(), s.vals.end());
      std::vector<Val> iv(s.vals.begin(), s.vals.begin() + t.num_internals());
      completions[ev].push_back(iv);
    }
  }
  bool feasible(const std::vector<Val>& edgeVals) const { return completions.count(edgeVals) > 0; }
};

inline std::vector<Val> node_edge_view(const ProcessNetwork& net, NodeId n, const std::vector<int>& edgeAssign) {
  std::vector<Val> ev;
  for (EdgeId e : net.nodes[n].port_edges) ev.push_back(static_cast<Val>(edgeAssign[e]));
  return ev;
}

// Enumerates edge valuations consistent with every node's init predicate and
// the network-level constraint. `fixed` pins chosen edges. Calls sink on
// each full valuation; sink returning false stops the search.
template <typename Sink>
bool enumerate_initial_edges(const ProcessNetwork& net, const std::vector<InitEdgeTable>& tables,
                             std::vector<int>& assign, std::size_t& budget, const Sink& sink) {
  int e = -1;
  for (int i = 0; i < net.num_edges(); ++i)
    if (assign[i] < 0) {
      e = i;
      break;
    }
  if (e < 0) {
    if (net.initially) {
      std::vector<Val> frame(assign.begin(), assign.end());
      if (!net.initially->eval(frame.data())) return true;
    }
    return sink(assign);
  }
  if (budget-- == 0) throw CapError("initial-state search budget exceeded");
  int dsz = static_cast<int>(net.edges[e].domain->values.size());
  for (int v = 0; v < dsz; ++v) {
    assign[e] = v;
    bool ok = true;
    for (auto [n, p] : net.edges[e].ends) {
      (void)p;
      bool complete = true;
      for (EdgeId e2 : net.nodes[n].port_edges)
        if (assign[e2] < 0) {
          complete = false;
          break;
        }
      if (complete && !tables[n].feasible(node_edge_view(net, n, assign))) {
        ok = false;
        break;
      }
    }
    if (ok && !enumerate_initial_edges(net, tables, assign, budget, sink)) {
      assign[e] = -1;
      return false;
    }
    assign[e] = -1;
  }
  return true;
}

inline std::vector<InitEdgeTable> init_tables(const ProcessNetwork& net) {
  std::vector<InitEdgeTable> tables(net.num_nodes());
  for (NodeId n = 0; n < net.num_nodes(); ++n) tables[n].build(net, n);
  return tables;
}

}  // namespace detail

// All global initial states: every node's init predicate holds and the
// network-level initial constraint (if any) is satisfied.
inline std::vector<GlobalState> global_initial(const ProcessNetwork& net, std::size_t cap = 1000000) {
  auto tables = detail::init_tables(net);
  std::vector<int> assign(net.num_edges(), -1);
  std::vector<GlobalState> out;
  std::size_t budget = 50000000;
  detail::enumerate_initial_edges(net, tables, assign, budget, [&](const std::vector<int>& edges) {
    // expand per-node internal completions
    std::vector<const std::vector<std::vector<Val>>*> comp;
    for (NodeId n = 0; n < net.num_nodes(); ++n) {
      auto it = tables[n].completions.find(detail::node_edge_view(net, n, edges));
      comp.push_back(&it->second);
    }
    std::vector<std::size_t> idx(net.num_nodes(), 0);
    while (true) {
      GlobalState g;
      g.vals.assign(net.global_size(), 0);
      for (NodeId n = 0; n < net.num_nodes(); ++n) {
        const auto& iv = (*comp[n])[idx[n]];
        std::copy(iv.begin(), iv.end(), g.vals.begin() + net.internal_offset[n]);
      }
      for (int e = 0; e < net.num_edges(); ++e) g.vals[net.edge_slot(e)] = static_cast<Val>(edges[e]);
      out.push_back(std::move(g));
      if (out.size() > cap) throw CapError("global initial state cap exceeded");
      int i = net.num_nodes() - 1;
      for (; i >= 0; --i) {
        if (idx[i] + 1 < comp[i]->size()) {
          ++idx[i];
          std::fill(idx.begin() + i + 1, idx.end(), std::size_t{0});
          break;
        }
      }
      if (i < 0) break;
    }
    return true;
  });
  std::sort(out.begin(), out.end());
  return out;
}

// Local states of n consistent with some global initial state. These seed
// the compositional fixpoint and serve as the initial states of local spaces.
inline std::vector<LocalState> initial_consistent_local_states(const ProcessNetwork& net, NodeId n) {
  net.check_node(n);
  auto tables = detail::init_tables(net);
  const auto& t = *net.nodes[n].tmpl;
  std::vector<LocalState> out;
  for (const auto& [edgeView, internals] : tables[n].completions) {
    // check extensibility of this edge view to a full initial valuation
    std::vector<int> assign(net.num_edges(), -1);
    for (int p = 0; p < t.num_ports(); ++p) assign[net.nodes[n].port_edges[p]] = edgeView[p];
    bool extensible = false;
    std::size_t budget = 5000000;
    detail::enumerate_initial_edges(net, tables, assign, budget, [&](const std::vector<int>&) {
      extensible = true;
      return false;  // first witness suffices
    });
    if (!extensible) continue;
    for (const auto& iv : internals) {
      LocalState s;
      s.node = n;
      s.vals = iv;
      s.vals.insert(s.vals.end(), edgeView.begin(), edgeView.end());
      out.push_back(std::move(s));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::pair<NodeId, GlobalState>> global_successors(const ProcessNetwork& net,
                                                                     const GlobalState& g) {
  std::vector<std::pair<NodeId, GlobalState>> out;
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    LocalState s = project(net, g, n);
    for (auto& [cmd, s2] : step_successors(net, n, s)) {
      (void)cmd;
      GlobalState g2 = g;
      const auto& t = *net.nodes[n].tmpl;
      for (int i = 0; i < t.num_internals(); ++i) g2.vals[net.internal_offset[n] + i] = s2.vals[i];
      for (int p = 0; p < t.num_ports(); ++p)
        g2.vals[net.edge_slot(net.nodes[n].port_edges[p])] = s2.vals[t.port_slot(p)];
      out.emplace_back(n, std::move(g2));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Breadth-first reachable global state space.
struct GlobalReach {
  std::vector<GlobalState> states;  // by id, discovery order
  std::vector<int> initial;
  std::vector<std::vector<std::pair<NodeId, int>>> succ;  // (acting node, target id)
  std::unordered_map<std::vector<Val>, int, ValVecHash> index;
};

inline GlobalReach reachable_global(const ProcessNetwork& net, std::size_t cap = 1000000) {
  GlobalReach r;
  std::queue<int> work;
  for (auto& g : global_initial(net, cap)) {
    auto [it, fresh] = r.index.emplace(g.vals, static_cast<int>(r.states.size()));
    if (fresh) {
      r.states.push_back(g);
      r.initial.push_back(it->second);
      work.push(it->second);
    }
  }
  r.succ.resize(r.states.size());
  while (!work.empty()) {
    int id = work.front();
    work.pop();
    auto succs = global_successors(net, r.states[id]);
    for (auto& [n, g2] : succs) {
      auto [it, fresh] = r.index.emplace(g2.vals, static_cast<int>(r.states.size()));
      if (fresh) {
        if (r.states.size() >= cap) throw CapError("global reachable state cap exceeded");
        r.states.push_back(g2);
        r.succ.emplace_back();
        work.push(it->second);
      }
      r.succ[id].emplace_back(n, it->second);
    }
  }
  return r;
}

}  // namespace lmu
