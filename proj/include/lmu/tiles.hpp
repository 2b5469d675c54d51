#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "lmu/balance.hpp"
#include "lmu/model.hpp"

namespace lmu {

// A tile: for each direction (port) of a process type, the type of the
// neighbor reached through that edge and the direction under which the
// neighbor sees it.
struct TileType {
  TemplatePtr tmpl;
  std::vector<std::pair<int, int>> expect;  // per port: (type index, port index)
};

struct TileSet {
  std::string name;
  std::vector<TileType> types;

  int type_of(const TemplatePtr& t) const {
    for (std::size_t i = 0; i < types.size(); ++i)
      if (types[i].tmpl->name == t->name) return static_cast<int>(i);
    return -1;
  }

  // Mutual consistency: if A's direction d expects (B, d'), then B's tile at
  // d' expects (A, d), and the shared-edge domains agree.
  void validate() const {
    for (std::size_t a = 0; a < types.size(); ++a) {
      const auto& ta = types[a];
      if (static_cast<int>(ta.expect.size()) != ta.tmpl->num_ports())
        throw ModelError("tile " + ta.tmpl->name + " must cover every direction");
      for (int d = 0; d < ta.tmpl->num_ports(); ++d) {
        auto [b, d2] = ta.expect[d];
        if (b < 0 || b >= static_cast<int>(types.size()))
          throw ModelError("tile " + ta.tmpl->name + ": unknown neighbor type");
        const auto& tb = types[b];
        if (d2 < 0 || d2 >= tb.tmpl->num_ports())
          throw ModelError("tile " + ta.tmpl->name + ": unknown neighbor direction");
        if (tb.expect[d2] != std::make_pair(static_cast<int>(a), d))
          throw ModelError("tiles " + ta.tmpl->name + "." + ta.tmpl->ports[d].name + " and " + tb.tmpl->name +
                           "." + tb.tmpl->ports[d2].name + " do not agree");
        if (!ta.tmpl->ports[d].domain->same_values(*tb.tmpl->ports[d2].domain))
          throw ModelError("tile edge domains disagree at " + ta.tmpl->name + "." + ta.tmpl->ports[d].name);
      }
    }
  }
};

struct TileViolation {
  NodeId node;
  std::string direction;
  std::string reason;
};

// Both family conditions: every node is an instance of a type, and its
// depth-1 neighborhood matches the type's tile.
inline std::optional<TileViolation> validate_instance(const TileSet& tiles, const ProcessNetwork& net) {
  tiles.validate();
  for (NodeId n = 0; n < net.num_nodes(); ++n) {
    int ty = tiles.type_of(net.nodes[n].tmpl);
    if (ty < 0) return TileViolation{n, "", "node template is not a tile type"};
    const auto& tile = tiles.types[ty];
    for (int d = 0; d < net.nodes[n].tmpl->num_ports(); ++d) {
      EdgeId e = net.nodes[n].port_edges[d];
      const std::string& dir = net.nodes[n].tmpl->ports[d].name;
      if (net.edges[e].ends.size() != 2)
        return TileViolation{n, dir, "tile edges must connect exactly two nodes"};
      auto [wantType, wantDir] = tile.expect[d];
      for (auto [k, q] : net.edges[e].ends) {
        if (k == n && q == d) continue;
        if (k == n) return TileViolation{n, dir, "edge loops back to the same node"};
        int kt = tiles.type_of(net.nodes[k].tmpl);
        if (kt != wantType)
          return TileViolation{n, dir, "neighbor has type " + net.nodes[k].tmpl->name + ", tile expects " +
                                            tiles.types[wantType].tmpl->name};
        if (q != wantDir)
          return TileViolation{n, dir, "neighbor attaches via " + net.nodes[k].tmpl->ports[q].name +
                                            ", tile expects " + tiles.types[wantType].tmpl->ports[wantDir].name};
      }
    }
  }
  return std::nullopt;
}

// The balance relation induced by a tiling: same-type nodes related through
// the direction-respecting edge map.
inline BalanceRelation induced_balance(const TileSet& tiles, const ProcessNetwork& net) {
  if (auto v = validate_instance(tiles, net))
    throw ModelError("not a family instance: " + v->reason + " at node " + net.nodes[v->node].name);
  BalanceRelation B;
  for (NodeId m = 0; m < net.num_nodes(); ++m)
    for (NodeId n = 0; n < net.num_nodes(); ++n) {
      if (tiles.type_of(net.nodes[m].tmpl) != tiles.type_of(net.nodes[n].tmpl)) continue;
      Similarity s = Similarity::identity(m, net.nodes[m].tmpl->num_ports());
      s.n = n;  // direction a of m maps to direction a of n
      B.triples.push_back(std::move(s));
    }
  B.canonicalize();
  return B;
}

// ---------------------------------------------------------------------------
// Instance generators. Rings use the convention that a node's second listed
// direction points forward; tori pair directions by their tile inverses.
// ---------------------------------------------------------------------------

inline ProcessNetwork generate_ring(const TileSet& tiles, int n, std::optional<BoolExpr> initially = {}) {
  tiles.validate();
  int ntypes = static_cast<int>(tiles.types.size());
  if (ntypes < 1 || ntypes > 2) throw ModelError("ring generation needs one or two tile types");
  if (n < 2) throw ModelError("ring size must be at least 2");
  if (n % ntypes != 0) throw ModelError("ring size must be a multiple of the number of tile types");
  for (const auto& t : tiles.types)
    if (t.tmpl->num_ports() != 2) throw ModelError("ring tiles need exactly two directions");

  ProcessNetwork net;
  net.name = "ring" + std::to_string(n);
  auto edgeDomain = tiles.types[0].tmpl->ports[0].domain;
  for (int i = 0; i < n; ++i) net.edges.push_back({"e" + std::to_string(i), edgeDomain, {}});
  for (int i = 0; i < n; ++i) {
    const auto& t = tiles.types[i % ntypes];
    NodeDecl nd;
    nd.name = "p" + std::to_string(i);
    nd.tmpl = t.tmpl;
    nd.port_edges = {i, (i + 1) % n};  // port 0 backward, port 1 forward
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % n].ends.emplace_back(i, 1);
  }
  net.initially = std::move(initially);
  net.finalize();
  if (auto v = validate_instance(tiles, net))
    throw ModelError("generated ring does not satisfy its tiles: " + v->reason);
  return net;
}

inline ProcessNetwork generate_torus(const TileSet& tiles, int w, int h,
                                     std::optional<BoolExpr> initially = {}) {
  tiles.validate();
  if (tiles.types.size() != 1) throw ModelError("torus generation needs a single tile type");
  if (w < 3 || h < 3) throw ModelError("torus sides must be at least 3");
  const auto& tile = tiles.types[0];
  if (tile.tmpl->num_ports() != 4) throw ModelError("torus tiles need exactly four directions");
  // directions pair up with their tile inverses
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> used(4, false);
  for (int d = 0; d < 4; ++d) {
    if (used[d]) continue;
    auto [ty, d2] = tile.expect[d];
    if (ty != 0 || d2 == d || used[d2]) throw ModelError("torus tile directions must pair up");
    used[d] = used[d2] = true;
    pairs.emplace_back(d, d2);
  }
  // first pair is vertical (down = first element), second horizontal
  auto [down, up] = pairs[0];
  auto [fwd, bwd] = pairs[1];

  ProcessNetwork net;
  net.name = "torus" + std::to_string(w) + "x" + std::to_string(h);
  auto dom = tile.tmpl->ports[0].domain;
  auto vid = [&](int x, int y) { return (y * w + x); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) net.edges.push_back({"h" + std::to_string(x) + "_" + std::to_string(y), dom, {}});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) net.edges.push_back({"v" + std::to_string(x) + "_" + std::to_string(y), dom, {}});
  int vOff = w * h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      NodeDecl nd;
      nd.name = "c" + std::to_string(x) + "_" + std::to_string(y);
      nd.tmpl = tile.tmpl;
      nd.port_edges.assign(4, -1);
      nd.port_edges[fwd] = vid(x, y);                    // horizontal edge forward
      nd.port_edges[bwd] = vid((x + w - 1) % w, y);      // from the left neighbor
      nd.port_edges[down] = vOff + vid(x, y);            // vertical edge downward
      nd.port_edges[up] = vOff + vid(x, (y + h - 1) % h);
      NodeId id = static_cast<NodeId>(net.nodes.size());
      net.nodes.push_back(nd);
      for (int p = 0; p < 4; ++p) net.edges[net.nodes[id].port_edges[p]].ends.emplace_back(id, p);
    }
  net.initially = std::move(initially);
  net.finalize();
  if (auto v = validate_instance(tiles, net))
    throw ModelError("generated torus does not satisfy its tiles: " + v->reason);
  return net;
}

}  // namespace lmu
