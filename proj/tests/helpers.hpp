#pragma once

// Hand-built fixtures shared across test binaries.

#include <memory>
#include <string>

#include "lmu/model.hpp"
#include "lmu/tiles.hpp"

namespace fixtures {

using namespace lmu;

inline DomainPtr tok_domain() {
  return std::make_shared<Domain>(Domain{"Tok", {"none", "tok"}});
}

// The round-robin token template: state in {T,H,E}, xin/xout over Tok.
// Frame layout: [state, xin, xout].
inline TemplatePtr phil_template() {
  auto st = std::make_shared<Domain>(Domain{"St", {"T", "H", "E"}});
  auto tok = tok_domain();
  ProcessTemplate t;
  t.name = "Phil";
  t.internals = {{"state", st, false, PortMode::ReadWrite}};
  t.ports = {{"xin", tok, true, PortMode::ReadWrite}, {"xout", tok, true, PortMode::ReadWrite}};
  t.init = BoolExpr::eq(0, 0);  // state == T
  const Val T = 0, H = 1, E = 2, none = 0, tokv = 1;
  t.commands.push_back({"enterH", BoolExpr::eq(0, T), {{0, true, H, -1}}});
  t.commands.push_back({"pass",
                        BoolExpr::conj({BoolExpr::eq(0, T), BoolExpr::eq(1, tokv), BoolExpr::eq(2, none)}),
                        {{1, true, none, -1}, {2, true, tokv, -1}}});
  t.commands.push_back({"eat", BoolExpr::conj({BoolExpr::eq(0, H), BoolExpr::eq(1, tokv)}), {{0, true, E, -1}}});
  t.commands.push_back({"exit",
                        BoolExpr::conj({BoolExpr::eq(0, E), BoolExpr::eq(2, none)}),
                        {{0, true, T, -1}, {1, true, none, -1}, {2, true, tokv, -1}}});
  t.props.push_back({"inE", BoolExpr::eq(0, E)});
  t.props.push_back({"hungry", BoolExpr::eq(0, H)});
  t.props.push_back({"hasTok", BoolExpr::eq(1, tokv)});
  return std::make_shared<ProcessTemplate>(std::move(t));
}

// Unidirectional token ring of size n with a single-token initial constraint.
inline ProcessNetwork token_ring(int n, TemplatePtr tmpl = nullptr) {
  if (!tmpl) tmpl = phil_template();
  auto tok = tmpl->ports[0].domain;
  ProcessNetwork net;
  net.name = "ring" + std::to_string(n);
  for (int i = 0; i < n; ++i) net.edges.push_back({"e" + std::to_string(i), tok, {}});
  for (int i = 0; i < n; ++i) {
    NodeDecl nd;
    nd.name = "p" + std::to_string(i);
    nd.tmpl = tmpl;
    nd.port_edges = {i, (i + 1) % n};  // xin = e_i, xout = e_{i+1}
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % n].ends.emplace_back(i, 1);
  }
  std::vector<BoolExpr> atoms;
  for (int i = 0; i < n; ++i) atoms.push_back(BoolExpr::eq(i, 1));  // e_i == tok
  net.initially = BoolExpr::exactly(1, std::move(atoms));
  net.finalize();
  return net;
}

// A template with no variables and no commands.
inline TemplatePtr empty_template() {
  ProcessTemplate t;
  t.name = "Unit";
  t.init = BoolExpr::make_true();
  return std::make_shared<ProcessTemplate>(std::move(t));
}

inline ProcessNetwork isolated_node() {
  ProcessNetwork net;
  net.name = "lonely";
  NodeDecl nd;
  nd.name = "u0";
  nd.tmpl = empty_template();
  net.nodes.push_back(nd);
  net.finalize();
  return net;
}

inline Val value_of(const ProcessNetwork& net, NodeId n, const std::string& var, const LocalState& s) {
  int slot = net.nodes[n].tmpl->find_slot(var);
  return s.vals[static_cast<std::size_t>(slot)];
}

// Dining philosophers with independent fork acquisition and voluntary
// give-up. Fork values: onTable, takenL (held by the phil whose left fork
// this is), takenR. Frame: [st, lf, rf].
inline TemplatePtr diner_template() {
  auto st = std::make_shared<Domain>(Domain{"Mood", {"thinking", "hungry", "eating"}});
  auto fork = std::make_shared<Domain>(Domain{"Fork", {"onTable", "takenL", "takenR"}});
  ProcessTemplate t;
  t.name = "Diner";
  t.internals = {{"st", st, false, PortMode::ReadWrite}};
  t.ports = {{"lf", fork, true, PortMode::ReadWrite}, {"rf", fork, true, PortMode::ReadWrite}};
  const Val thinking = 0, hungry = 1, eating = 2, onTable = 0, takenL = 1, takenR = 2;
  t.init = BoolExpr::conj({BoolExpr::eq(0, thinking), BoolExpr::eq(1, onTable), BoolExpr::eq(2, onTable)});
  t.commands.push_back({"wake", BoolExpr::eq(0, thinking), {{0, true, hungry, -1}}});
  t.commands.push_back({"takeL",
                        BoolExpr::conj({BoolExpr::eq(0, hungry), BoolExpr::eq(1, onTable)}),
                        {{1, true, takenL, -1}}});
  t.commands.push_back({"takeR",
                        BoolExpr::conj({BoolExpr::eq(0, hungry), BoolExpr::eq(2, onTable)}),
                        {{2, true, takenR, -1}}});
  t.commands.push_back({"dropL",
                        BoolExpr::conj({BoolExpr::eq(0, hungry), BoolExpr::eq(1, takenL)}),
                        {{1, true, onTable, -1}}});
  t.commands.push_back({"dropR",
                        BoolExpr::conj({BoolExpr::eq(0, hungry), BoolExpr::eq(2, takenR)}),
                        {{2, true, onTable, -1}}});
  t.commands.push_back({"eat",
                        BoolExpr::conj({BoolExpr::eq(0, hungry), BoolExpr::eq(1, takenL), BoolExpr::eq(2, takenR)}),
                        {{0, true, eating, -1}}});
  t.commands.push_back({"done",
                        BoolExpr::eq(0, eating),
                        {{0, true, thinking, -1}, {1, true, onTable, -1}, {2, true, onTable, -1}}});
  t.props.push_back({"dining", BoolExpr::eq(0, eating)});
  t.props.push_back({"starving", BoolExpr::eq(0, hungry)});
  return std::make_shared<ProcessTemplate>(std::move(t));
}

// Ring of diners; fork edge i sits between diner i (as lf) and diner i-1
// (as rf). No network-level constraint: per-process inits pin the forks.
inline ProcessNetwork dining_ring(int n) {
  auto tmpl = diner_template();
  auto fork = tmpl->ports[0].domain;
  ProcessNetwork net;
  net.name = "dining" + std::to_string(n);
  for (int i = 0; i < n; ++i) net.edges.push_back({"f" + std::to_string(i), fork, {}});
  for (int i = 0; i < n; ++i) {
    NodeDecl nd;
    nd.name = "d" + std::to_string(i);
    nd.tmpl = tmpl;
    nd.port_edges = {i, (i + 1) % n};  // lf = f_i, rf = f_{i+1}
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % n].ends.emplace_back(i, 1);
  }
  net.finalize();
  return net;
}

// Token ring variant for multi-token runs: passing marks the vacated edge
// as used instead of clearing it, so an edge never returns to none.
// Mark domain: none, tok, used. Frame: [state, xin, xout].
inline TemplatePtr courier_template() {
  auto st = std::make_shared<Domain>(Domain{"St", {"T", "H", "E"}});
  auto mark = std::make_shared<Domain>(Domain{"Mark", {"none", "tok", "used"}});
  ProcessTemplate t;
  t.name = "Courier";
  t.internals = {{"state", st, false, PortMode::ReadWrite}};
  t.ports = {{"xin", mark, true, PortMode::ReadWrite}, {"xout", mark, true, PortMode::ReadWrite}};
  const Val T = 0, H = 1, E = 2, tokv = 1, used = 2;
  t.init = BoolExpr::conj({BoolExpr::eq(0, T), BoolExpr::ne(1, used), BoolExpr::ne(2, used)});
  t.commands.push_back({"enterH", BoolExpr::eq(0, T), {{0, true, H, -1}}});
  t.commands.push_back({"pass",
                        BoolExpr::conj({BoolExpr::eq(0, T), BoolExpr::eq(1, tokv), BoolExpr::ne(2, tokv)}),
                        {{1, true, used, -1}, {2, true, tokv, -1}}});
  t.commands.push_back({"eat", BoolExpr::conj({BoolExpr::eq(0, H), BoolExpr::eq(1, tokv)}), {{0, true, E, -1}}});
  t.commands.push_back({"exit",
                        BoolExpr::conj({BoolExpr::eq(0, E), BoolExpr::ne(2, tokv)}),
                        {{0, true, T, -1}, {1, true, used, -1}, {2, true, tokv, -1}}});
  t.props.push_back({"inE", BoolExpr::eq(0, E)});
  t.props.push_back({"hungry", BoolExpr::eq(0, H)});
  return std::make_shared<ProcessTemplate>(std::move(t));
}

// Ring of couriers with exactly k tokens placed initially.
inline ProcessNetwork courier_ring(int n, int tokens) {
  auto tmpl = courier_template();
  auto mark = tmpl->ports[0].domain;
  ProcessNetwork net;
  net.name = "ring" + std::to_string(tokens) + "tok" + std::to_string(n);
  for (int i = 0; i < n; ++i) net.edges.push_back({"e" + std::to_string(i), mark, {}});
  for (int i = 0; i < n; ++i) {
    NodeDecl nd;
    nd.name = "p" + std::to_string(i);
    nd.tmpl = tmpl;
    nd.port_edges = {i, (i + 1) % n};
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % n].ends.emplace_back(i, 1);
  }
  std::vector<BoolExpr> atoms;
  for (int i = 0; i < n; ++i) atoms.push_back(BoolExpr::eq(i, 1));
  net.initially = BoolExpr::exactly(static_cast<unsigned>(tokens), std::move(atoms));
  net.finalize();
  return net;
}

// A stateless relay: no internal variables, just token forwarding.
inline TemplatePtr relay_template() {
  auto tok = tok_domain();
  ProcessTemplate t;
  t.name = "Relay";
  t.ports = {{"xin", tok, true, PortMode::ReadWrite}, {"xout", tok, true, PortMode::ReadWrite}};
  t.init = BoolExpr::make_true();
  t.commands.push_back({"relay",
                        BoolExpr::conj({BoolExpr::eq(0, 1), BoolExpr::eq(1, 0)}),
                        {{0, true, 0, -1}, {1, true, 1, -1}}});
  t.props.push_back({"carrying", BoolExpr::eq(0, 1)});
  return std::make_shared<ProcessTemplate>(std::move(t));
}

// Alternating two-type ring (even size) with a single-token constraint.
inline ProcessNetwork red_black_ring(int n) {
  auto red = phil_template();
  auto black = relay_template();
  auto tok = tok_domain();
  ProcessNetwork net;
  net.name = "rb" + std::to_string(n);
  for (int i = 0; i < n; ++i) net.edges.push_back({"e" + std::to_string(i), tok, {}});
  for (int i = 0; i < n; ++i) {
    NodeDecl nd;
    nd.name = (i % 2 == 0 ? "r" : "b") + std::to_string(i / 2);
    nd.tmpl = i % 2 == 0 ? red : black;
    nd.port_edges = {i, (i + 1) % n};
    net.nodes.push_back(nd);
    net.edges[i].ends.emplace_back(i, 0);
    net.edges[(i + 1) % n].ends.emplace_back(i, 1);
  }
  std::vector<BoolExpr> atoms;
  for (int i = 0; i < n; ++i) atoms.push_back(BoolExpr::eq(i, 1));
  net.initially = BoolExpr::exactly(1, std::move(atoms));
  net.finalize();
  return net;
}

// A torus cell moving a single token east or turning it south.
// Ports: north, south, east, west over Tok.
inline TemplatePtr cell_template() {
  auto tok = tok_domain();
  ProcessTemplate t;
  t.name = "Cell";
  t.ports = {{"north", tok, true, PortMode::ReadWrite},
             {"south", tok, true, PortMode::ReadWrite},
             {"east", tok, true, PortMode::ReadWrite},
             {"west", tok, true, PortMode::ReadWrite}};
  t.init = BoolExpr::make_true();
  const int north = 0, south = 1, east = 2, west = 3;
  t.init = BoolExpr::make_true();
  t.commands.push_back({"passEW",
                        BoolExpr::conj({BoolExpr::eq(west, 1), BoolExpr::eq(east, 0)}),
                        {{west, true, 0, -1}, {east, true, 1, -1}}});
  t.commands.push_back({"turnWS",
                        BoolExpr::conj({BoolExpr::eq(west, 1), BoolExpr::eq(south, 0)}),
                        {{west, true, 0, -1}, {south, true, 1, -1}}});
  t.commands.push_back({"passNS",
                        BoolExpr::conj({BoolExpr::eq(north, 1), BoolExpr::eq(south, 0)}),
                        {{north, true, 0, -1}, {south, true, 1, -1}}});
  t.commands.push_back({"turnNE",
                        BoolExpr::conj({BoolExpr::eq(north, 1), BoolExpr::eq(east, 0)}),
                        {{north, true, 0, -1}, {east, true, 1, -1}}});
  t.props.push_back({"feeding", BoolExpr::eq(west, 1)});
  return std::make_shared<ProcessTemplate>(std::move(t));
}

inline lmu::TileSet ring_tiles(TemplatePtr tmpl = nullptr) {
  if (!tmpl) tmpl = phil_template();
  lmu::TileSet ts;
  ts.name = "Ring";
  ts.types.push_back({tmpl, {{0, 1}, {0, 0}}});  // xin <- other's xout, xout -> other's xin
  return ts;
}

inline lmu::TileSet red_black_tiles() {
  lmu::TileSet ts;
  ts.name = "RB";
  ts.types.push_back({phil_template(), {{1, 1}, {1, 0}}});
  ts.types.push_back({relay_template(), {{0, 1}, {0, 0}}});
  return ts;
}

inline lmu::TileSet torus_tiles() {
  lmu::TileSet ts;
  ts.name = "Grid";
  // north <-> south, east <-> west
  ts.types.push_back({cell_template(), {{0, 1}, {0, 0}, {0, 3}, {0, 2}}});
  return ts;
}

// Two nodes; the sender's ability to interfere hinges on an internal flag
// fixed nondeterministically at initialization.
inline ProcessNetwork non_outward_pair() {
  auto flag = std::make_shared<Domain>(Domain{"Flag", {"off", "on"}});
  auto sig = std::make_shared<Domain>(Domain{"Sig", {"none", "sig"}});
  const Val on = 1, none = 0, sigv = 1, no = 0, yes = 1;

  ProcessTemplate fl;
  fl.name = "Gate";
  fl.internals = {{"f", flag, false, PortMode::ReadWrite}};
  fl.ports = {{"out", sig, true, PortMode::ReadWrite}};
  fl.init = BoolExpr::make_true();  // flag chosen at initialization
  fl.commands.push_back({"send",
                         BoolExpr::conj({BoolExpr::eq(0, on), BoolExpr::eq(1, none)}),
                         {{1, true, sigv, -1}}});

  auto seen = std::make_shared<Domain>(Domain{"Seen", {"no", "yes"}});
  ProcessTemplate ob;
  ob.name = "Probe";
  ob.internals = {{"got", seen, false, PortMode::ReadWrite}};
  ob.ports = {{"in", sig, true, PortMode::ReadWrite}};
  ob.init = BoolExpr::eq(0, no);
  ob.commands.push_back({"recv", BoolExpr::eq(1, sigv), {{0, true, yes, -1}, {1, true, none, -1}}});
  ob.props.push_back({"saw", BoolExpr::eq(0, yes)});

  ProcessNetwork net;
  net.name = "gate_probe";
  net.edges.push_back({"e", sig, {}});
  net.nodes.push_back({"a", std::make_shared<ProcessTemplate>(std::move(fl)), {0}});
  net.nodes.push_back({"b", std::make_shared<ProcessTemplate>(std::move(ob)), {0}});
  net.edges[0].ends = {{0, 0}, {1, 0}};
  net.initially = BoolExpr::eq(0, none);
  net.finalize();
  return net;
}

inline LocalState mk_local(const ProcessNetwork& net, NodeId n, std::vector<Val> vals) {
  (void)net;
  LocalState s;
  s.node = n;
  s.vals = std::move(vals);
  return s;
}

}  // namespace fixtures
