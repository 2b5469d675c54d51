// Command-line front end: parse -> balance -> invariant -> spaces -> check
// -> transfer verdict -> oracle, plus balance/tiles/outward/report views.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmu/dsl.hpp"
#include "lmu/relations.hpp"
#include "lmu/report.hpp"
#include "lmu/tiles.hpp"

using json = nlohmann::json;
using namespace lmu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCap = 3;

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double limit_seconds;
  explicit Clock(double limit) : limit_seconds(limit) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  void checkpoint() const {
    if (elapsed() > limit_seconds) throw CapError("time limit exceeded");
  }
};

ModelDocument load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError({{std::string("cannot open ") + path, {}}});
  std::ostringstream ss;
  ss << in.rdbuf();
  auto res = parse_model(ss.str(), path);
  if (!res.ok()) throw ParseError(std::move(res.diagnostics));
  return std::move(*res.doc);
}

const ProcessNetwork& pick_network(const ModelDocument& doc, const std::string& name) {
  if (!name.empty()) {
    const auto* net = doc.find_network(name);
    if (!net) throw ParseError({{std::string("no network named ") + name, {}}});
    return *net;
  }
  if (doc.networks.empty()) throw ParseError({{std::string("model declares no network"), {}}});
  return doc.networks.front();
}

NodeId node_by_name(const ProcessNetwork& net, const std::string& name) {
  for (NodeId n = 0; n < net.num_nodes(); ++n)
    if (net.nodes[n].name == name) return n;
  throw ParseError({{std::string("no node named ") + name, {}}});
}

json local_state_json(const ProcessNetwork& net, const LocalState& s) {
  json j;
  const auto& t = *net.nodes[s.node].tmpl;
  for (int i = 0; i < t.num_internals(); ++i) j[t.internals[i].name] = t.internals[i].domain->values[s.vals[i]];
  for (int p = 0; p < t.num_ports(); ++p)
    j[t.ports[p].name] = t.ports[p].domain->values[s.vals[t.port_slot(p)]];
  return j;
}

json verdict_json(const CheckVerdict& v) {
  json j;
  j["holds"] = v.holds;
  if (v.refused) j["refused"] = true;
  if (!v.reason.empty()) j["reason"] = v.reason;
  if (!v.trace.empty()) j["counterexample"] = v.trace;
  return j;
}

json triple_json(const ProcessNetwork& net, const Similarity& t) {
  json edges;
  for (EdgeId e : net.connected_edges(t.m)) edges[net.edges[e].name] = net.edges[t.map_edge(net, e)].name;
  return json{{"m", net.nodes[t.m].name}, {"n", net.nodes[t.n].name}, {"edges", edges}};
}

struct Pipeline {
  ModelDocument doc;
  const ProcessNetwork* net = nullptr;
  BalanceRelation balance;
  RepresentativeScheme scheme;
  CompositionalInvariant invariant;

  static Pipeline run(const std::string& path, const std::string& network, const Clock& clock) {
    Pipeline p;
    p.doc = load_model(path);
    p.net = &pick_network(p.doc, network);
    clock.checkpoint();
    p.balance = largest_balance(*p.net);
    p.scheme = representatives(*p.net, p.balance);
    clock.checkpoint();
    p.invariant = strongest_compositional_invariant(*p.net, p.scheme);
    clock.checkpoint();
    return p;
  }
};

// Shortest path from an initial state into `bad`, for AG-style failures.
std::vector<std::string> global_trace(const ProcessNetwork& net, const LabeledTS& G, const StateSet& bad,
                                      NodeId m) {
  std::vector<int> prev(G.num_states(), -2), prevLab(G.num_states(), -1);
  std::deque<int> work;
  for (int i : G.initial) {
    prev[i] = -1;
    work.push_back(i);
  }
  int hit = -1;
  while (!work.empty() && hit < 0) {
    int s = work.front();
    work.pop_front();
    if (bad.test(s)) {
      hit = s;
      break;
    }
    for (auto& [lab, dst] : G.adj[s]) {
      if (prev[dst] != -2) continue;
      prev[dst] = s;
      prevLab[dst] = lab;
      work.push_back(dst);
    }
  }
  std::vector<std::string> out;
  if (hit < 0) return out;
  std::vector<int> path;
  for (int s = hit; s != -1; s = prev[s]) path.push_back(s);
  std::reverse(path.begin(), path.end());
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out.push_back(G.labels[prevLab[path[i]]]);
    auto ls = project(net, std::get<GlobalState>(G.payloads[path[i]]), m);
    out.push_back(local_state_json(net, ls).dump());
  }
  return out;
}

int cmd_check(const std::string& path, const std::string& formulaName, const std::string& nodeName,
              const std::string& network, std::size_t cap, bool useOracle, std::size_t oracleCap, bool asJson,
              double timeLimit) {
  Clock clock(timeLimit);
  auto p = Pipeline::run(path, network, clock);
  const auto& net = *p.net;

  const auto* def = p.doc.find_formula(formulaName);
  if (!def) throw ParseError({{std::string("no formula named ") + formulaName, {}}});
  auto tmpl = p.doc.find_template(def->tmpl);

  std::vector<NodeId> targets;
  if (!nodeName.empty()) {
    NodeId n = node_by_name(net, nodeName);
    if (net.nodes[n].tmpl->name != def->tmpl)
      throw ParseError({{std::string("formula ") + formulaName + " is not defined for node " + nodeName, {}}});
    targets.push_back(n);
  } else {
    for (const auto& cls : p.scheme.classes)
      if (net.nodes[cls.front()].tmpl->name == def->tmpl) targets.push_back(cls.front());
  }
  if (targets.empty()) throw ParseError({{std::string("no node instantiates template ") + def->tmpl, {}}});

  PropositionSet props = PropositionSet::of_template(*tmpl);
  std::vector<std::pair<std::string, BoolExpr>> atoms;
  collect_atoms(def->formula, atoms);
  for (auto& [name, pred] : atoms) props.add(name, pred);

  bool universal = is_universal(def->formula);
  bool allPass = true;
  json out;
  out["model"] = path;
  out["network"] = net.name;
  out["formula"] = formulaName;
  out["universal"] = universal;
  out["reports"] = json::array();

  for (NodeId m : targets) {
    clock.checkpoint();
    json rep;
    rep["node"] = net.nodes[m].name;
    rep["class_size"] = p.scheme.classes[std::distance(
        p.scheme.classes.begin(),
        std::find_if(p.scheme.classes.begin(), p.scheme.classes.end(),
                     [&](const auto& c) { return p.scheme.rep_of[m] == c.front(); }))].size();

    auto H = build_local_space(net, p.invariant, m, props);
    bool local = holds(def->formula, H);
    rep["local_verdict"] = local;
    rep["local_states"] = H.num_states();

    json outward;
    bool strictAll = true;
    for (NodeId n : net.neighbors(m)) {
      auto lit = check_outward_facing(net, p.invariant, n, m, OutwardMode::Literal);
      auto strict = check_outward_facing(net, p.invariant, n, m, OutwardMode::OwnSteps);
      strictAll = strictAll && strict.holds;
      outward[net.nodes[n].name] = json{{"literal", lit.holds}, {"transfer_grade", strict.holds}};
    }
    rep["outward_facing"] = outward;

    auto claim = transfer_verdict(local, universal, strictAll);
    rep["transfer"] = claim_text(claim, local);

    bool pass = local;
    if (useOracle) {
      clock.checkpoint();
      json oracle;
      auto G = build_global_space(net, m, props, oracleCap);
      oracle["global_states"] = G.num_states();
      bool tauFree = tau_free(G);
      oracle["tau_free"] = tauFree;
      if (tauFree) {
        bool globalVerdict = holds(def->formula, G);
        oracle["global_verdict"] = globalVerdict;
        if (claim == TransferClaim::HoldsGlobally && !globalVerdict) {
          oracle["disagreement"] = true;
          pass = false;
        }
        if (!globalVerdict) {
          auto sat = evaluate(def->formula, G);
          auto tr = global_trace(net, G, sat.complement(), m);
          if (!tr.empty()) oracle["trace"] = tr;
          pass = pass && false;
        }
      } else {
        auto t5 = check_theorem5(net, p.invariant, m, oracleCap, props);
        oracle["theorem5"] = verdict_json(t5);
        auto t6 = check_theorem6(net, p.invariant, m, oracleCap);
        oracle["theorem6"] = verdict_json(t6);
        if (!t5.holds) pass = false;
      }
      rep["oracle"] = oracle;
    }
    rep["pass"] = pass;
    allPass = allPass && pass;
    out["reports"].push_back(rep);
  }
  out["elapsed_seconds"] = clock.elapsed();

  if (asJson) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "formula " << formulaName << (universal ? " (universal)" : " (general)") << " on "
              << net.name << "\n";
    for (auto& rep : out["reports"]) {
      std::cout << "  " << rep["node"].get<std::string>() << ": local "
                << (rep["local_verdict"].get<bool>() ? "true" : "false") << "; "
                << rep["transfer"].get<std::string>();
      if (rep.contains("oracle")) {
        auto& o = rep["oracle"];
        std::cout << "; oracle";
        if (o.contains("global_verdict"))
          std::cout << " global=" << (o["global_verdict"].get<bool>() ? "true" : "false");
        else
          std::cout << " thm5=" << (o["theorem5"]["holds"].get<bool>() ? "holds" : "fails");
        if (o.contains("trace")) {
          std::cout << "\n    trace:";
          for (auto& t : o["trace"]) std::cout << " " << t.get<std::string>();
        }
      }
      std::cout << "\n";
    }
  }
  return allPass ? kExitOk : kExitPropertyFailed;
}

int cmd_balance(const std::string& path, const std::string& network, bool asJson, double timeLimit) {
  Clock clock(timeLimit);
  auto doc = load_model(path);
  const auto& net = pick_network(doc, network);
  auto B = largest_balance(net);
  auto classes = B.classes(net.num_nodes());
  if (asJson) {
    json out;
    out["network"] = net.name;
    out["triples"] = json::array();
    for (auto& t : B.triples) out["triples"].push_back(triple_json(net, t));
    out["classes"] = json::array();
    for (auto& cls : classes) {
      json c = json::array();
      for (NodeId n : cls) c.push_back(net.nodes[n].name);
      out["classes"].push_back(c);
    }
    out["elapsed_seconds"] = clock.elapsed();
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "largest balance of " << net.name << ": " << B.triples.size() << " triples, "
              << classes.size() << " classes\n";
    for (auto& cls : classes) {
      std::cout << "  class:";
      for (NodeId n : cls) std::cout << " " << net.nodes[n].name;
      std::cout << "\n";
    }
  }
  return kExitOk;
}

int cmd_invariant(const std::string& path, const std::string& network, bool dump, bool asJson,
                  double timeLimit) {
  Clock clock(timeLimit);
  auto p = Pipeline::run(path, network, clock);
  const auto& net = *p.net;
  auto theta = materialize_all(net, p.invariant);
  bool valid = !check_compositional(net, theta).has_value();
  json out;
  out["network"] = net.name;
  out["valid"] = valid;
  for (const auto& cls : p.scheme.classes) {
    NodeId r = cls.front();
    json entry;
    entry["representative"] = net.nodes[r].name;
    entry["states"] = p.invariant.rep_states(r).size();
    if (dump) {
      json states = json::array();
      for (const auto& s : p.invariant.rep_states(r)) states.push_back(local_state_json(net, s));
      entry["theta"] = states;
    }
    out["per_representative"].push_back(entry);
  }
  out["elapsed_seconds"] = clock.elapsed();
  if (asJson || dump) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "strongest compositional invariant of " << net.name << (valid ? " (valid)" : " (INVALID)")
              << "\n";
    for (auto& e : out["per_representative"])
      std::cout << "  " << e["representative"].get<std::string>() << ": " << e["states"] << " states\n";
  }
  return valid ? kExitOk : kExitPropertyFailed;
}

int cmd_spaces(const std::string& path, const std::string& nodeName, const std::string& network,
               bool globalSpace, const std::string& dumpFile, std::size_t cap, double timeLimit) {
  Clock clock(timeLimit);
  auto p = Pipeline::run(path, network, clock);
  const auto& net = *p.net;
  NodeId m = node_by_name(net, nodeName);
  auto props = PropositionSet::of_template(*net.nodes[m].tmpl);
  LabeledTS lts = globalSpace ? build_global_space(net, m, props, cap)
                              : build_local_space(net, p.invariant, m, props);
  std::cout << (globalSpace ? "global" : "local") << " space of " << nodeName << ": " << lts.num_states()
            << " states, " << lts.initial.size() << " initial";
  if (!lts.totalized.empty()) std::cout << ", " << lts.totalized.size() << " totalized";
  std::cout << "\n";
  if (!dumpFile.empty()) {
    auto text = dump_lts(lts);
    if (dumpFile == "-") {
      std::cout << text;
    } else {
      std::ofstream out(dumpFile);
      out << text;
    }
  }
  return kExitOk;
}

int cmd_outward(const std::string& path, const std::string& network, bool asJson, double timeLimit) {
  Clock clock(timeLimit);
  auto p = Pipeline::run(path, network, clock);
  const auto& net = *p.net;
  bool all = true;
  json out;
  out["network"] = net.name;
  out["pairs"] = json::array();
  for (NodeId m = 0; m < net.num_nodes(); ++m) {
    for (NodeId n : net.neighbors(m)) {
      clock.checkpoint();
      auto lit = check_outward_facing(net, p.invariant, n, m, OutwardMode::Literal);
      auto strict = check_outward_facing(net, p.invariant, n, m, OutwardMode::OwnSteps);
      json pair;
      pair["interferer"] = net.nodes[n].name;
      pair["observer"] = net.nodes[m].name;
      pair["literal"] = verdict_json(lit);
      pair["transfer_grade"] = verdict_json(strict);
      out["pairs"].push_back(pair);
      all = all && lit.holds;
      if (!asJson) {
        std::cout << net.nodes[n].name << " toward " << net.nodes[m].name << ": "
                  << (lit.holds ? "outward-facing" : "NOT outward-facing")
                  << (strict.holds ? " (transfer-grade)" : "") << "\n";
        if (!lit.holds && !lit.trace.empty()) {
          std::cout << "  counterexample:";
          for (auto& t : lit.trace) std::cout << " " << t;
          std::cout << "\n";
        }
      }
    }
  }
  out["elapsed_seconds"] = clock.elapsed();
  if (asJson) std::cout << out.dump(2) << "\n";
  return all ? kExitOk : kExitPropertyFailed;
}

int cmd_tiles(const std::string& path, const std::string& network, const std::vector<std::string>& generate,
              bool asJson, double timeLimit) {
  Clock clock(timeLimit);
  auto doc = load_model(path);
  if (doc.tilesets.empty()) throw ParseError({{std::string("model declares no tiles"), {}}});

  if (!generate.empty()) {
    const auto& tiles = doc.tilesets.front();
    ProcessNetwork gen;
    if ((generate[0] == "ring" || generate[0] == "red_black_ring") && generate.size() == 2) {
      gen = generate_ring(tiles, std::stoi(generate[1]));
    } else if (generate[0] == "torus" && generate.size() == 3) {
      gen = generate_torus(tiles, std::stoi(generate[1]), std::stoi(generate[2]));
    } else {
      throw ParseError({{std::string("unknown family; use ring N, red_black_ring N or torus W H"), {}}});
    }
    ModelDocument out = doc;
    out.networks.clear();
    out.networks.push_back(gen);
    auto B = induced_balance(tiles, gen);
    std::cout << "// generated " << gen.name << ": " << gen.num_nodes() << " nodes, " << gen.num_edges()
              << " edges, " << B.classes(gen.num_nodes()).size() << " balance classes\n";
    std::cout << pretty_print(out);
    return kExitOk;
  }

  bool all = true;
  json out;
  out["tilesets"] = json::array();
  for (const auto& tiles : doc.tilesets) {
    for (const auto& net : doc.networks) {
      clock.checkpoint();
      json entry;
      entry["tiles"] = tiles.name;
      entry["network"] = net.name;
      auto v = validate_instance(tiles, net);
      entry["instance"] = !v.has_value();
      if (v) {
        entry["violation"] =
            json{{"node", net.nodes[v->node].name}, {"direction", v->direction}, {"reason", v->reason}};
        all = false;
      } else {
        auto B = induced_balance(tiles, net);
        entry["classes"] = B.classes(net.num_nodes()).size();
        entry["valid_balance"] = is_balance_relation(net, B);
        entry["contained_in_largest"] = [&] {
          auto L = largest_balance(net);
          for (auto& t : B.triples)
            if (!L.contains(t)) return false;
          return true;
        }();
      }
      out["tilesets"].push_back(entry);
      if (!asJson)
        std::cout << tiles.name << " vs " << net.name << ": "
                  << (v ? ("violation at " + net.nodes[v->node].name + " (" + v->reason + ")")
                        : ("instance, " + std::to_string(entry["classes"].get<std::size_t>()) + " classes"))
                  << "\n";
    }
  }
  out["elapsed_seconds"] = clock.elapsed();
  if (asJson) std::cout << out.dump(2) << "\n";
  return all ? kExitOk : kExitPropertyFailed;
}

int cmd_report_counting(int m, int n, int b, bool asJson) {
  auto r = counting_report(m, n, b);
  if (asJson) {
    json out;
    out["m"] = m;
    out["n"] = n;
    out["b"] = b;
    out["counter_size"] = r.counter_size.str();
    out["two_pow_m"] = r.two_pow_m.str();
    out["representative_size"] = r.rep_size.str();
    out["counter_exceeds_2m"] = r.counter_exceeds_2m;
    out["paper_bound_applies"] = r.paper_bound_applies;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "counter abstraction: " << r.counter_size.str() << "\n";
    std::cout << "2^m:                 " << r.two_pow_m.str() << "\n";
    std::cout << "representative m^b:  " << r.rep_size.str() << "\n";
    if (r.paper_bound_applies)
      std::cout << "n > 2m, counter " << (r.counter_exceeds_2m ? "exceeds" : "does not exceed") << " 2^m\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local-symmetry verification toolkit"};
  app.require_subcommand(1);

  std::string model, formula, node, network, dumpFile;
  std::vector<std::string> generate;
  std::size_t cap = 1000000, oracleCap = 1000000;
  double timeLimit = 60.0;
  bool asJson = false, allReps = false, dump = false, globalSpace = false, useOracle = false;
  int cm = 0, cn = 0, cb = 0;

  auto* check = app.add_subcommand("check", "evaluate a formula on representative local spaces");
  check->add_option("model", model)->required();
  check->add_option("formula", formula)->required();
  check->add_option("--node", node, "check this node instead of the representatives");
  check->add_flag("--all-reps", allReps, "check every representative (default)");
  check->add_option("--network", network);
  check->add_option("--cap", cap, "state cap");
  check->add_option("--oracle", oracleCap, "run the global oracle with this state cap")
      ->expected(0, 1)
      ->default_str("1000000");
  check->add_option("--time-limit", timeLimit, "seconds per command");
  check->add_flag("--json", asJson);

  auto* balance = app.add_subcommand("balance", "largest balance relation and its classes");
  balance->add_option("model", model)->required();
  balance->add_option("--network", network);
  balance->add_option("--time-limit", timeLimit);
  balance->add_flag("--json", asJson);

  auto* invariant = app.add_subcommand("invariant", "strongest compositional invariant");
  invariant->add_option("model", model)->required();
  invariant->add_option("--network", network);
  invariant->add_flag("--dump", dump, "dump theta per representative as JSON");
  invariant->add_option("--time-limit", timeLimit);
  invariant->add_flag("--json", asJson);

  auto* spaces = app.add_subcommand("spaces", "build a local (or global) state space");
  spaces->add_option("model", model)->required();
  spaces->add_option("--node", node)->required();
  spaces->add_option("--network", network);
  spaces->add_flag("--global", globalSpace, "build the node-relative global space instead");
  spaces->add_option("--dump", dumpFile, "write the transition dump to this file ('-' for stdout)");
  spaces->add_option("--cap", cap);
  spaces->add_option("--time-limit", timeLimit);

  auto* outward = app.add_subcommand("outward", "outward-facing checks for every neighbor pair");
  outward->add_option("model", model)->required();
  outward->add_option("--network", network);
  outward->add_option("--time-limit", timeLimit);
  outward->add_flag("--json", asJson);

  auto* tiles = app.add_subcommand("tiles", "validate tile instances or generate family members");
  tiles->add_option("model", model)->required();
  tiles->add_option("--network", network);
  tiles->add_option("--generate", generate, "family and parameters, e.g. ring 6 / torus 3 3")
      ->expected(-1);
  tiles->add_option("--time-limit", timeLimit);
  tiles->add_flag("--json", asJson);

  auto* report = app.add_subcommand("report", "derived reports");
  auto* counting = report->add_subcommand("counting", "counter-abstraction size comparison");
  counting->add_option("m", cm)->required();
  counting->add_option("n", cn)->required();
  counting->add_option("b", cb)->required();
  counting->add_flag("--json", asJson);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (check->parsed()) {
      useOracle = check->count("--oracle") > 0;
      return cmd_check(model, formula, node, network, cap, useOracle, oracleCap, asJson, timeLimit);
    }
    if (balance->parsed()) return cmd_balance(model, network, asJson, timeLimit);
    if (invariant->parsed()) return cmd_invariant(model, network, dump, asJson, timeLimit);
    if (spaces->parsed()) return cmd_spaces(model, node, network, globalSpace, dumpFile, cap, timeLimit);
    if (outward->parsed()) return cmd_outward(model, network, asJson, timeLimit);
    if (tiles->parsed()) return cmd_tiles(model, network, generate, asJson, timeLimit);
    if (report->parsed() && counting->parsed()) return cmd_report_counting(cm, cn, cb, asJson);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    for (const auto& d : e.diagnostics)
      std::cerr << "error: " << d.message << " (line " << d.span.line0 << ", column " << d.span.col0 << ")\n";
    return kExitUsage;
  } catch (const CapError& e) {
    std::cerr << "resource cap exceeded: " << e.what() << "\n";
    return kExitCap;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
