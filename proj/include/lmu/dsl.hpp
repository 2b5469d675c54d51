#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lmu/model.hpp"
#include "lmu/mucalc.hpp"
#include "lmu/tiles.hpp"

namespace lmu {

struct SourceSpan {
  int line0 = 1, col0 = 1, line1 = 1, col1 = 1;
  bool operator==(const SourceSpan&) const = default;
};

struct Diagnostic {
  std::string message;
  SourceSpan span;
};

class ParseError : public Error {
 public:
  std::vector<Diagnostic> diagnostics;
  explicit ParseError(std::vector<Diagnostic> diags)
      : Error(diags.empty() ? "parse error" : diags.front().message), diagnostics(std::move(diags)) {}
};

struct FormulaDef {
  std::string name;
  std::string tmpl;  // owning template
  FormulaPtr formula;
};

struct ModelDocument {
  std::string filename;
  std::vector<DomainPtr> domains;  // named top-level domains only
  std::vector<TemplatePtr> templates;
  std::vector<ProcessNetwork> networks;
  std::vector<TileSet> tilesets;
  std::vector<FormulaDef> formulas;

  DomainPtr find_domain(const std::string& n) const {
    for (auto& d : domains)
      if (d->name == n) return d;
    return nullptr;
  }
  TemplatePtr find_template(const std::string& n) const {
    for (auto& t : templates)
      if (t->name == n) return t;
    return nullptr;
  }
  const ProcessNetwork* find_network(const std::string& n) const {
    for (auto& w : networks)
      if (w.name == n) return &w;
    return nullptr;
  }
  const TileSet* find_tileset(const std::string& n) const {
    for (auto& t : tilesets)
      if (t.name == n) return &t;
    return nullptr;
  }
  const FormulaDef* find_formula(const std::string& n) const {
    for (auto& ff : formulas)
      if (ff.name == n) return &ff;
    return nullptr;
  }
};

struct ParseResult {
  std::optional<ModelDocument> doc;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return doc.has_value() && diagnostics.empty(); }
};

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace dsl_detail {

struct Token {
  enum class Kind { Ident, Int, Punct, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  long value = 0;
  SourceSpan span;
};

struct AbortParse {};

class Lexer {
 public:
  Lexer(std::string_view text, std::vector<Diagnostic>& diags) : text_(text), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) break;
      int l = line_, c = col_;
      char ch = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
        std::string id;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          id += advance();
        out.push_back({Token::Kind::Ident, id, 0, {l, c, line_, col_}});
      } else if (std::isdigit(static_cast<unsigned char>(ch))) {
        std::string num;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) num += advance();
        out.push_back({Token::Kind::Int, num, std::stol(num), {l, c, line_, col_}});
      } else {
        static const char* twoChar[] = {":=", "->", "==", "!=", "&&", "||"};
        std::string two = text_.substr(pos_, 2).size() == 2 ? std::string(text_.substr(pos_, 2)) : "";
        bool matched = false;
        for (auto* t : twoChar)
          if (two == t) {
            advance();
            advance();
            out.push_back({Token::Kind::Punct, two, 0, {l, c, line_, col_}});
            matched = true;
            break;
          }
        if (matched) continue;
        if (std::string("{}()[],;:.!=").find(ch) != std::string::npos) {
          advance();
          out.push_back({Token::Kind::Punct, std::string(1, ch), 0, {l, c, line_, col_}});
        } else {
          diags_.push_back({std::string("lexical error: unexpected character '") + ch + "'",
                            {l, c, line_, col_ + 1}});
          throw AbortParse{};
        }
      }
    }
    out.push_back({Token::Kind::Eof, "", 0, {line_, col_, line_, col_}});
    return out;
  }

 private:
  char advance() {
    char ch = text_[pos_++];
    if (ch == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return ch;
  }
  void skip_space() {
    while (pos_ < text_.size()) {
      char ch = text_[pos_];
      if (ch == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        advance();
      } else {
        break;
      }
    }
  }
  std::string_view text_;
  std::vector<Diagnostic>& diags_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

// Name resolution context shared by the expression and formula parsers.
struct VarScope {
  const ProcessTemplate* tmpl = nullptr;        // template frame
  const std::vector<EdgeDecl>* edges = nullptr; // network frame

  // (slot, domain) or nullopt
  std::optional<std::pair<int, DomainPtr>> lookup(const std::string& name) const {
    if (tmpl) {
      int slot = tmpl->find_slot(name);
      if (slot < 0) return std::nullopt;
      return std::make_pair(slot, tmpl->slot_var(slot).domain);
    }
    if (edges) {
      for (std::size_t e = 0; e < edges->size(); ++e)
        if ((*edges)[e].name == name) return std::make_pair(static_cast<int>(e), (*edges)[e].domain);
    }
    return std::nullopt;
  }
  const VariableDecl* port_of_slot(int slot) const {
    if (!tmpl || slot < tmpl->num_internals()) return nullptr;
    return &tmpl->ports[slot - tmpl->num_internals()];
  }
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags) : toks_(std::move(toks)), diags_(diags) {}

  ModelDocument parse_document() {
    ModelDocument doc;
    while (!at_eof()) {
      if (at_ident("domain")) {
        parse_domain(doc);
      } else if (at_ident("template")) {
        parse_template(doc);
      } else if (at_ident("network")) {
        parse_network(doc);
      } else if (at_ident("tiles")) {
        parse_tiles(doc);
      } else {
        fail("expected a domain, template, network or tiles declaration", peek().span);
      }
    }
    return doc;
  }

  // Standalone formula entry point.
  FormulaPtr parse_formula_text(const ProcessTemplate& ctx) {
    VarScope scope;
    scope.tmpl = &ctx;
    std::vector<std::string> bound;
    auto ph = parse_formula(scope, ctx, bound);
    expect_eof();
    finish_formula(ph, peek().span);
    return ph;
  }

 private:
  // -- token helpers --------------------------------------------------------
  const Token& peek(int k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_eof() const { return peek().kind == Token::Kind::Eof; }
  bool at_ident(const std::string& s) const {
    return peek().kind == Token::Kind::Ident && peek().text == s;
  }
  bool at_punct(const std::string& s) const {
    return peek().kind == Token::Kind::Punct && peek().text == s;
  }
  Token take() { return toks_[pos_ >= toks_.size() - 1 ? pos_ : pos_++]; }
  bool eat_punct(const std::string& s) {
    if (!at_punct(s)) return false;
    take();
    return true;
  }
  Token expect_ident(const std::string& what) {
    if (peek().kind != Token::Kind::Ident) fail("expected " + what, peek().span);
    return take();
  }
  void expect_punct(const std::string& s) {
    if (!at_punct(s)) fail("expected '" + s + "'", peek().span);
    take();
  }
  void expect_kw(const std::string& s) {
    if (!at_ident(s)) fail("expected '" + s + "'", peek().span);
    take();
  }
  void expect_eof() {
    if (!at_eof()) fail("unexpected trailing input", peek().span);
  }
  [[noreturn]] void fail(const std::string& msg, SourceSpan sp) {
    diags_.push_back({msg, sp});
    throw AbortParse{};
  }
  void report(const std::string& msg, SourceSpan sp) { diags_.push_back({msg, sp}); }

  // -- declarations ---------------------------------------------------------
  void parse_domain(ModelDocument& doc) {
    take();
    auto name = expect_ident("domain name");
    if (doc.find_domain(name.text)) fail("duplicate domain " + name.text, name.span);
    Domain d;
    d.name = name.text;
    expect_punct("{");
    d.values = parse_value_list(name.span);
    expect_punct("}");
    doc.domains.push_back(std::make_shared<Domain>(std::move(d)));
  }

  std::vector<std::string> parse_value_list(SourceSpan at) {
    std::vector<std::string> vals;
    do {
      auto v = expect_ident("value name");
      if (std::find(vals.begin(), vals.end(), v.text) != vals.end())
        fail("duplicate value " + v.text, v.span);
      vals.push_back(v.text);
    } while (eat_punct(","));
    if (vals.empty()) fail("domain must be nonempty", at);
    return vals;
  }

  void parse_template(ModelDocument& doc) {
    take();
    auto name = expect_ident("template name");
    if (doc.find_template(name.text)) fail("duplicate template " + name.text, name.span);
    auto t = std::make_shared<ProcessTemplate>();
    t->name = name.text;
    t->init = BoolExpr::make_true();
    std::vector<std::pair<std::string, FormulaPtr>> formulas;
    expect_punct("{");
    while (!at_punct("}")) {
      if (at_ident("internal")) {
        take();
        auto vn = expect_ident("variable name");
        if (t->find_slot(vn.text) >= 0) fail("duplicate variable " + vn.text, vn.span);
        DomainPtr dom;
        if (eat_punct(":")) {
          auto dn = expect_ident("domain name");
          dom = doc.find_domain(dn.text);
          if (!dom) fail("unresolved name: domain " + dn.text, dn.span);
        } else {
          expect_punct("{");
          Domain d;
          d.name = vn.text;
          d.values = parse_value_list(vn.span);
          expect_punct("}");
          dom = std::make_shared<Domain>(std::move(d));
        }
        t->internals.push_back({vn.text, dom, false, PortMode::ReadWrite});
      } else if (at_ident("port")) {
        take();
        auto vn = expect_ident("port name");
        if (t->find_slot(vn.text) >= 0) fail("duplicate variable " + vn.text, vn.span);
        expect_punct(":");
        auto dn = expect_ident("domain name");
        auto dom = doc.find_domain(dn.text);
        if (!dom) fail("unresolved name: domain " + dn.text, dn.span);
        PortMode mode;
        if (at_ident("read")) {
          mode = PortMode::Read;
        } else if (at_ident("write")) {
          mode = PortMode::Write;
        } else if (at_ident("readwrite")) {
          mode = PortMode::ReadWrite;
        } else {
          fail("expected a port mode (read, write or readwrite)", peek().span);
        }
        take();
        t->ports.push_back({vn.text, dom, true, mode});
      } else if (at_ident("init")) {
        take();
        VarScope scope;
        scope.tmpl = t.get();
        t->init = parse_expr(scope, /*guard_position=*/false);
      } else if (at_ident("trans")) {
        take();
        auto cn = expect_ident("transition name");
        for (auto& c : t->commands)
          if (c.name == cn.text) fail("duplicate transition " + cn.text, cn.span);
        expect_punct(":");
        VarScope scope;
        scope.tmpl = t.get();
        GuardedCommand cmd;
        cmd.name = cn.text;
        cmd.guard = parse_expr(scope, /*guard_position=*/true);
        expect_punct("->");
        do {
          cmd.updates.push_back(parse_assign(scope));
        } while (eat_punct(","));
        std::set<int> targets;
        for (auto& u : cmd.updates)
          if (!targets.insert(u.target).second)
            fail("updates must target distinct variables in " + cn.text, cn.span);
        t->commands.push_back(std::move(cmd));
      } else if (at_ident("prop")) {
        take();
        auto pn = expect_ident("proposition name");
        if (pn.text == "true" || pn.text == "false")
          fail("propositions may not be named true or false", pn.span);
        if (t->find_prop(pn.text)) fail("duplicate proposition " + pn.text, pn.span);
        expect_punct(":=");
        VarScope scope;
        scope.tmpl = t.get();
        t->props.push_back({pn.text, parse_expr(scope, false)});
      } else if (at_ident("formula")) {
        take();
        auto fn = expect_ident("formula name");
        for (auto& [n2, f2] : formulas)
          if (n2 == fn.text) fail("duplicate formula " + fn.text, fn.span);
        expect_punct(":=");
        VarScope scope;
        scope.tmpl = t.get();
        std::vector<std::string> bound;
        auto ph = parse_formula(scope, *t, bound);
        finish_formula(ph, fn.span);
        formulas.emplace_back(fn.text, ph);
      } else if (eat_punct(";")) {
        continue;
      } else {
        fail("expected a template item", peek().span);
      }
    }
    expect_punct("}");
    doc.templates.push_back(t);
    for (auto& [fn, ph] : formulas) doc.formulas.push_back({fn, t->name, ph});
  }

  Assign parse_assign(const VarScope& scope) {
    auto target = expect_ident("assignment target");
    auto tv = scope.lookup(target.text);
    if (!tv) fail("unresolved name: " + target.text, target.span);
    if (auto* port = scope.port_of_slot(tv->first); port && port->mode == PortMode::Read)
      fail("assignment violation: update targets read-only port " + target.text, target.span);
    expect_punct(":=");
    auto rhs = expect_ident("assignment source");
    Assign a;
    a.target = tv->first;
    if (auto sv = scope.lookup(rhs.text)) {
      if (auto* port = scope.port_of_slot(sv->first); port && port->mode == PortMode::Write)
        fail("assignment violation: copy reads write-only port " + rhs.text, rhs.span);
      if (!sv->second->same_values(*tv->second))
        fail("assignment between different domains", rhs.span);
      a.from_const = false;
      a.src = sv->first;
    } else {
      int v = tv->second->index_of(rhs.text);
      if (v < 0) fail("unresolved name: " + rhs.text, rhs.span);
      a.from_const = true;
      a.const_val = static_cast<Val>(v);
    }
    return a;
  }

  // -- boolean expressions --------------------------------------------------
  // In guard position the top level stops at '||' so that '->' remains the
  // guard/update separator; implications still parse inside parentheses.
  BoolExpr parse_expr(const VarScope& scope, bool guard_position) {
    if (guard_position) return parse_or(scope, true);
    return parse_implies(scope, guard_position);
  }
  BoolExpr parse_implies(const VarScope& scope, bool g) {
    auto lhs = parse_or(scope, g);
    if (eat_punct("->")) {
      BoolExpr e;
      e.kind = BoolExpr::Kind::Implies;
      e.children.push_back(std::move(lhs));
      e.children.push_back(parse_implies(scope, g));
      return e;
    }
    return lhs;
  }
  BoolExpr parse_or(const VarScope& scope, bool g) {
    auto lhs = parse_and(scope, g);
    if (!at_punct("||")) return lhs;
    BoolExpr e;
    e.kind = BoolExpr::Kind::Or;
    e.children.push_back(std::move(lhs));
    while (eat_punct("||")) e.children.push_back(parse_and(scope, g));
    return e;
  }
  BoolExpr parse_and(const VarScope& scope, bool g) {
    auto lhs = parse_unary(scope, g);
    if (!at_punct("&&")) return lhs;
    BoolExpr e;
    e.kind = BoolExpr::Kind::And;
    e.children.push_back(std::move(lhs));
    while (eat_punct("&&")) e.children.push_back(parse_unary(scope, g));
    return e;
  }
  BoolExpr parse_unary(const VarScope& scope, bool g) {
    if (eat_punct("!")) return BoolExpr::negate(parse_unary(scope, g));
    if (eat_punct("(")) {
      auto e = parse_expr(scope, g);
      expect_punct(")");
      return e;
    }
    if (at_ident("true")) {
      take();
      return BoolExpr::make_true();
    }
    if (at_ident("false")) {
      take();
      return BoolExpr::make_false();
    }
    if (at_ident("exactly_one") || at_ident("exactly")) {
      bool one = peek().text == "exactly_one";
      auto kw = take();
      expect_punct("(");
      unsigned k = 1;
      if (!one) {
        if (peek().kind != Token::Kind::Int) fail("expected a count", peek().span);
        k = static_cast<unsigned>(take().value);
        expect_punct(",");
      }
      std::vector<BoolExpr> args;
      do {
        args.push_back(parse_expr(scope, g));
      } while (eat_punct(","));
      expect_punct(")");
      if (args.empty()) fail("exactly needs at least one operand", kw.span);
      return BoolExpr::exactly(k, std::move(args));
    }
    return parse_comparison(scope, g);
  }
  BoolExpr parse_comparison(const VarScope& scope, bool g) {
    auto lhs = expect_ident("a variable");
    auto lv = scope.lookup(lhs.text);
    if (!lv) fail("unresolved name: " + lhs.text, lhs.span);
    check_readable(scope, lv->first, g, lhs);
    bool eq;
    if (eat_punct("==")) {
      eq = true;
    } else if (eat_punct("!=")) {
      eq = false;
    } else {
      fail("expected '==' or '!='", peek().span);
    }
    auto rhs = expect_ident("a value or variable");
    BoolExpr e;
    e.kind = eq ? BoolExpr::Kind::Eq : BoolExpr::Kind::Ne;
    e.lhs = lv->first;
    if (auto rv = scope.lookup(rhs.text)) {
      check_readable(scope, rv->first, g, rhs);
      if (!rv->second->same_values(*lv->second)) fail("comparison between different domains", rhs.span);
      e.rhs_is_slot = true;
      e.rhs_slot = rv->first;
    } else {
      int v = lv->second->index_of(rhs.text);
      if (v < 0) fail("unresolved name: " + rhs.text, rhs.span);
      e.rhs_const = static_cast<Val>(v);
    }
    return e;
  }
  void check_readable(const VarScope& scope, int slot, bool guard_position, const Token& tok) {
    if (!guard_position) return;
    if (auto* port = scope.port_of_slot(slot); port && port->mode == PortMode::Write)
      fail("mode violation: guard reads write-only port " + tok.text, tok.span);
  }

  // -- networks ---------------------------------------------------------------
  void parse_network(ModelDocument& doc) {
    take();
    auto name = expect_ident("network name");
    if (doc.find_network(name.text)) fail("duplicate network " + name.text, name.span);
    ProcessNetwork net;
    net.name = name.text;
    std::map<std::string, NodeId> nodeByName;
    std::map<std::string, EdgeId> edgeByName;
    std::set<NodeId> connected;
    expect_punct("{");
    while (!at_punct("}")) {
      if (at_ident("node")) {
        take();
        std::vector<Token> names;
        while (peek().kind == Token::Kind::Ident && !at_punct(":")) names.push_back(take());
        expect_punct(":");
        auto tn = expect_ident("template name");
        auto tmpl = doc.find_template(tn.text);
        if (!tmpl) fail("unresolved name: template " + tn.text, tn.span);
        for (auto& nm : names) {
          if (nodeByName.count(nm.text)) fail("duplicate node " + nm.text, nm.span);
          nodeByName[nm.text] = static_cast<NodeId>(net.nodes.size());
          net.nodes.push_back({nm.text, tmpl, std::vector<EdgeId>(tmpl->num_ports(), -1)});
        }
        if (names.empty()) fail("expected node names", name.span);
      } else if (at_ident("edge")) {
        take();
        std::vector<Token> names;
        while (peek().kind == Token::Kind::Ident && !at_punct(":")) names.push_back(take());
        expect_punct(":");
        auto dn = expect_ident("domain name");
        auto dom = doc.find_domain(dn.text);
        if (!dom) fail("unresolved name: domain " + dn.text, dn.span);
        for (auto& nm : names) {
          if (edgeByName.count(nm.text)) fail("duplicate edge " + nm.text, nm.span);
          edgeByName[nm.text] = static_cast<EdgeId>(net.edges.size());
          net.edges.push_back({nm.text, dom, {}});
        }
        if (names.empty()) fail("expected edge names", name.span);
      } else if (at_ident("connect")) {
        take();
        auto nn = expect_ident("node name");
        auto itn = nodeByName.find(nn.text);
        if (itn == nodeByName.end()) fail("unresolved name: node " + nn.text, nn.span);
        NodeId node = itn->second;
        if (!connected.insert(node).second) fail("node " + nn.text + " connected twice", nn.span);
        expect_punct("{");
        while (!at_punct("}")) {
          auto pn = expect_ident("port name");
          int p = net.nodes[node].tmpl->find_port(pn.text);
          if (p < 0) fail("unresolved name: port " + pn.text, pn.span);
          expect_punct("=");
          auto en = expect_ident("edge name");
          auto ite = edgeByName.find(en.text);
          if (ite == edgeByName.end()) fail("unresolved name: edge " + en.text, en.span);
          if (net.nodes[node].port_edges[p] != -1) fail("port " + pn.text + " bound twice", pn.span);
          net.nodes[node].port_edges[p] = ite->second;
          net.edges[ite->second].ends.emplace_back(node, p);
          if (!eat_punct(",")) break;
        }
        expect_punct("}");
      } else if (at_ident("initially")) {
        take();
        VarScope scope;
        scope.edges = &net.edges;
        net.initially = parse_expr(scope, false);
      } else if (eat_punct(";")) {
        continue;
      } else {
        fail("expected a network item", peek().span);
      }
    }
    auto closing = take();  // '}'
    for (NodeId n = 0; n < static_cast<NodeId>(net.nodes.size()); ++n)
      for (int p = 0; p < static_cast<int>(net.nodes[n].port_edges.size()); ++p)
        if (net.nodes[n].port_edges[p] < 0)
          fail("port " + net.nodes[n].tmpl->ports[p].name + " of node " + net.nodes[n].name + " is unbound",
               closing.span);
    try {
      net.finalize();
    } catch (const ModelError& e) {
      fail(e.what(), closing.span);
    }
    doc.networks.push_back(std::move(net));
  }

  // The '=' token inside connect blocks is a single '='; the lexer only has
  // '==' and '!='. Treat '==' leniently there by splitting is unnecessary:
  // accept '=' via this helper when lexed as part of '=='.
  // (kept simple: '=' arrives as its own punct because '=x' never lexes
  // as '==')

  // -- tiles ------------------------------------------------------------------
  void parse_tiles(ModelDocument& doc) {
    take();
    auto name = expect_ident("tiles name");
    if (doc.find_tileset(name.text)) fail("duplicate tiles " + name.text, name.span);
    struct RawDir {
      Token dir, type, dir2;
    };
    struct RawTile {
      Token type;
      std::vector<RawDir> dirs;
    };
    std::vector<RawTile> raw;
    expect_punct("{");
    while (!at_punct("}")) {
      expect_kw("tile");
      RawTile rt;
      rt.type = expect_ident("tile type");
      expect_punct("{");
      while (!at_punct("}")) {
        if (eat_punct(";")) continue;
        expect_kw("dir");
        RawDir rd;
        rd.dir = expect_ident("direction name");
        expect_punct("->");
        rd.type = expect_ident("neighbor type");
        expect_punct(".");
        rd.dir2 = expect_ident("neighbor direction");
        rt.dirs.push_back(rd);
      }
      expect_punct("}");
      raw.push_back(std::move(rt));
    }
    auto closing = take();  // '}'
    TileSet ts;
    ts.name = name.text;
    auto typeIndex = [&](const Token& tk) -> int {
      for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw[i].type.text == tk.text) return static_cast<int>(i);
      fail("unresolved name: tile type " + tk.text, tk.span);
    };
    for (auto& rt : raw) {
      auto tmpl = doc.find_template(rt.type.text);
      if (!tmpl) fail("unresolved name: template " + rt.type.text, rt.type.span);
      TileType tt;
      tt.tmpl = tmpl;
      tt.expect.assign(tmpl->num_ports(), {-1, -1});
      for (auto& rd : rt.dirs) {
        int d = tmpl->find_port(rd.dir.text);
        if (d < 0) fail("unresolved name: direction " + rd.dir.text, rd.dir.span);
        if (tt.expect[d].first != -1) fail("direction " + rd.dir.text + " listed twice", rd.dir.span);
        int nt = typeIndex(rd.type);
        auto ntmpl = doc.find_template(rd.type.text);
        if (!ntmpl) fail("unresolved name: template " + rd.type.text, rd.type.span);
        int d2 = ntmpl->find_port(rd.dir2.text);
        if (d2 < 0) fail("unresolved name: direction " + rd.dir2.text, rd.dir2.span);
        tt.expect[d] = {nt, d2};
      }
      for (int d = 0; d < tmpl->num_ports(); ++d)
        if (tt.expect[d].first == -1)
          fail("tile " + rt.type.text + " does not cover direction " + tmpl->ports[d].name, rt.type.span);
      ts.types.push_back(std::move(tt));
    }
    try {
      ts.validate();
    } catch (const ModelError& e) {
      fail(e.what(), closing.span);
    }
    doc.tilesets.push_back(std::move(ts));
  }

  // -- formulas ---------------------------------------------------------------
  FormulaPtr parse_formula(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    return parse_f_implies(scope, t, bound);
  }
  FormulaPtr parse_f_implies(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    auto lhs = parse_f_or(scope, t, bound);
    if (eat_punct("->")) return f::implies(lhs, parse_f_implies(scope, t, bound));
    return lhs;
  }
  FormulaPtr parse_f_or(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    auto lhs = parse_f_and(scope, t, bound);
    while (eat_punct("||")) lhs = f::lor(lhs, parse_f_and(scope, t, bound));
    return lhs;
  }
  FormulaPtr parse_f_and(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    auto lhs = parse_f_unary(scope, t, bound);
    while (eat_punct("&&")) lhs = f::land(lhs, parse_f_unary(scope, t, bound));
    return lhs;
  }
  std::vector<std::string> parse_label_set(const ProcessTemplate& t) {
    std::vector<std::string> labels;
    if (!eat_punct("[")) return labels;  // empty set: all labels
    do {
      auto l = expect_ident("label");
      if (l.text != "self" && l.text != "any" && t.find_port(l.text) < 0)
        fail("unknown label " + l.text, l.span);
      labels.push_back(l.text);
    } while (eat_punct(","));
    expect_punct("]");
    return labels;
  }
  FormulaPtr parse_f_unary(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    if (eat_punct("!")) return f::lnot(parse_f_unary(scope, t, bound));
    if (at_ident("mu") || at_ident("nu")) {
      bool isMu = peek().text == "mu";
      take();
      auto z = expect_ident("variable name");
      expect_punct(".");
      bound.push_back(z.text);
      auto body = parse_f_implies(scope, t, bound);
      bound.pop_back();
      return isMu ? f::mu(z.text, body) : f::nu(z.text, body);
    }
    if (at_ident("AG") || at_ident("AF") || at_ident("EF") || at_ident("EG")) {
      auto op = take();
      auto labels = parse_label_set(t);
      auto body = parse_f_unary(scope, t, bound);
      if (op.text == "AG") return f::ag(body, labels);
      if (op.text == "AF") return f::af(body, labels);
      if (op.text == "EF") return f::ef(body, labels);
      return f::eg(body, labels);
    }
    if ((at_ident("E") || at_ident("A")) && peek(1).kind == Token::Kind::Punct && peek(1).text == "[") {
      bool isE = peek().text == "E";
      take();
      expect_punct("[");
      auto a = parse_f_implies(scope, t, bound);
      auto mid = expect_ident(isE ? "'U'" : "'W'");
      if (mid.text != (isE ? "U" : "W")) fail(std::string("expected '") + (isE ? "U" : "W") + "'", mid.span);
      std::string label = "any";
      if (at_punct("[")) {
        auto ls = parse_label_set(t);
        if (ls.size() != 1) fail("until takes exactly one label", mid.span);
        label = ls[0];
      }
      auto b = parse_f_implies(scope, t, bound);
      expect_punct("]");
      return isE ? f::euntil(a, label, b) : f::aweak(a, label, b);
    }
    return parse_f_primary(scope, t, bound);
  }
  FormulaPtr parse_f_primary(const VarScope& scope, const ProcessTemplate& t, std::vector<std::string>& bound) {
    if (eat_punct("(")) {
      auto ph = parse_f_implies(scope, t, bound);
      expect_punct(")");
      return ph;
    }
    if (at_ident("true")) {
      take();
      return f::ftrue();
    }
    if (at_ident("false")) {
      take();
      return f::ffalse();
    }
    auto id = expect_ident("a proposition, variable or comparison");
    if (at_punct("==") || at_punct("!=")) {
      // inline atom over the template frame
      auto lv = scope.lookup(id.text);
      if (!lv) fail("unresolved name: " + id.text, id.span);
      bool eq = take().text == "==";
      auto rhs = expect_ident("a value or variable");
      BoolExpr e;
      e.kind = eq ? BoolExpr::Kind::Eq : BoolExpr::Kind::Ne;
      e.lhs = lv->first;
      std::string text = id.text + (eq ? " == " : " != ") + rhs.text;
      if (auto rv = scope.lookup(rhs.text)) {
        if (!rv->second->same_values(*lv->second)) fail("comparison between different domains", rhs.span);
        e.rhs_is_slot = true;
        e.rhs_slot = rv->first;
      } else {
        int v = lv->second->index_of(rhs.text);
        if (v < 0) fail("unresolved name: " + rhs.text, rhs.span);
        e.rhs_const = static_cast<Val>(v);
      }
      return f::atom(std::move(e), text);
    }
    if (std::find(bound.begin(), bound.end(), id.text) != bound.end()) return f::var(id.text);
    if (t.find_prop(id.text)) return f::prop(id.text);
    fail("unbound propositional variable or unknown proposition: " + id.text, id.span);
  }

  void finish_formula(FormulaPtr& ph, SourceSpan sp) {
    ph = uniquify_bound(ph, {});
    std::string offender;
    if (!syntactically_monotone(ph, &offender))
      fail("fixpoint binding not syntactically monotone in " + offender, sp);
  }

  // Alpha-rename so bound variables are pairwise distinct.
  FormulaPtr uniquify_bound(const FormulaPtr& ph, std::map<std::string, std::string> renaming) {
    using K = Formula::Kind;
    if (ph->kind == K::Var) {
      auto it = renaming.find(ph->name);
      if (it != renaming.end() && it->second != ph->name) return f::var(it->second);
      return ph;
    }
    if (ph->kind == K::Mu || ph->kind == K::Nu) {
      std::string fresh = ph->name;
      while (used_binders_.count(fresh)) fresh += "'";
      used_binders_.insert(fresh);
      renaming[ph->name] = fresh;
      auto body = uniquify_bound(ph->a, renaming);
      Formula copy = *ph;
      copy.name = fresh;
      copy.a = body;
      return f::mk(std::move(copy));
    }
    Formula copy = *ph;
    if (ph->a) copy.a = uniquify_bound(ph->a, renaming);
    if (ph->b) copy.b = uniquify_bound(ph->b, renaming);
    if (!ph->a && !ph->b) return ph;
    return f::mk(std::move(copy));
  }

  std::vector<Token> toks_;
  std::vector<Diagnostic>& diags_;
  std::size_t pos_ = 0;
  std::set<std::string> used_binders_;
};

}  // namespace dsl_detail

inline ParseResult parse_model(std::string_view text, std::string filename = "<input>") {
  ParseResult res;
  try {
    dsl_detail::Lexer lex(text, res.diagnostics);
    dsl_detail::Parser p(lex.run(), res.diagnostics);
    auto doc = p.parse_document();
    doc.filename = std::move(filename);
    if (res.diagnostics.empty()) res.doc = std::move(doc);
  } catch (const dsl_detail::AbortParse&) {
    // diagnostics already recorded
  }
  return res;
}

inline FormulaPtr parse_formula(std::string_view text, const ProcessTemplate& ctx) {
  std::vector<Diagnostic> diags;
  try {
    dsl_detail::Lexer lex(text, diags);
    dsl_detail::Parser p(lex.run(), diags);
    return p.parse_formula_text(ctx);
  } catch (const dsl_detail::AbortParse&) {
    throw ParseError(std::move(diags));
  }
}

// ---------------------------------------------------------------------------
// Pretty printer: canonical text whose reparse is structurally identical.
// ---------------------------------------------------------------------------

namespace dsl_detail {

struct NameCtx {
  const ProcessTemplate* tmpl = nullptr;
  const std::vector<EdgeDecl>* edges = nullptr;

  std::string slot_name(int slot) const {
    if (tmpl) return tmpl->slot_var(slot).name;
    return (*edges)[static_cast<std::size_t>(slot)].name;
  }
  DomainPtr slot_domain(int slot) const {
    if (tmpl) return tmpl->slot_var(slot).domain;
    return (*edges)[static_cast<std::size_t>(slot)].domain;
  }
};

inline std::string print_expr(const BoolExpr& e, const NameCtx& cx, int parent_prec = 0) {
  using K = BoolExpr::Kind;
  auto wrap = [&](int prec, std::string s) { return prec < parent_prec ? "(" + s + ")" : s; };
  switch (e.kind) {
    case K::True:
      return "true";
    case K::False:
      return "false";
    case K::Eq:
    case K::Ne: {
      std::string rhs = e.rhs_is_slot ? cx.slot_name(e.rhs_slot)
                                      : cx.slot_domain(e.lhs)->values[e.rhs_const];
      return cx.slot_name(e.lhs) + (e.kind == K::Eq ? " == " : " != ") + rhs;
    }
    case K::Not:
      return "!" + print_expr(e.children[0], cx, 4);
    case K::And: {
      std::string s;
      for (std::size_t i = 0; i < e.children.size(); ++i)
        s += (i ? " && " : "") + print_expr(e.children[i], cx, 3);
      return wrap(3, s);
    }
    case K::Or: {
      std::string s;
      for (std::size_t i = 0; i < e.children.size(); ++i)
        s += (i ? " || " : "") + print_expr(e.children[i], cx, 2);
      return wrap(2, s);
    }
    case K::Implies:
      return wrap(1, print_expr(e.children[0], cx, 2) + " -> " + print_expr(e.children[1], cx, 1));
    case K::Exactly: {
      std::string s = e.exact_k == 1 ? "exactly_one(" : ("exactly(" + std::to_string(e.exact_k) + ", ");
      for (std::size_t i = 0; i < e.children.size(); ++i) s += (i ? ", " : "") + print_expr(e.children[i], cx, 0);
      return s + ")";
    }
  }
  return "?";
}

inline std::string print_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) return "";
  std::string s = "[";
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? ", " : "") + labels[i];
  return s + "]";
}

inline std::string print_formula(const FormulaPtr& ph, int parent_prec = 0) {
  using K = Formula::Kind;
  auto wrap = [&](int prec, std::string s) { return prec < parent_prec ? "(" + s + ")" : s; };
  switch (ph->kind) {
    case K::True:
      return "true";
    case K::False:
      return "false";
    case K::Prop:
    case K::Var:
      return ph->name;
    case K::Atom:
      return wrap(4, ph->name);
    case K::Not:
      return "!" + print_formula(ph->a, 5);
    case K::And:
      return wrap(3, print_formula(ph->a, 3) + " && " + print_formula(ph->b, 4));
    case K::Or:
      return wrap(2, print_formula(ph->a, 2) + " || " + print_formula(ph->b, 3));
    case K::Implies:
      return wrap(1, print_formula(ph->a, 2) + " -> " + print_formula(ph->b, 1));
    case K::EUntil:
    case K::AWeak: {
      bool isE = ph->kind == K::EUntil;
      std::string lab = ph->labels[0] == "any" ? "" : "[" + ph->labels[0] + "]";
      return std::string(isE ? "E[ " : "A[ ") + print_formula(ph->a, 0) + (isE ? " U" : " W") + lab + " " +
             print_formula(ph->b, 0) + " ]";
    }
    case K::Mu:
    case K::Nu:
      return wrap(1, std::string(ph->kind == K::Mu ? "mu " : "nu ") + ph->name + " . " +
                         print_formula(ph->a, 1));
    case K::AG:
    case K::AF:
    case K::EF:
    case K::EG: {
      const char* op = ph->kind == K::AG ? "AG" : ph->kind == K::AF ? "AF" : ph->kind == K::EF ? "EF" : "EG";
      return wrap(4, op + print_labels(ph->labels) + " " + print_formula(ph->a, 5));
    }
  }
  return "?";
}

}  // namespace dsl_detail

inline std::string pretty_print(const ModelDocument& doc) {
  std::string out = "// lmu model\n";
  for (const auto& d : doc.domains) {
    out += "domain " + d->name + " { ";
    for (std::size_t i = 0; i < d->values.size(); ++i) out += (i ? ", " : "") + d->values[i];
    out += " }\n";
  }
  for (const auto& t : doc.templates) {
    out += "template " + t->name + " {\n";
    dsl_detail::NameCtx cx;
    cx.tmpl = t.get();
    for (const auto& v : t->internals) {
      auto named = doc.find_domain(v.domain->name);
      if (named && named->same_values(*v.domain)) {
        out += "  internal " + v.name + " : " + v.domain->name + "\n";
      } else {
        out += "  internal " + v.name + " { ";
        for (std::size_t i = 0; i < v.domain->values.size(); ++i)
          out += (i ? ", " : "") + v.domain->values[i];
        out += " }\n";
      }
    }
    for (const auto& v : t->ports)
      out += "  port " + v.name + " : " + v.domain->name + " " + to_string(v.mode) + "\n";
    out += "  init " + dsl_detail::print_expr(t->init, cx) + "\n";
    for (const auto& c : t->commands) {
      out += "  trans " + c.name + ": " + dsl_detail::print_expr(c.guard, cx) + " -> ";
      for (std::size_t i = 0; i < c.updates.size(); ++i) {
        const auto& u = c.updates[i];
        std::string rhs = u.from_const ? t->slot_var(u.target).domain->values[u.const_val]
                                       : t->slot_var(u.src).name;
        out += (i ? ", " : "") + t->slot_var(u.target).name + " := " + rhs;
      }
      out += "\n";
    }
    for (const auto& p : t->props)
      out += "  prop " + p.name + " := " + dsl_detail::print_expr(p.pred, cx) + "\n";
    for (const auto& ff : doc.formulas)
      if (ff.tmpl == t->name) out += "  formula " + ff.name + " := " + dsl_detail::print_formula(ff.formula) + "\n";
    out += "}\n";
  }
  for (const auto& net : doc.networks) {
    out += "network " + net.name + " {\n";
    // group consecutive nodes of the same template
    for (std::size_t i = 0; i < net.nodes.size();) {
      std::size_t j = i;
      out += "  node";
      while (j < net.nodes.size() && net.nodes[j].tmpl == net.nodes[i].tmpl) {
        out += " " + net.nodes[j].name;
        ++j;
      }
      out += " : " + net.nodes[i].tmpl->name + "\n";
      i = j;
    }
    for (std::size_t i = 0; i < net.edges.size();) {
      std::size_t j = i;
      out += "  edge";
      while (j < net.edges.size() && net.edges[j].domain->name == net.edges[i].domain->name) {
        out += " " + net.edges[j].name;
        ++j;
      }
      out += " : " + net.edges[i].domain->name + "\n";
      i = j;
    }
    for (const auto& nd : net.nodes) {
      out += "  connect " + nd.name + " {";
      for (int p = 0; p < nd.tmpl->num_ports(); ++p)
        out += std::string(p ? ", " : " ") + nd.tmpl->ports[p].name + " = " + net.edges[nd.port_edges[p]].name;
      out += " }\n";
    }
    if (net.initially) {
      dsl_detail::NameCtx cx;
      cx.edges = &net.edges;
      out += "  initially " + dsl_detail::print_expr(*net.initially, cx) + "\n";
    }
    out += "}\n";
  }
  for (const auto& ts : doc.tilesets) {
    out += "tiles " + ts.name + " {\n";
    for (const auto& tt : ts.types) {
      out += "  tile " + tt.tmpl->name + " {";
      for (int d = 0; d < tt.tmpl->num_ports(); ++d) {
        auto [nt, nd] = tt.expect[d];
        out += std::string(d ? " ; " : " ") + "dir " + tt.tmpl->ports[d].name + " -> " +
               ts.types[nt].tmpl->name + "." + ts.types[nt].tmpl->ports[nd].name;
      }
      out += " }\n";
    }
    out += "}\n";
  }
  return out;
}

// Structural equality for round-trip checks.
inline bool document_equal(const ModelDocument& a, const ModelDocument& b) {
  auto domEq = [](const DomainPtr& x, const DomainPtr& y) {
    return x->name == y->name && x->values == y->values;
  };
  if (a.domains.size() != b.domains.size() || a.templates.size() != b.templates.size() ||
      a.networks.size() != b.networks.size() || a.tilesets.size() != b.tilesets.size() ||
      a.formulas.size() != b.formulas.size())
    return false;
  for (std::size_t i = 0; i < a.domains.size(); ++i)
    if (!domEq(a.domains[i], b.domains[i])) return false;
  for (std::size_t i = 0; i < a.templates.size(); ++i) {
    const auto& x = *a.templates[i];
    const auto& y = *b.templates[i];
    if (x.name != y.name || x.internals.size() != y.internals.size() || x.ports.size() != y.ports.size())
      return false;
    for (std::size_t v = 0; v < x.internals.size(); ++v) {
      if (x.internals[v].name != y.internals[v].name || !domEq(x.internals[v].domain, y.internals[v].domain))
        return false;
    }
    for (std::size_t v = 0; v < x.ports.size(); ++v) {
      if (x.ports[v].name != y.ports[v].name || x.ports[v].mode != y.ports[v].mode ||
          !domEq(x.ports[v].domain, y.ports[v].domain))
        return false;
    }
    if (!(x.init == y.init) || !(x.commands == y.commands) || !(x.props == y.props)) return false;
  }
  for (std::size_t i = 0; i < a.networks.size(); ++i) {
    const auto& x = a.networks[i];
    const auto& y = b.networks[i];
    if (x.name != y.name || x.nodes.size() != y.nodes.size() || x.edges.size() != y.edges.size()) return false;
    for (std::size_t n = 0; n < x.nodes.size(); ++n)
      if (x.nodes[n].name != y.nodes[n].name || x.nodes[n].tmpl->name != y.nodes[n].tmpl->name ||
          x.nodes[n].port_edges != y.nodes[n].port_edges)
        return false;
    for (std::size_t e = 0; e < x.edges.size(); ++e)
      if (x.edges[e].name != y.edges[e].name || x.edges[e].domain->name != y.edges[e].domain->name ||
          x.edges[e].ends != y.edges[e].ends)
        return false;
    if (x.initially.has_value() != y.initially.has_value()) return false;
    if (x.initially && !(*x.initially == *y.initially)) return false;
  }
  for (std::size_t i = 0; i < a.tilesets.size(); ++i) {
    const auto& x = a.tilesets[i];
    const auto& y = b.tilesets[i];
    if (x.name != y.name || x.types.size() != y.types.size()) return false;
    for (std::size_t t = 0; t < x.types.size(); ++t)
      if (x.types[t].tmpl->name != y.types[t].tmpl->name || x.types[t].expect != y.types[t].expect)
        return false;
  }
  for (std::size_t i = 0; i < a.formulas.size(); ++i) {
    if (a.formulas[i].name != b.formulas[i].name || a.formulas[i].tmpl != b.formulas[i].tmpl ||
        !(*a.formulas[i].formula == *b.formulas[i].formula))
      return false;
  }
  return true;
}

}  // namespace lmu
