#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmu/expr.hpp"
#include "lmu/lts.hpp"

namespace lmu {

// Local mu-calculus formulas. Core connectives are True/False/Prop/Atom/
// Var/Not/And/EUntil/Mu; the rest are surface sugar expanded on demand.
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind {
    True,
    False,
    Prop,    // named proposition
    Atom,    // inline comparison over the template frame
    Var,
    Not,
    And,
    Or,
    Implies,
    EUntil,  // E[ a U_label b ]
    AWeak,   // A[ a W_label b ]
    Mu,
    Nu,
    AG,
    AF,
    EF,
    EG
  };

  Kind kind = Kind::True;
  std::string name;                // Prop/Var: name; Mu/Nu: bound variable
  BoolExpr atom;                   // Atom
  std::vector<std::string> labels; // EUntil/AWeak: one; AG/AF/EF/EG: set (empty = all)
  FormulaPtr a, b;

  bool operator==(const Formula& o) const {
    if (kind != o.kind || name != o.name || labels != o.labels) return false;
    if (kind == Kind::Atom && !(atom == o.atom)) return false;
    auto eq = [](const FormulaPtr& x, const FormulaPtr& y) {
      if (!x || !y) return !x && !y;
      return *x == *y;
    };
    return eq(a, o.a) && eq(b, o.b);
  }
};

namespace f {

inline FormulaPtr mk(Formula x) { return std::make_shared<Formula>(std::move(x)); }
inline FormulaPtr ftrue() { return mk({}); }
inline FormulaPtr ffalse() {
  Formula x;
  x.kind = Formula::Kind::False;
  return mk(std::move(x));
}
inline FormulaPtr prop(std::string n) {
  Formula x;
  x.kind = Formula::Kind::Prop;
  x.name = std::move(n);
  return mk(std::move(x));
}
inline FormulaPtr atom(BoolExpr e, std::string text) {
  Formula x;
  x.kind = Formula::Kind::Atom;
  x.atom = std::move(e);
  x.name = std::move(text);
  return mk(std::move(x));
}
inline FormulaPtr var(std::string n) {
  Formula x;
  x.kind = Formula::Kind::Var;
  x.name = std::move(n);
  return mk(std::move(x));
}
inline FormulaPtr lnot(FormulaPtr a) {
  Formula x;
  x.kind = Formula::Kind::Not;
  x.a = std::move(a);
  return mk(std::move(x));
}
inline FormulaPtr land(FormulaPtr a, FormulaPtr b) {
  Formula x;
  x.kind = Formula::Kind::And;
  x.a = std::move(a);
  x.b = std::move(b);
  return mk(std::move(x));
}
inline FormulaPtr lor(FormulaPtr a, FormulaPtr b) {
  Formula x;
  x.kind = Formula::Kind::Or;
  x.a = std::move(a);
  x.b = std::move(b);
  return mk(std::move(x));
}
inline FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  Formula x;
  x.kind = Formula::Kind::Implies;
  x.a = std::move(a);
  x.b = std::move(b);
  return mk(std::move(x));
}
inline FormulaPtr euntil(FormulaPtr a, std::string label, FormulaPtr b) {
  Formula x;
  x.kind = Formula::Kind::EUntil;
  x.labels = {std::move(label)};
  x.a = std::move(a);
  x.b = std::move(b);
  return mk(std::move(x));
}
inline FormulaPtr aweak(FormulaPtr a, std::string label, FormulaPtr b) {
  Formula x;
  x.kind = Formula::Kind::AWeak;
  x.labels = {std::move(label)};
  x.a = std::move(a);
  x.b = std::move(b);
  return mk(std::move(x));
}
inline FormulaPtr mu(std::string z, FormulaPtr body) {
  Formula x;
  x.kind = Formula::Kind::Mu;
  x.name = std::move(z);
  x.a = std::move(body);
  return mk(std::move(x));
}
inline FormulaPtr nu(std::string z, FormulaPtr body) {
  Formula x;
  x.kind = Formula::Kind::Nu;
  x.name = std::move(z);
  x.a = std::move(body);
  return mk(std::move(x));
}
inline FormulaPtr modal(Formula::Kind k, std::vector<std::string> labels, FormulaPtr a) {
  Formula x;
  x.kind = k;
  x.labels = std::move(labels);
  x.a = std::move(a);
  return mk(std::move(x));
}
inline FormulaPtr ag(FormulaPtr a, std::vector<std::string> labels = {}) {
  return modal(Formula::Kind::AG, std::move(labels), std::move(a));
}
inline FormulaPtr af(FormulaPtr a, std::vector<std::string> labels = {}) {
  return modal(Formula::Kind::AF, std::move(labels), std::move(a));
}
inline FormulaPtr ef(FormulaPtr a, std::vector<std::string> labels = {}) {
  return modal(Formula::Kind::EF, std::move(labels), std::move(a));
}
inline FormulaPtr eg(FormulaPtr a, std::vector<std::string> labels = {}) {
  return modal(Formula::Kind::EG, std::move(labels), std::move(a));
}

}  // namespace f

namespace detail {

inline FormulaPtr substitute_var(const FormulaPtr& ph, const std::string& z, const FormulaPtr& with);

inline std::vector<std::string> resolve_labels(const std::vector<std::string>& given,
                                               const std::vector<std::string>& universe) {
  // universe: all non-tau labels of the system under evaluation
  std::vector<std::string> out;
  if (given.empty()) {
    out = universe;
  } else {
    for (const auto& l : given) {
      if (l == "any") {
        for (const auto& u : universe) out.push_back(u);
      } else {
        out.push_back(l);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ModelError("empty label set in modal operator");
  return out;
}

inline FormulaPtr fresh_var(int& counter, std::string base) {
  return f::var(base + "#" + std::to_string(counter++));
}

inline FormulaPtr expand(const FormulaPtr& ph, const std::vector<std::string>& universe, int& fresh) {
  using K = Formula::Kind;
  switch (ph->kind) {
    case K::True:
    case K::False:
    case K::Prop:
    case K::Atom:
    case K::Var:
      return ph;
    case K::Not:
      return f::lnot(expand(ph->a, universe, fresh));
    case K::And:
      return f::land(expand(ph->a, universe, fresh), expand(ph->b, universe, fresh));
    case K::Or:  // a or b == not(not a and not b)
      return f::lnot(f::land(f::lnot(expand(ph->a, universe, fresh)), f::lnot(expand(ph->b, universe, fresh))));
    case K::Implies:
      return f::lnot(f::land(expand(ph->a, universe, fresh), f::lnot(expand(ph->b, universe, fresh))));
    case K::EUntil: {
      auto labels = resolve_labels(ph->labels, universe);
      auto ea = expand(ph->a, universe, fresh);
      auto eb = expand(ph->b, universe, fresh);
      // E[a U_any b] is the disjunction over the concrete labels
      FormulaPtr acc;
      for (const auto& l : labels) {
        auto one = f::euntil(ea, l, eb);
        acc = acc ? f::lnot(f::land(f::lnot(acc), f::lnot(one))) : one;
      }
      return acc;
    }
    case K::AWeak: {
      // A[a W_l b] == not E[not a U_l not b]
      auto inner = f::euntil(f::lnot(ph->a), ph->labels.empty() ? std::string("any") : ph->labels[0],
                             f::lnot(ph->b));
      Formula withLabels = *inner;
      withLabels.labels = ph->labels.empty() ? std::vector<std::string>{"any"} : ph->labels;
      return f::lnot(expand(f::mk(std::move(withLabels)), universe, fresh));
    }
    case K::Mu:
      return f::mu(ph->name, expand(ph->a, universe, fresh));
    case K::Nu: {
      // nu Z. a(Z) == not mu Z. not a(not Z)
      auto z = ph->name;
      auto negBody = f::lnot(substitute_var(ph->a, z, f::lnot(f::var(z))));
      return f::lnot(f::mu(z, expand(negBody, universe, fresh)));
    }
    case K::EF: {
      // mu Z. b or (exists label a in L: E[true U_a Z])
      auto labels = resolve_labels(ph->labels, universe);
      auto zv = fresh_var(fresh, "EF");
      FormulaPtr dis = expand(ph->a, universe, fresh);
      for (const auto& l : labels)
        dis = f::lnot(f::land(f::lnot(dis), f::lnot(f::euntil(f::ftrue(), l, f::var(zv->name)))));
      return f::mu(zv->name, dis);
    }
    case K::AG:
      return f::lnot(expand(f::ef(f::lnot(ph->a), ph->labels), universe, fresh));
    case K::EG: {
      // nu Z. b and (exists a in L: E[b U_a Z]); the witnessing unfolding
      // must keep producing visible actions
      auto labels = resolve_labels(ph->labels, universe);
      auto zv = fresh_var(fresh, "EG");
      auto body = expand(ph->a, universe, fresh);
      FormulaPtr dis;
      for (const auto& l : labels) {
        auto one = f::euntil(body, l, f::var(zv->name));
        dis = dis ? f::lnot(f::land(f::lnot(dis), f::lnot(one))) : one;
      }
      auto whole = f::land(body, dis);
      // expand nu through its mu dual
      auto z = zv->name;
      auto negBody = f::lnot(substitute_var(whole, z, f::lnot(f::var(z))));
      return f::lnot(f::mu(z, negBody));
    }
    case K::AF:
      return f::lnot(expand(f::eg(f::lnot(ph->a), ph->labels), universe, fresh));
  }
  throw ModelError("unreachable");
}

inline FormulaPtr substitute_var(const FormulaPtr& ph, const std::string& z, const FormulaPtr& with) {
  using K = Formula::Kind;
  if (ph->kind == K::Var) return ph->name == z ? with : ph;
  if ((ph->kind == K::Mu || ph->kind == K::Nu) && ph->name == z) return ph;  // shadowed
  Formula copy = *ph;
  if (ph->a) copy.a = substitute_var(ph->a, z, with);
  if (ph->b) copy.b = substitute_var(ph->b, z, with);
  return f::mk(std::move(copy));
}

}  // namespace detail

// Rewrites surface sugar into the core connectives {True, False, Prop, Atom,
// Var, Not, And, EUntil, Mu}, resolving label sets against the given
// universe of non-tau labels.
inline FormulaPtr expand_derived(const FormulaPtr& ph, const std::vector<std::string>& labelUniverse) {
  int fresh = 0;
  return detail::expand(ph, labelUniverse, fresh);
}

// Negation normal form over {Prop, NegProp(Not Prop), Var, And, Or, EUntil,
// AWeak, Mu, Nu}; universal formulas have no EUntil left.
inline FormulaPtr to_nnf(const FormulaPtr& ph, bool negate = false) {
  using K = Formula::Kind;
  switch (ph->kind) {
    case K::True:
      return negate ? f::ffalse() : f::ftrue();
    case K::False:
      return negate ? f::ftrue() : f::ffalse();
    case K::Prop:
    case K::Atom:
    case K::Var:
      return negate ? f::lnot(ph) : ph;
    case K::Not:
      return to_nnf(ph->a, !negate);
    case K::And: {
      auto a = to_nnf(ph->a, negate), b = to_nnf(ph->b, negate);
      return negate ? f::lor(a, b) : f::land(a, b);
    }
    case K::Or: {
      auto a = to_nnf(ph->a, negate), b = to_nnf(ph->b, negate);
      return negate ? f::land(a, b) : f::lor(a, b);
    }
    case K::Implies:
      return to_nnf(f::lor(f::lnot(ph->a), ph->b), negate);
    case K::EUntil: {
      auto lab = ph->labels[0];
      if (!negate) return f::euntil(to_nnf(ph->a), lab, to_nnf(ph->b));
      return f::aweak(to_nnf(ph->a, true), lab, to_nnf(ph->b, true));
    }
    case K::AWeak: {
      auto lab = ph->labels[0];
      if (!negate) return f::aweak(to_nnf(ph->a), lab, to_nnf(ph->b));
      return f::euntil(to_nnf(ph->a, true), lab, to_nnf(ph->b, true));
    }
    case K::Mu: {
      auto body = to_nnf(negate ? detail::substitute_var(ph->a, ph->name, f::lnot(f::var(ph->name))) : ph->a,
                         negate);
      return negate ? f::nu(ph->name, body) : f::mu(ph->name, body);
    }
    case K::Nu: {
      auto body = to_nnf(negate ? detail::substitute_var(ph->a, ph->name, f::lnot(f::var(ph->name))) : ph->a,
                         negate);
      return negate ? f::mu(ph->name, body) : f::nu(ph->name, body);
    }
    default:
      break;
  }
  // Set-labeled modalities: expand against an abstract one-label universe;
  // universality is label independent.
  auto expanded = expand_derived(ph, {"any"});
  return to_nnf(expanded, negate);
}

// A universal formula: the negation normal form contains no E[U].
inline bool is_universal(const FormulaPtr& ph) {
  auto expanded = expand_derived(ph, {"any"});
  std::vector<FormulaPtr> stack = {to_nnf(expanded)};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    if (cur->kind == Formula::Kind::EUntil) return false;
    if (cur->a) stack.push_back(cur->a);
    if (cur->b) stack.push_back(cur->b);
  }
  return true;
}

using Environment = std::map<std::string, StateSet>;

namespace detail {

struct EvalContext {
  const LabeledTS& lts;
  // reverse adjacency per label id
  std::vector<std::vector<std::vector<int>>> pre;  // pre[label][state] = sources

  explicit EvalContext(const LabeledTS& l) : lts(l) {
    pre.assign(l.labels.size(), std::vector<std::vector<int>>(l.num_states()));
    for (int s = 0; s < l.num_states(); ++s)
      for (auto& [lab, dst] : l.adj[s]) pre[lab][dst].push_back(s);
  }

  StateSet pre_label(int label, const StateSet& X) const {
    StateSet r(lts.num_states());
    for (int t = 0; t < lts.num_states(); ++t)
      if (X.test(t))
        for (int s : pre[label][t]) r.set(s);
    return r;
  }
};

inline StateSet eval_core(const FormulaPtr& ph, const EvalContext& cx, Environment& env) {
  using K = Formula::Kind;
  const auto& lts = cx.lts;
  int n = lts.num_states();
  switch (ph->kind) {
    case K::True:
      return StateSet::full(n);
    case K::False:
      return StateSet(n);
    case K::Prop:
    case K::Atom: {
      int pid = lts.prop_id(ph->name);
      if (pid < 0) throw ModelError("unknown proposition: " + ph->name);
      StateSet r(n);
      for (int s = 0; s < n; ++s)
        if (lts.has_prop(s, pid)) r.set(s);
      return r;
    }
    case K::Var: {
      auto it = env.find(ph->name);
      if (it == env.end()) throw ModelError("unbound variable: " + ph->name);
      return it->second;
    }
    case K::Not:
      return eval_core(ph->a, cx, env).complement();
    case K::And: {
      auto r = eval_core(ph->a, cx, env);
      r &= eval_core(ph->b, cx, env);
      return r;
    }
    case K::EUntil: {
      int lab = lts.label_id(ph->labels[0]);
      if (lab < 0) throw ModelError("unknown label: " + ph->labels[0]);
      auto phi = eval_core(ph->a, cx, env);
      auto psi = eval_core(ph->b, cx, env);
      auto target = cx.pre_label(lab, psi);
      // least fixpoint of X -> phi & (pre_a(psi) | pre_tau(X))
      StateSet X(n);
      while (true) {
        auto step = cx.pre_label(LabeledTS::TAU, X);
        step |= target;
        step &= phi;
        if (step == X) break;
        X = step;
      }
      return X;
    }
    case K::Mu: {
      // shadowed bindings must be restored on exit
      std::optional<StateSet> outer;
      if (auto it = env.find(ph->name); it != env.end()) outer = it->second;
      StateSet X(n);
      while (true) {
        env[ph->name] = X;
        auto next = eval_core(ph->a, cx, env);
        if (next == X) break;
        X = next;
      }
      if (outer)
        env[ph->name] = *outer;
      else
        env.erase(ph->name);
      return X;
    }
    default:
      throw ModelError("evaluate: formula not in core form");
  }
}

}  // namespace detail

inline std::vector<std::string> label_universe(const LabeledTS& lts) {
  std::vector<std::string> u(lts.labels.begin() + 1, lts.labels.end());  // skip tau
  std::sort(u.begin(), u.end());
  return u;
}

inline StateSet evaluate(const FormulaPtr& ph, const LabeledTS& lts, const Environment& env = {}) {
  auto core = expand_derived(ph, label_universe(lts));
  detail::EvalContext cx(lts);
  Environment scratch = env;
  return detail::eval_core(core, cx, scratch);
}

inline bool holds(const FormulaPtr& ph, const LabeledTS& lts) {
  if (lts.initial.empty()) throw ModelError("system has no initial states; refusing vacuous verdict");
  auto sat = evaluate(ph, lts);
  for (int s : lts.initial)
    if (!sat.test(s)) return false;
  return true;
}

// Monotonicity of bound variables: every occurrence under an even number of
// negations. Returns the offending variable if any.
inline bool syntactically_monotone(const FormulaPtr& ph, std::string* offender = nullptr) {
  using K = Formula::Kind;
  // polarity: +1 positive, -1 negative
  auto rec = [&](auto&& self, const FormulaPtr& p, std::map<std::string, int> bound, int pol) -> bool {
    switch (p->kind) {
      case K::Var: {
        auto it = bound.find(p->name);
        if (it != bound.end() && pol < 0) {
          if (offender) *offender = p->name;
          return false;
        }
        return true;
      }
      case K::Not:
        return self(self, p->a, bound, -pol);
      case K::Implies:
        return self(self, p->a, bound, -pol) && self(self, p->b, bound, pol);
      case K::Mu:
      case K::Nu: {
        bound[p->name] = pol;
        return self(self, p->a, bound, pol);
      }
      default: {
        bool ok = true;
        if (p->a) ok = ok && self(self, p->a, bound, pol);
        if (p->b) ok = ok && self(self, p->b, bound, pol);
        return ok;
      }
    }
  };
  return rec(rec, ph, {}, +1);
}

// Inline comparison atoms appearing in a formula; these become extra
// propositions when a space is built for evaluation.
inline void collect_atoms(const FormulaPtr& ph, std::vector<std::pair<std::string, BoolExpr>>& out) {
  if (ph->kind == Formula::Kind::Atom) out.emplace_back(ph->name, ph->atom);
  if (ph->a) collect_atoms(ph->a, out);
  if (ph->b) collect_atoms(ph->b, out);
}

}  // namespace lmu
