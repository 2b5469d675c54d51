#pragma once

#include <cstdint>
#include <vector>

#include "lmu/core.hpp"

namespace lmu {

// Boolean expression compiled against a frame of values. For template
// expressions the frame is a local state (internals then ports); for
// network-level initial constraints it is the vector of edge values.
struct BoolExpr {
  enum class Kind : std::uint8_t { True, False, Eq, Ne, Not, And, Or, Implies, Exactly };

  Kind kind = Kind::True;
  int lhs = -1;              // Eq/Ne: frame slot
  bool rhs_is_slot = false;  // Eq/Ne: compare against another slot or a constant
  int rhs_slot = -1;
  Val rhs_const = 0;
  unsigned exact_k = 0;  // Exactly: how many children must hold
  std::vector<BoolExpr> children;

  bool eval(const Val* frame) const {
    switch (kind) {
      case Kind::True:
        return true;
      case Kind::False:
        return false;
      case Kind::Eq: {
        Val r = rhs_is_slot ? frame[rhs_slot] : rhs_const;
        return frame[lhs] == r;
      }
      case Kind::Ne: {
        Val r = rhs_is_slot ? frame[rhs_slot] : rhs_const;
        return frame[lhs] != r;
      }
      case Kind::Not:
        return !children[0].eval(frame);
      case Kind::And:
        for (const auto& c : children)
          if (!c.eval(frame)) return false;
        return true;
      case Kind::Or:
        for (const auto& c : children)
          if (c.eval(frame)) return true;
        return false;
      case Kind::Implies:
        return !children[0].eval(frame) || children[1].eval(frame);
      case Kind::Exactly: {
        unsigned k = 0;
        for (const auto& c : children)
          if (c.eval(frame)) ++k;
        return k == exact_k;
      }
    }
    return false;
  }

  bool operator==(const BoolExpr& o) const {
    return kind == o.kind && lhs == o.lhs && rhs_is_slot == o.rhs_is_slot && rhs_slot == o.rhs_slot &&
           rhs_const == o.rhs_const && exact_k == o.exact_k && children == o.children;
  }

  // Collects every frame slot mentioned anywhere in the expression.
  void collect_slots(std::vector<int>& out) const {
    if (kind == Kind::Eq || kind == Kind::Ne) {
      out.push_back(lhs);
      if (rhs_is_slot) out.push_back(rhs_slot);
    }
    for (const auto& c : children) c.collect_slots(out);
  }

  static BoolExpr make_true() { return BoolExpr{}; }
  static BoolExpr make_false() {
    BoolExpr e;
    e.kind = Kind::False;
    return e;
  }
  static BoolExpr eq(int slot, Val v) {
    BoolExpr e;
    e.kind = Kind::Eq;
    e.lhs = slot;
    e.rhs_const = v;
    return e;
  }
  static BoolExpr ne(int slot, Val v) {
    BoolExpr e = eq(slot, v);
    e.kind = Kind::Ne;
    return e;
  }
  static BoolExpr eq_slot(int a, int b) {
    BoolExpr e;
    e.kind = Kind::Eq;
    e.lhs = a;
    e.rhs_is_slot = true;
    e.rhs_slot = b;
    return e;
  }
  static BoolExpr negate(BoolExpr a) {
    BoolExpr e;
    e.kind = Kind::Not;
    e.children.push_back(std::move(a));
    return e;
  }
  static BoolExpr conj(std::vector<BoolExpr> cs) {
    BoolExpr e;
    e.kind = Kind::And;
    e.children = std::move(cs);
    return e;
  }
  static BoolExpr disj(std::vector<BoolExpr> cs) {
    BoolExpr e;
    e.kind = Kind::Or;
    e.children = std::move(cs);
    return e;
  }
  static BoolExpr exactly(unsigned k, std::vector<BoolExpr> cs) {
    BoolExpr e;
    e.kind = Kind::Exactly;
    e.exact_k = k;
    e.children = std::move(cs);
    return e;
  }
};

}  // namespace lmu
