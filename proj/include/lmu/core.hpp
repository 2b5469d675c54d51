#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmu {

using Val = std::uint8_t;
using NodeId = int;
using EdgeId = int;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed model or misuse of an operation (unknown node, joint-state
// disagreement, scheme mismatch, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

// A configured resource cap (state count, search budget) was exceeded.
class CapError : public Error {
 public:
  using Error::Error;
};

inline std::size_t hash_bytes(const Val* data, std::size_t n, std::size_t seed = 0xcbf29ce484222325ull) {
  std::size_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

struct ValVecHash {
  std::size_t operator()(const std::vector<Val>& v) const { return hash_bytes(v.data(), v.size()); }
};

// Fixed-capacity bitset over LTS state ids.
class StateSet {
 public:
  StateSet() = default;
  explicit StateSet(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  std::size_t size() const { return n_; }
  bool test(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
  void set(std::size_t i) { w_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
  void reset(std::size_t i) { w_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  StateSet& operator&=(const StateSet& o) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] &= o.w_[i];
    return *this;
  }
  StateSet& operator|=(const StateSet& o) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] |= o.w_[i];
    return *this;
  }
  StateSet complement() const {
    StateSet r(n_);
    for (std::size_t i = 0; i < w_.size(); ++i) r.w_[i] = ~w_[i];
    r.trim();
    return r;
  }
  bool operator==(const StateSet& o) const { return n_ == o.n_ && w_ == o.w_; }
  bool subset_of(const StateSet& o) const {
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & ~o.w_[i]) return false;
    return true;
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto x : w_) c += static_cast<std::size_t>(__builtin_popcountll(x));
    return c;
  }
  bool empty() const {
    for (auto x : w_)
      if (x) return false;
    return true;
  }
  static StateSet full(std::size_t n) {
    StateSet r(n);
    for (auto& x : r.w_) x = ~std::uint64_t{0};
    r.trim();
    return r;
  }

 private:
  void trim() {
    if (n_ % 64 != 0 && !w_.empty()) w_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
  }
  std::size_t n_ = 0;
  std::vector<std::uint64_t> w_;
};

}  // namespace lmu
