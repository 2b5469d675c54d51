#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>

#include "lmu/core.hpp"

namespace lmu {

using BigInt = boost::multiprecision::cpp_int;

// Sizes behind the counting-abstraction comparison: the number of counter
// valuations for n isomorphic processes with m local states each, against
// 2^m and the local-representative size m^b.
struct CountingReport {
  int m = 0, n = 0, b = 0;
  BigInt counter_size;      // (m + n - 1)! / (n! (m - 1)!)
  BigInt two_pow_m;
  BigInt rep_size;          // m^b
  bool counter_exceeds_2m = false;
  bool paper_bound_applies = false;  // n > 2m
};

inline BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= (n - k + i);
    r /= i;
  }
  return r;
}

inline CountingReport counting_report(int m, int n, int b) {
  if (m < 1 || n < 1 || b < 0) throw ModelError("counting_report needs m >= 1, n >= 1, b >= 0");
  CountingReport r;
  r.m = m;
  r.n = n;
  r.b = b;
  r.counter_size = binomial(m + n - 1, n);
  r.two_pow_m = BigInt(1) << m;
  r.rep_size = 1;
  for (int i = 0; i < b; ++i) r.rep_size *= m;
  r.counter_exceeds_2m = r.counter_size > r.two_pow_m;
  r.paper_bound_applies = n > 2 * m;
  return r;
}

enum class TransferClaim {
  HoldsGlobally,   // universal formula, locally true
  ExactTransfer,   // outward-facing: global verdict equals the local one
  LocalOnly,
};

inline TransferClaim transfer_verdict(bool local_verdict, bool is_universal, bool outward_facing_all) {
  if (is_universal && local_verdict) return TransferClaim::HoldsGlobally;
  if (outward_facing_all) return TransferClaim::ExactTransfer;
  return TransferClaim::LocalOnly;
}

inline std::string claim_text(TransferClaim c, bool local_verdict) {
  switch (c) {
    case TransferClaim::HoldsGlobally:
      return "holds globally under unconditional fairness (Cor. 2)";
    case TransferClaim::ExactTransfer:
      return local_verdict ? "global verdict equals local verdict under fairness (Cor. 3): holds"
                           : "global verdict equals local verdict under fairness (Cor. 3): fails";
    case TransferClaim::LocalOnly:
      return "local verdict only (no transfer theorem applies)";
  }
  return "?";
}

}  // namespace lmu
