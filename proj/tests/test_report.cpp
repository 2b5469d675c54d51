#include <catch2/catch_amalgamated.hpp>

#include "lmu/report.hpp"

using namespace lmu;

TEST_CASE("counting report values") {
  auto r = counting_report(3, 6, 2);
  CHECK(r.counter_size == 28);
  CHECK(r.two_pow_m == 8);
  CHECK(r.rep_size == 9);
  CHECK(!r.paper_bound_applies);  // n == 2m exactly

  auto r2 = counting_report(3, 7, 2);
  CHECK(r2.counter_size == 36);
  CHECK(r2.paper_bound_applies);
  CHECK(r2.counter_exceeds_2m);

  auto one = counting_report(1, 17, 4);
  CHECK(one.counter_size == 1);  // a single local state admits one counter value

  CHECK_THROWS_AS(counting_report(0, 1, 0), ModelError);
}

TEST_CASE("counting agrees with a Pascal-triangle oracle") {
  // independent route: Pascal's rule instead of the multiplicative formula
  const int N = 40;
  std::vector<std::vector<BigInt>> pascal(N + 1, std::vector<BigInt>(N + 1, 0));
  for (int i = 0; i <= N; ++i) {
    pascal[i][0] = 1;
    for (int j = 1; j <= i; ++j)
      pascal[i][j] = pascal[i - 1][j - 1] + (j <= i - 1 ? pascal[i - 1][j] : 0);
  }
  for (int m = 1; m <= 10; ++m)
    for (int n = 1; n <= 20; ++n) CHECK(counting_report(m, n, 2).counter_size == pascal[m + n - 1][n]);
}

TEST_CASE("transfer verdict table") {
  CHECK(transfer_verdict(true, true, false) == TransferClaim::HoldsGlobally);
  CHECK(transfer_verdict(true, true, true) == TransferClaim::HoldsGlobally);
  // a universal formula failing locally does not transfer downward
  CHECK(transfer_verdict(false, true, false) == TransferClaim::LocalOnly);
  CHECK(transfer_verdict(false, false, true) == TransferClaim::ExactTransfer);
  CHECK(transfer_verdict(true, false, false) == TransferClaim::LocalOnly);
  CHECK(claim_text(TransferClaim::HoldsGlobally, true).find("Cor. 2") != std::string::npos);
  CHECK(claim_text(TransferClaim::ExactTransfer, false).find("fails") != std::string::npos);
}
