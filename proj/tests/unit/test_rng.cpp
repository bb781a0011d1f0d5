#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "dnt/rng.hpp"

using dnt::Rng;

TEST_CASE("same seed reproduces the stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and below(n) stays in range") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(13) < 13);
  }
}

TEST_CASE("derived streams are independent of sibling consumption") {
  const std::uint64_t root = 99;
  const std::uint64_t trace_seed = dnt::derive_seed(root, "trace");
  const std::uint64_t agent_seed = dnt::derive_seed(root, "agent");
  CHECK(trace_seed != agent_seed);
  // Drawing any amount from one stream leaves the other's seed unchanged.
  Rng t(trace_seed);
  for (int i = 0; i < 100; ++i) t.next_u64();
  CHECK(dnt::derive_seed(root, "agent") == agent_seed);
  CHECK(dnt::derive_seed(root, "agent", 3) != dnt::derive_seed(root, "agent", 4));
}

TEST_CASE("normal draws have sane first moments") {
  Rng r(5);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation and deterministic") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Rng a(3), b(3);
  auto va = v, vb = v;
  a.shuffle(va);
  b.shuffle(vb);
  CHECK(va == vb);
  CHECK(std::set<int>(va.begin(), va.end()).size() == v.size());
}

TEST_CASE("sample_without_replacement yields distinct sorted indices") {
  Rng r(11);
  const auto s = r.sample_without_replacement(10, 4);
  REQUIRE(s.size() == 4);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1] < s[i]);
  for (std::size_t idx : s) CHECK(idx < 10);
}
