#include <catch2/catch_amalgamated.hpp>

#include "medner/rng.hpp"

using medner::Rng;

TEST_CASE("rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  bool any_diff = false;
  Rng a2(42);
  for (int i = 0; i < 100; ++i) any_diff |= a2.next_u64() != c.next_u64();
  REQUIRE(any_diff);
}

TEST_CASE("uniform stays in [0,1) and uniform_int in range") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    auto k = rng.uniform_int(13);
    REQUIRE(k < 13);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(11);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  REQUIRE(std::fabs(sum / n) < 0.02);
  REQUIRE(std::fabs(sum2 / n - 1.0) < 0.03);
}

TEST_CASE("named streams differ and are stable") {
  auto s1 = Rng::derive(5, "embeddings");
  auto s2 = Rng::derive(5, "split");
  auto s3 = Rng::derive(5, "embeddings");
  REQUIRE(s1 == s3);
  REQUIRE(s1 != s2);
  REQUIRE(Rng::derive(5, "job", 0) != Rng::derive(5, "job", 1));
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto w = v;
  rng.shuffle(w);
  auto sorted = w;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == v);
}
