#include "panto/rng_paths.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace panto;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of the seed") {
  NormalStream a(PathSeed{7, 3}), b(PathSeed{7, 3}), c(PathSeed{7, 4}), d(PathSeed{8, 3});
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.next_normal();
    CHECK(x == b.next_normal());
    differs_c |= x != c.next_normal();
    differs_d |= x != d.next_normal();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("domains give distinct streams") {
  NormalStream a(PathSeed{1, 0}, 0), b(PathSeed{1, 0}, 5);
  CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("uniforms lie in the open unit interval") {
  NormalStream s(PathSeed{11, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = s.next_uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_below is in range and covers all values") {
  NormalStream s(PathSeed{3, 9});
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = s.next_below(7);
    CHECK(v < 7u);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("generate: empty grid for zero steps") {
  const auto g = generate<double>(PathSeed{1, 0}, 2, 0, 0.1);
  CHECK(g.steps() == 0);
  CHECK(g.dims() == 2);
  CHECK(g.increments().rows() == 0);
}

TEST_CASE("generate: deterministic") {
  const auto a = generate<double>(PathSeed{42, 1}, 2, 100, 0.01);
  const auto b = generate<double>(PathSeed{42, 1}, 2, 100, 0.01);
  CHECK(a.values() == b.values());
  CHECK(a.increments().rows() == 100);
  CHECK(a.increments().cols() == 2);
}

TEST_CASE("generate: rejects nonpositive delta") {
  CHECK_THROWS_AS(generate<double>(PathSeed{}, 1, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(generate<double>(PathSeed{}, 1, 10, -1.0), std::invalid_argument);
}

TEST_CASE("generate: increment moments") {
  const int n = 100000;
  const double delta = 0.01;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto inc = generate<double>(PathSeed{seed, 0}, 1, n, delta).increments();
    const double mean = inc.mean();
    const double var = (inc.array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(mean) < 4.0 * std::sqrt(delta / n));
    CHECK(var >= 0.0095);
    CHECK(var <= 0.0105);
  }
}

TEST_CASE("generate: normals are roughly Gaussian") {
  NormalStream s(PathSeed{5, 5});
  int within_one = 0;
  const int n = 200000;
  double fourth = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.next_normal();
    within_one += std::abs(x) < 1.0;
    fourth += x * x * x * x;
  }
  CHECK(static_cast<double>(within_one) / n == doctest::Approx(0.6827).epsilon(0.01));
  CHECK(fourth / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("coarsen: identity for factor 1") {
  const auto g = generate<double>(PathSeed{9, 0}, 3, 40, 0.05);
  const auto c = coarsen(g, 1);
  CHECK(c.values() == g.values());
  CHECK(c.delta() == g.delta());
}

TEST_CASE("coarsen: sums increments") {
  Eigen::MatrixXd inc(4, 1);
  inc << 0.1, -0.2, 0.3, 0.4;
  const auto g = BrownianGrid<double>::from_increments(0.25, inc);
  const auto c = coarsen(g, 2);
  REQUIRE(c.steps() == 2);
  CHECK(c.delta() == 0.5);
  CHECK(c.increment(0)(0) == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(c.increment(1)(0) == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("coarsen: shared-time values agree bitwise and compose") {
  const auto g = generate<double>(PathSeed{17, 2}, 2, 240, 0.01);
  for (int factor : {1, 2, 3, 4, 5, 6, 8, 12, 240}) {
    const auto c = coarsen(g, factor);
    for (Eigen::Index m = 0; m <= c.steps(); ++m) CHECK((c.values().row(m).array() == g.values().row(m * factor).array()).all());
  }
  CHECK(coarsen(coarsen(g, 2), 2).values() == coarsen(g, 4).values());
  CHECK(coarsen(coarsen(g, 3), 4).values() == coarsen(g, 12).values());
}

TEST_CASE("coarsen: rejects non-dividing factors") {
  const auto g = generate<double>(PathSeed{}, 1, 10, 0.1);
  CHECK_THROWS_AS(coarsen(g, 3), std::invalid_argument);
  CHECK_THROWS_AS(coarsen(g, 0), std::invalid_argument);
}
