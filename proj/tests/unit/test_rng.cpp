#include <doctest.h>

#include <set>
#include <vector>

#include "bbope/errors.hpp"
#include "bbope/rng.hpp"

using namespace bbope;

TEST_SUITE("rng") {
  TEST_CASE("philox known answers") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
          PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  }

  TEST_CASE("streams are pure functions of seed, position and tag") {
    CounterRng a(42, 7, StreamTag::action);
    CounterRng b(42, 7, StreamTag::action);
    for (int i = 0; i < 20; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(CounterRng(42, 7, StreamTag::action).next_u64() != CounterRng(42, 8, StreamTag::action).next_u64());
    CHECK(CounterRng(42, 7, StreamTag::action).next_u64() != CounterRng(42, 7, StreamTag::transition).next_u64());
    CHECK(CounterRng(42, 7, StreamTag::action).next_u64() != CounterRng(43, 7, StreamTag::action).next_u64());
  }

  TEST_CASE("uniform and below ranges") {
    CounterRng rng(3, 0, StreamTag::generic);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
      const auto k = rng.below(7);
      REQUIRE(k < 7);
      const double v = rng.uniform(-2.0, 3.0);
      REQUIRE(v >= -2.0);
      REQUIRE(v < 3.0);
    }
    CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("derived seeds are distinct across runs and experiments") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 1000; ++r) {
      seen.insert(derive_seed(1, "modelwin_horizon", r));
      seen.insert(derive_seed(1, "control_rmse/cartpole", r));
    }
    CHECK(seen.size() == 2000);
    CHECK(derive_seed(1, "x", 0) == mix_seed(mix_seed(1, fnv1a("x")), 0));
  }

  TEST_CASE("sample_categorical inverse cdf") {
    const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
    CHECK(sample_categorical(p, 0.0) == 0);
    CHECK(sample_categorical(p, 0.19) == 0);
    CHECK(sample_categorical(p, 0.2) == 2);
    CHECK(sample_categorical(p, 0.69) == 2);
    CHECK(sample_categorical(p, 0.71) == 3);
    const std::vector<double> q{0.5, 0.5 - 1e-15, 0.0};
    CHECK(sample_categorical(q, 0.9999999999999999) == 1);
    CHECK_THROWS_AS(sample_categorical(std::vector<double>{}, 0.5), InvalidArgument);
  }
}
