#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bbope/envs.hpp"
#include "bbope/errors.hpp"
#include "bbope/kernels.hpp"
#include "bbope/oracle.hpp"
#include "fixtures.hpp"

using namespace bbope;
using fixtures::one_hot_rbf;
using fixtures::random_tabular_data;

namespace {

// Nested loops over every action pair.
KernelMatrices enumerate(const TransitionDataset& d, const Policy& pi, const Kernel& k) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const std::size_t A = pi.num_actions();
  KernelMatrices m;
  m.k0.resize(n, n);
  m.k1.resize(n, n);
  m.k2.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& ti = d[static_cast<std::size_t>(i)];
      const auto& tj = d[static_cast<std::size_t>(j)];
      const StateAction xi{ti.state, ti.action};
      const StateAction xj{tj.state, tj.action};
      m.k0(i, j) = k(xi, xj);
      double k1 = 0.0, k2 = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        k1 += pi.probability(tj.next_state, a) * k(xi, StateAction{tj.next_state, a});
        for (std::size_t b = 0; b < A; ++b)
          k2 += pi.probability(ti.next_state, a) * pi.probability(tj.next_state, b) *
                k(StateAction{ti.next_state, a}, StateAction{tj.next_state, b});
      }
      m.k1(i, j) = k1;
      m.k2(i, j) = k2;
    }
  return m;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("rbf basics") {
    const auto k = rbf_kernel(0.7, 2);
    const StateAction x{State{std::vector<double>{0.3, -1.0}}, 0};
    const StateAction y{State{std::vector<double>{0.3, -1.0}}, 1};
    CHECK(k(x, x) == 1.0);
    CHECK(k(x, y) == doctest::Approx(std::exp(-1.0 / (0.7 * 0.7))).epsilon(1e-14));
    std::mt19937_64 gen(1);
    std::normal_distribution<double> z;
    for (int i = 0; i < 100; ++i) {
      const StateAction a{State{std::vector<double>{z(gen), z(gen)}}, static_cast<std::size_t>(gen() % 2)};
      const StateAction b{State{std::vector<double>{z(gen), z(gen)}}, static_cast<std::size_t>(gen() % 2)};
      CHECK(std::abs(k(a, b) - k(b, a)) <= 1e-15);
      CHECK(k(a, b) >= 0.0);
    }
    CHECK_THROWS_AS(rbf_kernel(0.0, 2), InvalidArgument);
  }

  TEST_CASE("delta kernel") {
    const auto k = delta_kernel();
    const StateAction x{State{std::size_t{1}}, 0};
    const StateAction y{State{std::size_t{1}}, 1};
    const StateAction z{State{std::size_t{2}}, 0};
    CHECK(k(x, x) == 1.0);
    CHECK(k(x, y) == 0.0);
    CHECK(k(x, z) == 0.0);
    const TransitionDataset d({{State{std::size_t{0}}, 0, 0.0, State{std::size_t{1}}},
                               {State{std::size_t{1}}, 1, 0.0, State{std::size_t{0}}}});
    const auto m = assemble_matrices(d, Policy::uniform(2), k);
    CHECK(m.k0.isApprox(Eigen::MatrixXd::Identity(2, 2)));
    CHECK_THROWS_AS(k(StateAction{State{std::vector<double>{1.0}}, 0}, x), InvalidArgument);
  }

  TEST_CASE("percentile bandwidths") {
    const FeatureMap raw(StateEncoder::raw(), 1);
    auto point = [](double v) { return StateAction{State{std::vector<double>{v}}, 0}; };
    const std::vector<StateAction> two{point(0.0), point(2.5)};
    for (auto p : {Percentile::p25, Percentile::p50, Percentile::p75})
      CHECK(median_bandwidth(two, p, raw) == doctest::Approx(2.5));
    const std::vector<StateAction> three{point(0.0), point(1.0), point(3.0)};
    CHECK(median_bandwidth(three, Percentile::p50, raw) == doctest::Approx(2.0));
    CHECK(nearest_rank({1, 2, 3, 4}, 25) == 1.0);
    CHECK(nearest_rank({1, 2, 3}, 50) == 2.0);
    CHECK(nearest_rank({4, 3, 2, 1}, 75) == 3.0);
    CHECK_THROWS_AS(parse_percentile(40), InvalidArgument);
    CHECK_THROWS_AS(median_bandwidth(std::vector<StateAction>{point(1.0)}, Percentile::p50, raw), InvalidArgument);
  }

  TEST_CASE("bandwidth is permutation invariant") {
    const FeatureMap raw(StateEncoder::raw(), 3);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> z;
    std::vector<StateAction> pts;
    for (int i = 0; i < 30; ++i)
      pts.push_back({State{std::vector<double>{z(gen), z(gen), z(gen)}}, static_cast<std::size_t>(gen() % 3)});
    const double before = median_bandwidth(pts, Percentile::p25, raw);
    std::shuffle(pts.begin(), pts.end(), gen);
    CHECK(median_bandwidth(pts, Percentile::p25, raw) == before);
  }

  TEST_CASE("assembly matches enumeration") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto data = random_tabular_data(2 + seed * 3, 4, 3, seed);
      const auto pi = random_tabular_policy(4, 3, seed + 10);
      for (const auto& k : {one_hot_rbf(4, 3, 0.9), delta_kernel()}) {
        const auto got = assemble_matrices(data, pi, k);
        const auto want = enumerate(data, pi, k);
        CHECK((got.k0 - want.k0).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((got.k1 - want.k1).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((got.k2 - want.k2).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((got.k - (want.k0 - 2.0 * want.k1 + want.k2)).cwiseAbs().maxCoeff() <= 1e-13);
        CHECK((got.k_sym - got.k_sym.transpose()).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  TEST_CASE("delta kernel K2 closed form") {
    const auto data = random_tabular_data(12, 3, 2, 77);
    const auto pi = random_tabular_policy(3, 2, 78);
    const auto m = assemble_matrices(data, pi, delta_kernel());
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j) {
        double want = 0.0;
        if (state_id(data[i].next_state) == state_id(data[j].next_state))
          for (std::size_t a = 0; a < 2; ++a)
            want += pi.probability(data[i].next_state, a) * pi.probability(data[j].next_state, a);
        CHECK(m.k2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(want).epsilon(1e-14));
      }
  }

  TEST_CASE("deterministic target reduces K1 to one term") {
    const auto data = random_tabular_data(6, 4, 2, 3);
    const auto pi = Policy::deterministic(2, [](const State& s) { return state_id(s) % 2; });
    const auto k = one_hot_rbf(4, 2, 1.3);
    const auto m = assemble_matrices(data, pi, k);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const StateAction xi{data[i].state, data[i].action};
        const StateAction xj{data[j].next_state, state_id(data[j].next_state) % 2};
        CHECK(m.k1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(k(xi, xj)).epsilon(1e-14));
      }
  }

  TEST_CASE("quadratic form splits into the three blocks") {
    const auto data = random_tabular_data(15, 5, 2, 21);
    const auto m = assemble_matrices(data, random_tabular_policy(5, 2, 22), one_hot_rbf(5, 2, 1.0));
    std::mt19937_64 gen(23);
    std::normal_distribution<double> z;
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd w(15);
      for (auto& v : w) v = z(gen);
      const double lhs = w.dot(m.k * w);
      const double rhs = w.dot(m.k0 * w) - 2.0 * w.dot(m.k1 * w) + w.dot(m.k2 * w);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }

  TEST_CASE("transformed kernel with deterministic successors") {
    // s -> (s + a + 1) mod 3, pi(s) = s mod 2.
    const std::size_t S = 3, A = 2;
    std::vector<double> P(S * A * S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) P[(s * A + a) * S + (s + a + 1) % S] = 1.0;
    const TabularMdp mdp(S, A, P, std::vector<double>(S * A, 0.0), {1.0, 0.0, 0.0});
    const auto pi = Policy::deterministic(A, [](const State& s) { return state_id(s) % 2; });
    const auto k = one_hot_rbf(S, A, 0.8);
    const auto kt = transformed_kernel(k, mdp, pi);
    auto succ = [&](std::size_t s, std::size_t a) {
      const std::size_t n = (s + a + 1) % S;
      return StateAction{State{n}, n % 2};
    };
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t t = 0; t < S; ++t)
          for (std::size_t b = 0; b < A; ++b) {
            const StateAction x{State{s}, a}, y{State{t}, b};
            const double want = k(x, y) - k(x, succ(t, b)) - k(succ(s, a), y) + k(succ(s, a), succ(t, b));
            CHECK(kt(x, y) == doctest::Approx(want).epsilon(1e-13));
          }
  }

  TEST_CASE("transformed kernel is symmetric and PSD") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto mdp = random_tabular_mdp(4, 2, seed);
      const auto pi = random_tabular_policy(4, 2, seed + 100);
      const auto kt = transformed_kernel(one_hot_rbf(4, 2, 1.0), mdp, pi);
      const auto& g = kt.gram();
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
      const auto as_k = kt.as_kernel();
      CHECK(as_k(StateAction{State{std::size_t{2}}, 1}, StateAction{State{std::size_t{0}}, 0}) == kt(5, 0));
    }
  }

  TEST_CASE("encoders") {
    const auto oh = StateEncoder::one_hot(3);
    std::vector<double> out;
    oh.encode(State{std::size_t{1}}, out);
    CHECK(out == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(oh.encode(State{std::size_t{3}}, out), InvalidArgument);
    const auto st = StateEncoder::standardized({1.0, -1.0}, {2.0, 0.5});
    out.clear();
    st.encode(State{std::vector<double>{3.0, 0.0}}, out);
    CHECK(out == std::vector<double>{1.0, 2.0});
    const FeatureMap phi(oh, 2, 0.5);
    CHECK(phi(State{std::size_t{2}}, 1) == std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.5});
  }
}
