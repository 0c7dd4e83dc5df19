#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bbope/errors.hpp"
#include "bbope/mlp.hpp"
#include "bbope/mmd.hpp"
#include "fixtures.hpp"

using namespace bbope;

namespace {

Eigen::MatrixXd random_inputs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(gen);
  return x;
}

MlpWeightModel random_model(std::size_t in, std::vector<std::size_t> hidden, std::uint64_t seed) {
  auto m = MlpWeightModel::initialized(in, seed, std::move(hidden));
  std::mt19937_64 gen(seed + 1);
  std::normal_distribution<double> z(0.0, 0.5);
  Eigen::VectorXd theta = m.flatten();
  for (auto& v : theta) v += z(gen);
  m.assign(theta);
  return m;
}

double max_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-8, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("zero network outputs zero") {
    const MlpWeightModel m(4, {3, 2});
    CHECK(m.num_parameters() == 4 * 3 + 3 + 3 * 2 + 2 + 2 + 1);
    const auto o = m.forward(random_inputs(7, 4, 1));
    CHECK(o.cwiseAbs().maxCoeff() == 0.0);
    CHECK(o.array().exp().isApprox(Eigen::ArrayXd::Ones(7)));
  }

  TEST_CASE("output bias gradient is one") {
    const auto m = random_model(3, {4}, 2);
    const auto pass = mlp_forward_backward(m, random_inputs(1, 3, 3), Eigen::VectorXd(Eigen::VectorXd::Ones(1)));
    CHECK(pass.gradient[pass.gradient.size() - 1] == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("initialization ranges") {
    const auto m = MlpWeightModel::initialized(9, 4, {30, 20, 10});
    CHECK(m.weight(0).cwiseAbs().maxCoeff() <= 1.0 / 3.0);
    CHECK(m.weight(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(30.0));
    CHECK(m.weight(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.bias(3)[0] == 0.0);
    CHECK(MlpWeightModel::initialized(9, 4).flatten() == m.flatten());
  }

  TEST_CASE("jacobian matches central differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto m = random_model(3, {5, 4}, seed);
      const auto x = random_inputs(6, 3, seed + 10);
      const Eigen::VectorXd theta = m.flatten();
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::VectorXd up = Eigen::VectorXd::Zero(x.rows());
        up[r] = 1.0;
        const auto g = mlp_forward_backward(m, x, up).gradient;
        Eigen::VectorXd fd(theta.size());
        const double h = 1e-6;
        for (Eigen::Index p = 0; p < theta.size(); ++p) {
          Eigen::VectorXd t = theta;
          t[p] += h;
          m.assign(t);
          const double hi = m.forward(x)[r];
          t[p] -= 2 * h;
          m.assign(t);
          const double lo = m.forward(x)[r];
          fd[p] = (hi - lo) / (2 * h);
        }
        m.assign(theta);
        CHECK(max_rel(g, fd) <= 1e-5);
      }
    }
  }

  TEST_CASE("log loss backprop matches central differences") {
    const auto data = fixtures::random_tabular_data(10, 4, 2, 21);
    const auto m_k = assemble_matrices(data, Policy::uniform(2), fixtures::one_hot_rbf(4, 2, 1.0));
    const FeatureMap phi(StateEncoder::one_hot(4), 2);
    const Eigen::MatrixXd x = phi.dataset_features(data);
    auto model = random_model(6, {5, 3}, 22);
    auto value = [&](const MlpWeightModel& mm) {
      return log_loss_full(mm.forward(x).array().exp().matrix(), m_k).value;
    };
    const auto pass = mlp_forward_backward(model, x, [&](const Eigen::VectorXd& o) {
      return log_loss_full(o.array().exp().matrix(), m_k).gradient;
    });
    const Eigen::VectorXd theta = model.flatten();
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index p = 0; p < theta.size(); ++p) {
      Eigen::VectorXd t = theta;
      t[p] += 1e-6;
      model.assign(t);
      const double hi = value(model);
      t[p] -= 2e-6;
      model.assign(t);
      fd[p] = (hi - value(model)) / 2e-6;
    }
    CHECK(max_rel(pass.gradient, fd) <= 1e-4);
  }

  TEST_CASE("callback and vector overloads agree") {
    const auto m = random_model(2, {3}, 5);
    const auto x = random_inputs(4, 2, 6);
    const Eigen::VectorXd up = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
    const auto a = mlp_forward_backward(m, x, up);
    const auto b = mlp_forward_backward(m, x, [&](const Eigen::VectorXd&) { return up; });
    CHECK(a.outputs == b.outputs);
    CHECK(a.gradient == b.gradient);
  }

  TEST_CASE("checkpoint round trip") {
    const auto m = random_model(3, {4, 2}, 7);
    std::stringstream buf;
    m.save(buf);
    const auto back = MlpWeightModel::load(buf);
    CHECK(back.flatten() == m.flatten());
    std::stringstream bad("not a checkpoint");
    CHECK_THROWS_AS(MlpWeightModel::load(bad), InvalidArgument);
    auto copy = m;
    CHECK_THROWS_AS(copy.assign(Eigen::VectorXd::Zero(3)), InvalidArgument);
  }
}
