#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rnnlip/errors.hpp"
#include "rnnlip/model.hpp"

using namespace rnnlip;

namespace {

RnnModel scalar_net() {
  RnnModel m = RnnModel::zeros(1, 1, 1);
  m.W_x(0, 0) = 1.0;
  m.W_h(0, 0) = 0.5;
  m.W_out(0, 0) = 2.0;
  return m;
}

VectorXd vec1(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("forward_step on hand-checkable nets") {
  const RnnModel zero = RnnModel::zeros(3, 2, 2);
  const auto r0 = forward_step(zero, VectorXd::Constant(3, 0.7), VectorXd::Constant(2, -4.0));
  CHECK(r0.h.isZero(0.0));
  CHECK(r0.y.isZero(0.0));

  RnnModel id = RnnModel::zeros(1, 1, 1);
  id.W_x(0, 0) = 1.0;
  id.W_out(0, 0) = 1.0;
  const auto r1 = forward_step(id, vec1(0.0), vec1(0.0));
  CHECK(r1.h(0) == 0.0);
  CHECK(r1.y(0) == 0.0);

  const auto r2 = forward_step(scalar_net(), vec1(0.5), vec1(1.0));
  CHECK(r2.h(0) == doctest::Approx(std::tanh(1.25)).epsilon(1e-15));
  CHECK(r2.y(0) == doctest::Approx(2.0 * std::tanh(1.25)).epsilon(1e-15));
}

TEST_CASE("forward_step rejects mismatched dimensions") {
  const RnnModel m = RnnModel::zeros(2, 3, 1);
  CHECK_THROWS_AS(forward_step(m, VectorXd::Zero(3), VectorXd::Zero(3)), ContractError);
  CHECK_THROWS_AS(forward_step(m, VectorXd::Zero(2), VectorXd::Zero(2)), ContractError);
}

TEST_CASE("forward_sequence") {
  RnnModel zero = RnnModel::zeros(2, 1, 2);
  zero.b_out << 0.3, -0.4;
  const std::vector<VectorXd> xs(3, vec1(0.9));
  const Trajectory t0 = forward_sequence(zero, VectorXd::Zero(2), xs);
  REQUIRE(t0.hidden.size() == 4);
  REQUIRE(t0.outputs.size() == 3);
  for (const auto& h : t0.hidden) CHECK(h.isZero(0.0));
  for (const auto& y : t0.outputs) CHECK((y - zero.b_out).isZero(0.0));

  const std::vector<VectorXd> two = {vec1(1.0), vec1(-1.0)};
  const Trajectory t1 = forward_sequence(scalar_net(), vec1(0.0), two);
  CHECK(t1.hidden[0](0) == 0.0);
  CHECK(t1.hidden[1](0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
  CHECK(t1.hidden[2](0) == doctest::Approx(std::tanh(0.5 * std::tanh(1.0) - 1.0)).epsilon(1e-15));

  CHECK_THROWS_AS(forward_sequence(scalar_net(), vec1(0.0), std::vector<VectorXd>{}), ContractError);
}

TEST_CASE("build_unrolled shapes and band layout") {
  RnnModel m = RnnModel::zeros(2, 1, 1);
  const UnrolledSystem sys = build_unrolled(m, 3);
  CHECK(sys.joint_dim() == 11);
  CHECK(sys.A.rows() == 6);
  CHECK(sys.A.cols() == 11);
  CHECK(sys.B.rows() == 6);
  CHECK(sys.E_in.rows() == 5);
  CHECK(sys.E_in.cols() == 11);
  CHECK(sys.E_out.rows() == 1);

  const UnrolledSystem s2 = build_unrolled(scalar_net(), 2);
  // z = (x1, x2, h0, h1, h2); A_h acts on (h0, h1, h2).
  MatrixXd A_h = s2.A.rightCols(3);
  MatrixXd expected(2, 3);
  expected << 0.5, 0, 0, 0, 0.5, 0;
  CHECK((A_h - expected).isZero(0.0));
  CHECK_THROWS_AS(build_unrolled(m, 0), ContractError);
}

TEST_CASE("unrolled recurrence and selectors hold on genuine trajectories") {
  std::mt19937_64 rng(11);
  double worst = 0.0, worst_out = 0.0, worst_in = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + trial % 4, m = 1 + trial % 3, p = 1 + trial % 2;
    const int N = 1 + trial % 6;
    const RnnModel model = oracle::random_model(rng, n, m, p, 2.0);
    std::vector<VectorXd> xs;
    for (int t = 0; t < N; ++t) xs.push_back(oracle::uniform_vector(rng, m, -1, 1));
    const VectorXd h0 = oracle::uniform_vector(rng, n, -1, 1);
    const Trajectory traj = forward_sequence(model, h0, xs);
    const UnrolledSystem sys = build_unrolled(model, N);
    const VectorXd& z = traj.joint_state;
    REQUIRE(z.size() == sys.joint_dim());
    const VectorXd lhs = sys.B * z;
    const VectorXd rhs = (sys.A * z + sys.b_tilde).array().tanh();
    worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
    worst_out = std::max(worst_out, (sys.E_out * z + model.b_out - traj.outputs.back()).lpNorm<Eigen::Infinity>());
    worst_in = std::max(worst_in, (sys.E_in * z - stack_input(xs, h0)).lpNorm<Eigen::Infinity>());
    for (const auto& h : traj.hidden)
      if (&h != &traj.hidden.front()) CHECK((h.array().abs() < 1.0).all());
  }
  CHECK(worst < 1e-10);
  CHECK(worst_out < 1e-12);
  CHECK(worst_in == 0.0);
}

TEST_CASE("input_gradient") {
  SUBCASE("zero readout") {
    std::mt19937_64 rng(1);
    RnnModel m = oracle::random_model(rng, 3, 2, 2);
    m.W_out.setZero();
    const VectorXd u = oracle::uniform_vector(rng, 2 * 4 + 3, -1, 1);
    CHECK(input_gradient(m, u, 4, VectorXd::Ones(2)).isZero(0.0));
  }
  SUBCASE("scalar chain rule at the origin") {
    RnnModel m = scalar_net();
    const VectorXd g = input_gradient(m, VectorXd::Zero(2), 1, vec1(1.0));
    CHECK(g(0) == doctest::Approx(2.0 * 1.0));
    CHECK(g(1) == doctest::Approx(2.0 * 0.5));
  }
  SUBCASE("agrees with central differences") {
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      const Index n = 1 + trial % 5, m = 1 + trial % 3, p = 1 + trial % 3;
      const int N = 1 + trial % 10;
      const RnnModel model = oracle::random_model(rng, n, m, p, 2.0);
      const VectorXd u = oracle::uniform_vector(rng, m * N + n, -1, 1);
      const VectorXd w = oracle::uniform_vector(rng, p, -1, 1);
      const VectorXd g = input_gradient(model, u, N, w);
      const VectorXd fd = oracle::fd_gradient(
          [&](const VectorXd& x) { return w.dot(oracle::final_output(model, x, N)); }, u);
      worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("sequence overload matches the stacked one") {
    std::mt19937_64 rng(8);
    const RnnModel model = oracle::random_model(rng, 3, 2, 2);
    std::vector<VectorXd> xs = {oracle::uniform_vector(rng, 2, -1, 1), oracle::uniform_vector(rng, 2, -1, 1)};
    const VectorXd h0 = oracle::uniform_vector(rng, 3, -1, 1);
    const VectorXd w = VectorXd::Ones(2);
    CHECK((input_gradient(model, h0, xs, w) - input_gradient(model, stack_input(xs, h0), 2, w)).isZero(0.0));
  }
}

TEST_CASE("final_output matches the loop oracle") {
  std::mt19937_64 rng(3);
  const RnnModel model = oracle::random_model(rng, 4, 2, 3);
  const VectorXd u = oracle::uniform_vector(rng, 2 * 7 + 4, -1, 1);
  CHECK((final_output(model, u, 7) - oracle::final_output(model, u, 7)).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("model validation") {
  RnnModel m = RnnModel::zeros(2, 1, 1);
  m.W_h(0, 1) = std::nan("");
  CHECK_THROWS_AS(m.validate(), ContractError);
  RnnModel bad = RnnModel::zeros(2, 1, 1);
  bad.b.resize(3);
  CHECK_THROWS_AS(bad.validate(), ContractError);
}
