#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "rnnlip/errors.hpp"
#include "rnnlip/slopes.hpp"

using namespace rnnlip;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

IntervalBox box1(double lo, double hi) { return IntervalBox{VectorXd::Constant(1, lo), VectorXd::Constant(1, hi)}; }

}  // namespace

TEST_CASE("preactivation_bounds") {
  RnnModel zero = RnnModel::zeros(3, 2, 1);
  zero.b << 0.1, -2.0, 0.0;
  const IntervalBox v0 = preactivation_bounds(zero, IntervalBox::uniform(2, -1, 1), IntervalBox::uniform(3, -1, 1));
  CHECK((v0.lower - zero.b).isZero(0.0));
  CHECK((v0.upper - zero.b).isZero(0.0));

  RnnModel m = RnnModel::zeros(1, 2, 1);
  m.W_x << 1.0, -2.0;
  const IntervalBox v1 = preactivation_bounds(m, IntervalBox::uniform(2, -1, 1), IntervalBox::uniform(1, -1, 1));
  // corners of [-1, 1]^2: 1*x1 - 2*x2 ranges over {-3, -1, 1, 3}
  CHECK(v1.lower(0) == -3.0);
  CHECK(v1.upper(0) == 3.0);

  CHECK_THROWS_AS(preactivation_bounds(m, IntervalBox{VectorXd::Constant(2, 1.0), VectorXd::Constant(2, 0.0)},
                                       IntervalBox::uniform(1, -1, 1)),
                  ContractError);
}

TEST_CASE("preactivation_bounds contain sampled points") {
  std::mt19937_64 rng(21);
  const RnnModel m = oracle::random_model(rng, 5, 3, 1, 2.0);
  const IntervalBox xb{VectorXd::Constant(3, -0.5), VectorXd::Constant(3, 1.0)};
  const IntervalBox hb{VectorXd::Constant(5, -1.0), VectorXd::Constant(5, 0.25)};
  const IntervalBox v = preactivation_bounds(m, xb, hb);
  int outside = 0;
  for (int s = 0; s < 1000; ++s) {
    const VectorXd x = oracle::uniform_vector(rng, 3, -0.5, 1.0);
    const VectorXd h = oracle::uniform_vector(rng, 5, -1.0, 0.25);
    if (!v.contains(m.W_x * x + m.W_h * h + m.b)) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("local_slopes") {
  const SlopeInterval a = local_slopes(box1(-1, 1));
  CHECK(a.alpha(0) == doctest::Approx(oracle::sech2(1.0)).epsilon(1e-14));
  CHECK(a.alpha(0) == doctest::Approx(0.42).epsilon(0.01));
  CHECK(a.beta(0) == 1.0);

  const SlopeInterval u = local_slopes(box1(-inf, inf));
  CHECK(u.alpha(0) == 0.0);
  CHECK(u.beta(0) == 1.0);

  const SlopeInterval c = local_slopes(box1(1, 2));
  CHECK(c.alpha(0) == doctest::Approx(oracle::sech2(2.0)).epsilon(1e-14));
  CHECK(c.beta(0) == doctest::Approx(oracle::sech2(1.0)).epsilon(1e-14));
  // Dense sampling of difference quotients on [1, 2].
  double qmin = 1e9, qmax = -1e9;
  for (int i = 0; i < 400; ++i)
    for (int j = i + 1; j <= 400; ++j) {
      const double a1 = 1.0 + i / 400.0, a2 = 1.0 + j / 400.0;
      const double q = (std::tanh(a2) - std::tanh(a1)) / (a2 - a1);
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
  CHECK(qmin >= c.alpha(0) - 1e-12);
  CHECK(qmax <= c.beta(0) + 1e-12);
  CHECK(qmin == doctest::Approx(c.alpha(0)).epsilon(1e-2));
  CHECK(qmax == doctest::Approx(c.beta(0)).epsilon(1e-2));

  // Negative side mirrors the positive one.
  const SlopeInterval n = local_slopes(box1(-2, -1));
  CHECK(n.alpha(0) == c.alpha(0));
  CHECK(n.beta(0) == c.beta(0));
}

TEST_CASE("next_hidden_bounds") {
  const IntervalBox z = next_hidden_bounds(box1(0, 0));
  CHECK(z.lower(0) == 0.0);
  CHECK(z.upper(0) == 0.0);
  const IntervalBox f = next_hidden_bounds(box1(-inf, inf));
  CHECK(f.lower(0) == -1.0);
  CHECK(f.upper(0) == 1.0);
  const IntervalBox g = next_hidden_bounds(box1(-1, 2));
  CHECK(g.lower(0) == std::tanh(-1.0));
  CHECK(g.upper(0) == std::tanh(2.0));
}

TEST_CASE("propagate_slope_bounds") {
  SUBCASE("zero weights give constant boxes") {
    RnnModel m = RnnModel::zeros(2, 1, 1);
    m.b << 0.7, -1.3;
    const SlopeBoundSet s = propagate_slope_bounds(m, 4, IntervalBox::uniform(1, -1, 1), IntervalBox::uniform(2, -1, 1));
    REQUIRE(s.horizon() == 4);
    for (const auto& layer : s.layers)
      for (Index i = 0; i < 2; ++i) {
        CHECK(layer.alpha(i) == doctest::Approx(oracle::sech2(m.b(i))).epsilon(1e-14));
        CHECK(layer.beta(i) == doctest::Approx(oracle::sech2(m.b(i))).epsilon(1e-14));
      }
  }
  SUBCASE("unbounded boxes reduce to the global sector") {
    std::mt19937_64 rng(2);
    const RnnModel m = oracle::random_model(rng, 4, 2, 1);
    const SlopeBoundSet s = propagate_slope_bounds(m, 5, IntervalBox::unbounded(2), IntervalBox::unbounded(4));
    for (const auto& layer : s.layers) {
      CHECK(layer.alpha.isZero(0.0));
      CHECK(layer.beta.isOnes(0.0));
    }
  }
  SUBCASE("enlarging the input box never tightens slopes") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const RnnModel m = oracle::random_model(rng, 3, 2, 1, 1.5);
      const double r = 0.2 + 0.01 * trial;
      const SlopeBoundSet small = propagate_slope_bounds(m, 6, IntervalBox::uniform(2, -r, r), IntervalBox::uniform(3, -1, 1));
      const SlopeBoundSet large = propagate_slope_bounds(m, 6, IntervalBox::uniform(2, -2 * r, 3 * r), IntervalBox::uniform(3, -1, 1));
      for (int l = 0; l < 6; ++l) {
        CHECK((large.layers[l].alpha.array() <= small.layers[l].alpha.array()).all());
        CHECK((large.layers[l].beta.array() >= small.layers[l].beta.array()).all());
      }
    }
  }
}

TEST_CASE("slope bounds are sound on sampled trajectories") {
  std::mt19937_64 rng(33);
  double violation = 0.0;
  for (int model_id = 0; model_id < 5; ++model_id) {
    const RnnModel m = oracle::random_model(rng, 4, 2, 1, 1.5);
    const int N = 6;
    const SlopeBoundSet s = propagate_slope_bounds(m, N, IntervalBox::uniform(2, -1, 1), IntervalBox::uniform(4, -1, 1));
    for (const auto& layer : s.layers) {
      CHECK((layer.alpha.array() >= 0.0).all());
      CHECK((layer.alpha.array() <= layer.beta.array()).all());
      CHECK((layer.beta.array() <= 1.0).all());
    }
    for (int sample = 0; sample < 1000; ++sample) {
      VectorXd h1 = oracle::uniform_vector(rng, 4, -1, 1);
      VectorXd h2 = oracle::uniform_vector(rng, 4, -1, 1);
      for (int l = 0; l < N; ++l) {
        const VectorXd v1 = m.W_x * oracle::uniform_vector(rng, 2, -1, 1) + m.W_h * h1 + m.b;
        const VectorXd v2 = m.W_x * oracle::uniform_vector(rng, 2, -1, 1) + m.W_h * h2 + m.b;
        h1 = v1.array().tanh();
        h2 = v2.array().tanh();
        for (Index i = 0; i < 4; ++i) {
          if (std::abs(v2(i) - v1(i)) < 1e-9) continue;
          const double q = (h2(i) - h1(i)) / (v2(i) - v1(i));
          violation = std::max({violation, s.layers[l].alpha(i) - q, q - s.layers[l].beta(i)});
        }
      }
    }
  }
  CHECK(violation <= 1e-12);
}

TEST_CASE("interval box validation") {
  CHECK_THROWS_AS(IntervalBox::uniform(2, 1.0, -1.0), ContractError);
  IntervalBox nan_box{VectorXd::Constant(1, std::nan("")), VectorXd::Constant(1, 1.0)};
  CHECK_THROWS_AS(nan_box.validate(), ContractError);
}
