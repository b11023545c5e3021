#include "rnnlip/slopes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rnnlip/errors.hpp"

namespace rnnlip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Adds the extreme values of w * s over s in [lo, hi]. Zero weights contribute
// nothing so that 0 * inf never appears.
void accumulate(double w, double lo, double hi, double& v_lo, double& v_hi) {
  if (w > 0.0) {
    v_lo += w * lo;
    v_hi += w * hi;
  } else if (w < 0.0) {
    v_lo += w * hi;
    v_hi += w * lo;
  }
}

}  // namespace

IntervalBox IntervalBox::uniform(Index size, double lo, double hi) {
  IntervalBox box{VectorXd::Constant(size, lo), VectorXd::Constant(size, hi)};
  box.validate();
  return box;
}

IntervalBox IntervalBox::unbounded(Index size) { return uniform(size, -kInf, kInf); }

bool IntervalBox::contains(const VectorXd& v) const {
  if (v.size() != size()) return false;
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) < lower(i) || v(i) > upper(i)) return false;
  return true;
}

void IntervalBox::validate() const {
  require(lower.size() == upper.size(), "interval box bounds differ in length");
  for (Index i = 0; i < lower.size(); ++i) {
    require(!std::isnan(lower(i)) && !std::isnan(upper(i)), "interval box contains NaN");
    require(lower(i) <= upper(i), "interval box has lower > upper");
  }
}

SlopeBoundSet SlopeBoundSet::uniform(Index n, int horizon, double alpha, double beta) {
  require(horizon >= 1, "slope set horizon must be >= 1");
  require(alpha <= beta, "alpha must not exceed beta");
  SlopeBoundSet set;
  set.layers.resize(static_cast<std::size_t>(horizon));
  for (auto& layer : set.layers) {
    layer.alpha = VectorXd::Constant(n, alpha);
    layer.beta = VectorXd::Constant(n, beta);
    layer.preactivation = IntervalBox::unbounded(n);
    layer.hidden = IntervalBox::uniform(n, -1.0, 1.0);
  }
  return set;
}

IntervalBox preactivation_bounds(const RnnModel& model, const IntervalBox& x_box,
                                 const IntervalBox& h_box) {
  x_box.validate();
  h_box.validate();
  require(x_box.size() == model.input(), "input box has wrong dimension");
  require(h_box.size() == model.hidden(), "hidden box has wrong dimension");

  const Index n = model.hidden();
  IntervalBox v{VectorXd(n), VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    double lo = model.b(i);
    double hi = model.b(i);
    for (Index j = 0; j < model.input(); ++j)
      accumulate(model.W_x(i, j), x_box.lower(j), x_box.upper(j), lo, hi);
    for (Index j = 0; j < n; ++j)
      accumulate(model.W_h(i, j), h_box.lower(j), h_box.upper(j), lo, hi);
    v.lower(i) = lo;
    v.upper(i) = hi;
  }
  return v;
}

SlopeInterval local_slopes(const IntervalBox& v_box) {
  v_box.validate();
  const Index n = v_box.size();
  SlopeInterval s{VectorXd(n), VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    const double lo = v_box.lower(i);
    const double hi = v_box.upper(i);
    const double far = std::max(std::abs(lo), std::abs(hi));
    const double near = std::min(std::abs(lo), std::abs(hi));
    s.alpha(i) = activate_derivative(Activation::tanh, far);
    s.beta(i) = (lo <= 0.0 && 0.0 <= hi) ? 1.0 : activate_derivative(Activation::tanh, near);
  }
  return s;
}

IntervalBox next_hidden_bounds(const IntervalBox& v_box) {
  v_box.validate();
  IntervalBox h{v_box.lower.array().tanh().matrix(), v_box.upper.array().tanh().matrix()};
  return h;
}

SlopeBoundSet propagate_slope_bounds(const RnnModel& model, int horizon,
                                     const IntervalBox& x_box, const IntervalBox& h0_box) {
  model.validate();
  require(horizon >= 1, "propagate_slope_bounds: horizon must be >= 1");
  SlopeBoundSet set;
  set.layers.reserve(static_cast<std::size_t>(horizon));
  IntervalBox h_box = h0_box;
  for (int l = 1; l <= horizon; ++l) {
    LayerSlopes layer;
    layer.preactivation = preactivation_bounds(model, x_box, h_box);
    SlopeInterval slopes = local_slopes(layer.preactivation);
    layer.alpha = std::move(slopes.alpha);
    layer.beta = std::move(slopes.beta);
    layer.hidden = next_hidden_bounds(layer.preactivation);
    h_box = layer.hidden;
    set.layers.push_back(std::move(layer));
  }
  return set;
}

}  // namespace rnnlip
