#include "rnnlip/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rnnlip/errors.hpp"

namespace rnnlip {

double activate(Activation act, double v) {
  switch (act) {
    case Activation::tanh:
      return std::tanh(v);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double activate_derivative(Activation act, double v) {
  switch (act) {
    case Activation::tanh: {
      const double c = std::cosh(v);
      if (!std::isfinite(c)) return 0.0;
      return 1.0 / (c * c);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void RnnModel::validate() const {
  const Index n = W_h.rows();
  require(W_h.cols() == n, "W_h must be square");
  require(W_x.rows() == n, "W_x must have n rows");
  require(b.size() == n, "b must have length n");
  require(W_out.cols() == n, "W_out must have n columns");
  require(b_out.size() == W_out.rows(), "b_out must have length p");
  require(n > 0 && W_x.cols() > 0 && W_out.rows() > 0, "model dimensions must be positive");
  require(W_x.allFinite() && W_h.allFinite() && b.allFinite() && W_out.allFinite() &&
              b_out.allFinite(),
          "model entries must be finite");
}

RnnModel RnnModel::zeros(Index n, Index m, Index p) {
  RnnModel model;
  model.W_x = MatrixXd::Zero(n, m);
  model.W_h = MatrixXd::Zero(n, n);
  model.b = VectorXd::Zero(n);
  model.W_out = MatrixXd::Zero(p, n);
  model.b_out = VectorXd::Zero(p);
  return model;
}

StepResult forward_step(const RnnModel& model, const VectorXd& h_prev, const VectorXd& x) {
  require(h_prev.size() == model.hidden(), "forward_step: h_prev has wrong length");
  require(x.size() == model.input(), "forward_step: x has wrong length");
  VectorXd v = model.W_h * h_prev + model.W_x * x + model.b;
  StepResult out;
  out.h = v.unaryExpr([&](double s) { return activate(model.activation, s); });
  out.y = model.W_out * out.h + model.b_out;
  return out;
}

Trajectory forward_sequence(const RnnModel& model, const VectorXd& h0,
                            std::span<const VectorXd> xs) {
  require(!xs.empty(), "forward_sequence: empty input sequence");
  require(h0.size() == model.hidden(), "forward_sequence: h0 has wrong length");
  const Index n = model.hidden();
  const Index m = model.input();
  const auto horizon = static_cast<Index>(xs.size());

  Trajectory traj;
  traj.hidden.reserve(xs.size() + 1);
  traj.outputs.reserve(xs.size());
  traj.hidden.push_back(h0);
  for (const auto& x : xs) {
    StepResult step = forward_step(model, traj.hidden.back(), x);
    traj.hidden.push_back(std::move(step.h));
    traj.outputs.push_back(std::move(step.y));
  }

  traj.joint_state.resize(m * horizon + n * (horizon + 1));
  for (Index t = 0; t < horizon; ++t) traj.joint_state.segment(m * t, m) = xs[t];
  for (Index t = 0; t <= horizon; ++t)
    traj.joint_state.segment(m * horizon + n * t, n) = traj.hidden[t];
  return traj;
}

VectorXd stack_input(std::span<const VectorXd> xs, const VectorXd& h0) {
  Index total = h0.size();
  for (const auto& x : xs) total += x.size();
  VectorXd u(total);
  Index pos = 0;
  for (const auto& x : xs) {
    u.segment(pos, x.size()) = x;
    pos += x.size();
  }
  u.tail(h0.size()) = h0;
  return u;
}

void unstack_input(const RnnModel& model, const VectorXd& u, int horizon,
                   std::vector<VectorXd>& xs, VectorXd& h0) {
  const Index n = model.hidden();
  const Index m = model.input();
  require(horizon >= 1, "horizon must be >= 1");
  require(u.size() == m * horizon + n, "stacked input has wrong length");
  xs.resize(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) xs[t] = u.segment(m * t, m);
  h0 = u.tail(n);
}

VectorXd final_output(const RnnModel& model, const VectorXd& u, int horizon) {
  const Index n = model.hidden();
  const Index m = model.input();
  require(horizon >= 1, "horizon must be >= 1");
  require(u.size() == m * horizon + n, "stacked input has wrong length");
  VectorXd h = u.tail(n);
  VectorXd v(n);
  for (int t = 0; t < horizon; ++t) {
    v.noalias() = model.W_h * h;
    v.noalias() += model.W_x * u.segment(m * t, m);
    v += model.b;
    for (Index i = 0; i < n; ++i) h(i) = activate(model.activation, v(i));
  }
  return model.W_out * h + model.b_out;
}

VectorXd input_gradient(const RnnModel& model, const VectorXd& u, int horizon,
                        const VectorXd& w) {
  const Index n = model.hidden();
  const Index m = model.input();
  require(horizon >= 1, "horizon must be >= 1");
  require(u.size() == m * horizon + n, "stacked input has wrong length");
  require(w.size() == model.output(), "cotangent has wrong length");

  // Forward pass keeping the pre-activations.
  MatrixXd pre(n, horizon);
  VectorXd h = u.tail(n);
  for (int t = 0; t < horizon; ++t) {
    pre.col(t) = model.W_h * h + model.W_x * u.segment(m * t, m) + model.b;
    for (Index i = 0; i < n; ++i) h(i) = activate(model.activation, pre(i, t));
  }

  VectorXd grad(u.size());
  VectorXd g_h = model.W_out.transpose() * w;
  VectorXd g_v(n);
  for (int t = horizon - 1; t >= 0; --t) {
    for (Index i = 0; i < n; ++i) g_v(i) = g_h(i) * activate_derivative(model.activation, pre(i, t));
    grad.segment(m * t, m).noalias() = model.W_x.transpose() * g_v;
    g_h.noalias() = model.W_h.transpose() * g_v;
  }
  grad.tail(n) = g_h;
  return grad;
}

VectorXd input_gradient(const RnnModel& model, const VectorXd& h0,
                        std::span<const VectorXd> xs, const VectorXd& w) {
  require(!xs.empty(), "input_gradient: empty input sequence");
  require(h0.size() == model.hidden(), "input_gradient: h0 has wrong length");
  for (const auto& x : xs) require(x.size() == model.input(), "input_gradient: x has wrong length");
  return input_gradient(model, stack_input(xs, h0), static_cast<int>(xs.size()), w);
}

UnrolledSystem build_unrolled(const RnnModel& model, int horizon) {
  model.validate();
  require(horizon >= 1, "build_unrolled: horizon must be >= 1");
  UnrolledSystem sys;
  sys.horizon = horizon;
  sys.n = model.hidden();
  sys.m = model.input();
  sys.p = model.output();
  const Index n = sys.n;
  const Index m = sys.m;
  const Index dz = sys.joint_dim();

  sys.A = MatrixXd::Zero(n * horizon, dz);
  sys.B = MatrixXd::Zero(n * horizon, dz);
  sys.b_tilde.resize(n * horizon);
  for (int t = 1; t <= horizon; ++t) {
    const Index row = n * (t - 1);
    sys.A.block(row, sys.x_offset(t), n, m) = model.W_x;
    sys.A.block(row, sys.h_offset(t - 1), n, n) = model.W_h;
    sys.B.block(row, sys.h_offset(t), n, n).setIdentity();
    sys.b_tilde.segment(row, n) = model.b;
  }

  sys.E_in = MatrixXd::Zero(sys.input_dim(), dz);
  sys.E_in.leftCols(sys.input_dim()).setIdentity();
  sys.E_out = MatrixXd::Zero(sys.p, dz);
  sys.E_out.rightCols(n) = model.W_out;
  return sys;
}

}  // namespace rnnlip
