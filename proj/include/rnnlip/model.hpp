#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rnnlip {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { tanh };

double activate(Activation act, double v);
// Derivative of the activation; for tanh this is 1/cosh^2(v), defined as 0 at +-inf.
double activate_derivative(Activation act, double v);

// Single recurrent layer h_t = phi(W_h h_{t-1} + W_x x_t + b) with linear readout
// y_t = W_out h_t + b_out.
struct RnnModel {
  MatrixXd W_x;
  MatrixXd W_h;
  VectorXd b;
  MatrixXd W_out;
  VectorXd b_out;
  Activation activation = Activation::tanh;

  Index hidden() const { return W_h.rows(); }
  Index input() const { return W_x.cols(); }
  Index output() const { return W_out.rows(); }

  // Throws ContractError on inconsistent shapes or non-finite entries.
  void validate() const;

  static RnnModel zeros(Index n, Index m, Index p);
};

struct StepResult {
  VectorXd h;
  VectorXd y;
};

StepResult forward_step(const RnnModel& model, const VectorXd& h_prev, const VectorXd& x);

struct Trajectory {
  std::vector<VectorXd> hidden;   // h_0 .. h_N
  std::vector<VectorXd> outputs;  // y_1 .. y_N
  VectorXd joint_state;           // (x_1..x_N, h_0, h_1..h_N)
};

Trajectory forward_sequence(const RnnModel& model, const VectorXd& h0,
                            std::span<const VectorXd> xs);

// The stacked network input u = (x_1..x_N, h_0) of length mN + n.
VectorXd stack_input(std::span<const VectorXd> xs, const VectorXd& h0);
void unstack_input(const RnnModel& model, const VectorXd& u, int horizon,
                   std::vector<VectorXd>& xs, VectorXd& h0);

// y_N for a stacked input; the workhorse of the empirical estimators.
VectorXd final_output(const RnnModel& model, const VectorXd& u, int horizon);

// d(w^T y_N)/d(x_1..x_N, h_0) by reverse accumulation.
VectorXd input_gradient(const RnnModel& model, const VectorXd& h0,
                        std::span<const VectorXd> xs, const VectorXd& w);
VectorXd input_gradient(const RnnModel& model, const VectorXd& u, int horizon,
                        const VectorXd& w);

// Block operators of the network unrolled over `horizon` steps. With the joint
// state z = (x_1..x_N, h_0, .., h_N) the recurrence reads B z = phi(A z + b_tilde).
struct UnrolledSystem {
  int horizon = 0;
  Index n = 0, m = 0, p = 0;
  MatrixXd A;        // (nN) x d_z, [A_x A_h]
  MatrixXd B;        // (nN) x d_z, [0 B_h]
  MatrixXd E_in;     // (mN + n) x d_z
  MatrixXd E_out;    // p x d_z
  VectorXd b_tilde;  // nN

  Index joint_dim() const { return m * horizon + n * (horizon + 1); }
  Index input_dim() const { return m * horizon + n; }
  Index neurons() const { return n * horizon; }
  // Column offsets of x_t (t = 1..N) and h_t (t = 0..N) inside z.
  Index x_offset(int t) const { return m * (t - 1); }
  Index h_offset(int t) const { return m * horizon + n * t; }
};

UnrolledSystem build_unrolled(const RnnModel& model, int horizon);

}  // namespace rnnlip
