#pragma once

#include <vector>

#include "rnnlip/model.hpp"

namespace rnnlip {

// Axis-aligned box [lower, upper]. Infinite bounds are allowed and stand for an
// unconstrained coordinate.
struct IntervalBox {
  VectorXd lower;
  VectorXd upper;

  static IntervalBox uniform(Index size, double lo, double hi);
  static IntervalBox unbounded(Index size);

  Index size() const { return lower.size(); }
  bool contains(const VectorXd& v) const;
  // Throws ContractError unless lower <= upper elementwise and nothing is NaN.
  void validate() const;
};

struct SlopeInterval {
  VectorXd alpha;  // minimum difference quotient per neuron
  VectorXd beta;   // maximum difference quotient per neuron
};

struct LayerSlopes {
  VectorXd alpha;
  VectorXd beta;
  IntervalBox preactivation;
  IntervalBox hidden;  // post-activation box fed to the next layer
};

struct SlopeBoundSet {
  std::vector<LayerSlopes> layers;  // layer l = 1..N stored at index l-1

  int horizon() const { return static_cast<int>(layers.size()); }
  Index width() const { return layers.empty() ? 0 : layers.front().alpha.size(); }

  // Uniform (alpha, beta) in every layer; (0, 1) is the global tanh sector.
  static SlopeBoundSet uniform(Index n, int horizon, double alpha, double beta);
};

// Exact range of W_x x + W_h h + b over the box product, by sign splitting.
IntervalBox preactivation_bounds(const RnnModel& model, const IntervalBox& x_box,
                                 const IntervalBox& h_box);

SlopeInterval local_slopes(const IntervalBox& v_box);

IntervalBox next_hidden_bounds(const IntervalBox& v_box);

// Layer-by-layer interval propagation through the unrolled network. The same
// input box applies at every step.
SlopeBoundSet propagate_slope_bounds(const RnnModel& model, int horizon,
                                     const IntervalBox& x_box, const IntervalBox& h0_box);

}  // namespace rnnlip
