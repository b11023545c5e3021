#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace rnnlip {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cascaded tanks: tank i drains into tank i + 1 through an orifice with
// coefficient a_i, integrated by explicit Euler.
struct TankConfig {
  int tanks = 3;
  std::vector<double> a;  // empty: 0.5 for every tank
  double dt = 1.0;
  int sequence_length = 100;
  int sequences = 1000;
  double split = 0.7;
  double input_lo = 0.0;
  double input_hi = 0.3;
  double initial_level_hi = 1.0;  // initial levels uniform in [0, initial_level_hi]
  int hold_min = 5;
  int hold_max = 20;
  std::uint64_t seed = 0;

  std::vector<double> outflow() const;
  void validate() const;
};

VectorXd tank_step(const TankConfig& cfg, const VectorXd& h, const VectorXd& u);

// Row t of the result is the level after applying row t of `inputs`.
MatrixXd simulate(const TankConfig& cfg, const VectorXd& h_init, const MatrixXd& inputs);

// Per-channel affine map to [-1, 1]: normalized = (raw - offset) / scale.
struct Normalization {
  VectorXd offset;
  VectorXd scale;

  static Normalization fit(const std::vector<const MatrixXd*>& data);
  MatrixXd normalize(const MatrixXd& raw) const;
  MatrixXd denormalize(const MatrixXd& normalized) const;
};

// One trajectory, time along rows, channels along columns.
struct Sequence {
  MatrixXd u;
  MatrixXd y;
};

struct SequenceDataset {
  TankConfig config;
  Normalization input_norm;
  Normalization output_norm;
  std::vector<Sequence> train;  // normalized units
  std::vector<Sequence> val;
  std::vector<int> train_index;  // source sequence ids after shuffling
  std::vector<int> val_index;

  int inputs() const;
  int outputs() const;
};

SequenceDataset generate_dataset(const TankConfig& cfg);

}  // namespace rnnlip
