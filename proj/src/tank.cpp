#include "rnnlip/tank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rnnlip/errors.hpp"
#include "rnnlip/kernels.hpp"

namespace rnnlip {

std::vector<double> TankConfig::outflow() const {
  if (a.empty()) return std::vector<double>(static_cast<std::size_t>(tanks), 0.5);
  return a;
}

void TankConfig::validate() const {
  require(tanks >= 1, "tank config: need at least one tank");
  const auto coeff = outflow();
  require(static_cast<int>(coeff.size()) == tanks, "tank config: one outflow coefficient per tank");
  for (double v : coeff) require(v > 0.0 && std::isfinite(v), "tank config: a_i must be positive");
  require(dt > 0.0, "tank config: dt must be positive");
  require(sequence_length >= 1 && sequences >= 2, "tank config: empty dataset");
  require(split > 0.0 && split < 1.0, "tank config: split must lie in (0, 1)");
  require(input_lo >= 0.0 && input_lo <= input_hi, "tank config: invalid inflow range");
  require(initial_level_hi >= 0.0, "tank config: invalid initial level range");
  require(hold_min >= 1 && hold_min <= hold_max, "tank config: invalid hold lengths");
}

namespace {

VectorXd step_unchecked(const std::vector<double>& a, double dt, const VectorXd& h,
                        const VectorXd& u) {
  const Index k = h.size();
  VectorXd next(k);
  double inflow_from_above = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double out = a[i] * std::sqrt(h(i));
    next(i) = std::max(0.0, h(i) + dt * (u(i) + inflow_from_above - out));
    inflow_from_above = out;
  }
  return next;
}

}  // namespace

VectorXd tank_step(const TankConfig& cfg, const VectorXd& h, const VectorXd& u) {
  require(h.size() == cfg.tanks && u.size() == cfg.tanks, "tank_step: dimension mismatch");
  require((h.array() >= 0.0).all(), "tank_step: negative level");
  require((u.array() >= 0.0).all(), "tank_step: negative inflow");
  return step_unchecked(cfg.outflow(), cfg.dt, h, u);
}

MatrixXd simulate(const TankConfig& cfg, const VectorXd& h_init, const MatrixXd& inputs) {
  cfg.validate();
  require(inputs.cols() == cfg.tanks, "simulate: input has wrong channel count");
  MatrixXd levels(inputs.rows(), cfg.tanks);
  VectorXd h = h_init;
  for (Index t = 0; t < inputs.rows(); ++t) {
    h = tank_step(cfg, h, inputs.row(t).transpose());
    levels.row(t) = h.transpose();
  }
  return levels;
}

Normalization Normalization::fit(const std::vector<const MatrixXd*>& data) {
  require(!data.empty(), "normalization: no data");
  const Index c = data.front()->cols();
  VectorXd lo = VectorXd::Constant(c, std::numeric_limits<double>::infinity());
  VectorXd hi = -lo;
  for (const MatrixXd* m : data) {
    require(m->cols() == c, "normalization: channel count mismatch");
    lo = lo.cwiseMin(m->colwise().minCoeff().transpose());
    hi = hi.cwiseMax(m->colwise().maxCoeff().transpose());
  }
  Normalization n;
  n.offset = 0.5 * (lo + hi);
  n.scale = 0.5 * (hi - lo);
  // A constant channel maps to 0.
  for (Index i = 0; i < c; ++i)
    if (!(n.scale(i) > 0.0)) n.scale(i) = 1.0;
  return n;
}

MatrixXd Normalization::normalize(const MatrixXd& raw) const {
  return (raw.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
}

MatrixXd Normalization::denormalize(const MatrixXd& normalized) const {
  return (normalized.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         offset.transpose();
}

int SequenceDataset::inputs() const { return config.tanks; }
int SequenceDataset::outputs() const { return config.tanks; }

SequenceDataset generate_dataset(const TankConfig& cfg) {
  cfg.validate();
  const auto a = cfg.outflow();
  const int count = cfg.sequences;
  std::vector<Sequence> raw(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(static)
  for (int s = 0; s < count; ++s) {
    std::mt19937_64 rng(kernels::derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> level(cfg.input_lo, cfg.input_hi);
    std::uniform_real_distribution<double> start(0.0, cfg.initial_level_hi);
    std::uniform_int_distribution<int> hold(cfg.hold_min, cfg.hold_max);

    MatrixXd u(cfg.sequence_length, cfg.tanks);
    for (int c = 0; c < cfg.tanks; ++c) {
      int t = 0;
      while (t < cfg.sequence_length) {
        const int len = hold(rng);
        const double value = level(rng);
        for (int k = 0; k < len && t < cfg.sequence_length; ++k, ++t) u(t, c) = value;
      }
    }
    VectorXd h(cfg.tanks);
    for (int c = 0; c < cfg.tanks; ++c) h(c) = start(rng);
    MatrixXd y(cfg.sequence_length, cfg.tanks);
    for (int t = 0; t < cfg.sequence_length; ++t) {
      h = step_unchecked(a, cfg.dt, h, u.row(t).transpose());
      y.row(t) = h.transpose();
    }
    raw[s] = Sequence{std::move(u), std::move(y)};
  }

  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(kernels::derive_seed(cfg.seed, ~0ULL));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const int n_train = std::clamp(static_cast<int>(std::lround(cfg.split * count)), 1, count - 1);

  SequenceDataset ds;
  ds.config = cfg;
  ds.train_index.assign(order.begin(), order.begin() + n_train);
  ds.val_index.assign(order.begin() + n_train, order.end());

  std::vector<const MatrixXd*> train_u, train_y;
  for (int idx : ds.train_index) {
    train_u.push_back(&raw[idx].u);
    train_y.push_back(&raw[idx].y);
  }
  ds.input_norm = Normalization::fit(train_u);
  ds.output_norm = Normalization::fit(train_y);

  auto normalized = [&](int idx) {
    return Sequence{ds.input_norm.normalize(raw[idx].u), ds.output_norm.normalize(raw[idx].y)};
  };
  for (int idx : ds.train_index) ds.train.push_back(normalized(idx));
  for (int idx : ds.val_index) ds.val.push_back(normalized(idx));
  return ds;
}

}  // namespace rnnlip
