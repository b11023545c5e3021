#include "rnnlip/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/SVD>

#include "rnnlip/errors.hpp"
#include "rnnlip/kernels.hpp"

namespace rnnlip {

void TrainConfig::validate() const {
  require(hidden >= 1, "train config: hidden width must be >= 1");
  require(washout >= 0, "train config: washout must be >= 0");
  require(a2 > 0.0 && a1 / a2 >= 100.0, "train config: need a1 >> a2 > 0 (a1/a2 >= 100)");
  require(learning_rate > 0.0, "train config: learning rate must be positive");
  require(batch_size >= 1 && max_epochs >= 1 && patience >= 1,
          "train config: batch size, epochs and patience must be >= 1");
  require(power_iterations >= 1 && power_tol > 0.0, "train config: invalid power iteration setup");
}

namespace {

void check_batch(const RnnModel& model, std::span<const Sequence> batch, int washout) {
  require(!batch.empty(), "empty batch");
  for (const auto& s : batch) {
    require(s.u.cols() == model.input() && s.y.cols() == model.output(),
            "sequence channels do not match the model");
    require(s.u.rows() == s.y.rows(), "sequence input and output lengths differ");
    require(washout < s.u.rows(), "washout must be shorter than the sequence");
  }
}

double scored_count(const RnnModel& model, std::span<const Sequence> batch, int washout) {
  double count = 0.0;
  for (const auto& s : batch) count += static_cast<double>(s.u.rows() - washout);
  return count * static_cast<double>(model.output());
}

}  // namespace

double loss_accuracy(const RnnModel& model, std::span<const Sequence> batch, int washout) {
  model.validate();
  check_batch(model, batch, washout);
  double sse = 0.0;
  for (const auto& s : batch) {
    VectorXd h = VectorXd::Zero(model.hidden());
    for (Index t = 0; t < s.u.rows(); ++t) {
      h = (model.W_h * h + model.W_x * s.u.row(t).transpose() + model.b).array().tanh();
      if (t < washout) continue;
      sse += (model.W_out * h + model.b_out - s.y.row(t).transpose()).squaredNorm();
    }
  }
  return sse / scored_count(model, batch, washout);
}

RnnModel accuracy_gradient(const RnnModel& model, std::span<const Sequence> batch, int washout,
                           double* loss) {
  model.validate();
  check_batch(model, batch, washout);
  const Index n = model.hidden();
  const double scale = 1.0 / scored_count(model, batch, washout);
  RnnModel g = RnnModel::zeros(n, model.input(), model.output());
  double sse = 0.0;
  std::vector<VectorXd> hs;
  for (const auto& s : batch) {
    const Index T = s.u.rows();
    hs.assign(static_cast<std::size_t>(T + 1), VectorXd::Zero(n));
    for (Index t = 0; t < T; ++t)
      hs[t + 1] = (model.W_h * hs[t] + model.W_x * s.u.row(t).transpose() + model.b).array().tanh();

    VectorXd dh_next = VectorXd::Zero(n);
    for (Index t = T - 1; t >= 0; --t) {
      const VectorXd& h = hs[t + 1];
      VectorXd dh = dh_next;
      if (t >= washout) {
        const VectorXd e = model.W_out * h + model.b_out - s.y.row(t).transpose();
        sse += e.squaredNorm();
        const VectorXd dy = 2.0 * scale * e;
        g.W_out.noalias() += dy * h.transpose();
        g.b_out += dy;
        dh.noalias() += model.W_out.transpose() * dy;
      }
      const VectorXd dv = dh.array() * (1.0 - h.array().square());
      g.W_h.noalias() += dv * hs[t].transpose();
      g.W_x.noalias() += dv * s.u.row(t);
      g.b += dv;
      dh_next.noalias() = model.W_h.transpose() * dv;
    }
  }
  if (loss) *loss = sse * scale;
  return g;
}

SpectralPair spectral_pair(const MatrixXd& W, int iters, double tol, const VectorXd* start) {
  require(W.allFinite(), "spectral_norm: non-finite matrix");
  require(iters >= 1, "spectral_norm: need at least one iteration");
  SpectralPair out;
  out.u = VectorXd::Zero(W.rows());
  out.v = VectorXd::Zero(W.cols());
  if (W.size() == 0) return out;

  VectorXd v(W.cols());
  if (start && start->size() == W.cols() && start->norm() > 0.0) {
    v = start->normalized();
  } else {
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    v.normalize();
  }
  for (int k = 0; k < iters; ++k) {
    VectorXd next = W.transpose() * (W * v);
    const double nrm = next.norm();
    if (nrm == 0.0) return out;  // W v = 0: W is zero on the start direction
    next /= nrm;
    const double change = (next - v).norm();
    v = std::move(next);
    if (change < tol) break;
  }
  const VectorXd Wv = W * v;
  out.sigma = Wv.norm();
  out.v = v;
  if (out.sigma > 0.0) out.u = Wv / out.sigma;
  return out;
}

double spectral_norm(const MatrixXd& W, int iters, double tol) {
  return spectral_pair(W, iters, tol).sigma;
}

double lrelu(double s, double a1, double a2) { return s >= 0.0 ? a1 * s : a2 * s; }

double loss_stability(const RnnModel& model, const TrainConfig& cfg) {
  return lrelu(spectral_norm(model.W_h, cfg.power_iterations, cfg.power_tol) - 1.0, cfg.a1, cfg.a2);
}

MatrixXd stability_gradient(const RnnModel& model, const TrainConfig& cfg) {
  const SpectralPair sp = spectral_pair(model.W_h, cfg.power_iterations, cfg.power_tol);
  const double slope = sp.sigma - 1.0 >= 0.0 ? cfg.a1 : cfg.a2;
  return slope * sp.u * sp.v.transpose();
}

RnnModel init_model(Index n, Index m, Index p, std::uint64_t seed) {
  require(n >= 1 && m >= 1 && p >= 1, "init_model: dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> uni(-r, r);
  RnnModel model = RnnModel::zeros(n, m, p);
  auto fill = [&](auto& M) {
    for (Index j = 0; j < M.cols(); ++j)
      for (Index i = 0; i < M.rows(); ++i) M(i, j) = uni(rng);
  };
  fill(model.W_x);
  fill(model.W_h);
  fill(model.b);
  fill(model.W_out);
  fill(model.b_out);
  return model;
}

namespace {

// Power iteration only approaches sigma_max from below, so it cannot certify
// ||W_h|| < 1; the stopping rule uses a dense SVD instead (n is small).
double exact_spectral_norm(const MatrixXd& W) {
  if (W.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(W).singularValues()(0);
}

// Parameter vector order: W_x, W_h, b, W_out, b_out (column-major each).
VectorXd pack(const RnnModel& m) {
  VectorXd out(m.W_x.size() + m.W_h.size() + m.b.size() + m.W_out.size() + m.b_out.size());
  Index pos = 0;
  auto put = [&](const auto& M) {
    out.segment(pos, M.size()) = Eigen::Map<const VectorXd>(M.data(), M.size());
    pos += M.size();
  };
  put(m.W_x);
  put(m.W_h);
  put(m.b);
  put(m.W_out);
  put(m.b_out);
  return out;
}

void unpack(const VectorXd& theta, RnnModel& m) {
  Index pos = 0;
  auto take = [&](auto& M) {
    Eigen::Map<VectorXd>(M.data(), M.size()) = theta.segment(pos, M.size());
    pos += M.size();
  };
  take(m.W_x);
  take(m.W_h);
  take(m.b);
  take(m.W_out);
  take(m.b_out);
}

}  // namespace

TrainResult train(const SequenceDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(!data.train.empty() && !data.val.empty(), "train: dataset needs train and val sequences");
  const Index m = data.train.front().u.cols();
  const Index p = data.train.front().y.cols();

  RnnModel model = init_model(cfg.hidden, m, p, kernels::derive_seed(cfg.seed, 0));
  check_batch(model, data.train, cfg.washout);
  check_batch(model, data.val, cfg.washout);

  VectorXd theta = pack(model);
  VectorXd m1 = VectorXd::Zero(theta.size());
  VectorXd m2 = VectorXd::Zero(theta.size());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;

  std::vector<int> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(kernels::derive_seed(cfg.seed, 1));
  std::vector<Sequence> batch;
  VectorXd warm;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  double best_snapshot = std::numeric_limits<double>::infinity();
  int since = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data.train[order[i]]);
      double loss = 0.0;
      RnnModel g = accuracy_gradient(model, batch, cfg.washout, &loss);
      // Warm-started from the previous step's vector; W_h moves little per step,
      // so a few iterations track the leading pair closely.
      const SpectralPair sp =
          spectral_pair(model.W_h, cfg.power_iterations, cfg.power_tol, warm.size() ? &warm : nullptr);
      warm = sp.v;
      g.W_h += (sp.sigma - 1.0 >= 0.0 ? cfg.a1 : cfg.a2) * sp.u * sp.v.transpose();
      train_sum += loss;
      ++batches;

      const VectorXd grad = pack(g);
      ++step;
      m1 = b1 * m1 + (1.0 - b1) * grad;
      m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      unpack(theta, model);
    }
    if (!theta.allFinite()) throw NumericalError("train: parameters became non-finite");

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = train_sum / batches;
    entry.val_loss = loss_accuracy(model, data.val, cfg.washout);
    entry.spectral_norm = exact_spectral_norm(model.W_h);

    if (entry.val_loss < best_val) {
      best_val = entry.val_loss;
      since = 0;
    } else {
      ++since;
    }
    entry.best_val = best_val;
    const bool norm_ok = entry.spectral_norm < 1.0;
    if (norm_ok && entry.val_loss < best_snapshot) {
      best_snapshot = entry.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      result.best_val = entry.val_loss;
      result.spectral_norm = entry.spectral_norm;
      result.norm_condition_met = true;
    }
    result.log.push_back(entry);
    if (since >= cfg.patience && norm_ok) {
      result.stopped_early = true;
      break;
    }
  }

  if (!result.norm_condition_met) {
    result.model = model;
    result.best_epoch = result.log.back().epoch;
    result.best_val = result.log.back().val_loss;
    result.spectral_norm = result.log.back().spectral_norm;
  }
  return result;
}

}  // namespace rnnlip
