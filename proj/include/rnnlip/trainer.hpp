#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rnnlip/model.hpp"
#include "rnnlip/tank.hpp"

namespace rnnlip {

struct TrainConfig {
  Index hidden = 8;
  int washout = 25;
  double a1 = 100.0;  // LReLU slope above the unit spectral norm
  double a2 = 0.01;   // and below it
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 10;
  std::uint64_t seed = 0;
  int power_iterations = 50;
  double power_tol = 1e-8;

  void validate() const;
};

// Mean squared output error over timesteps washout+1..T, channels and batch,
// with every sequence started from h_0 = 0.
double loss_accuracy(const RnnModel& model, std::span<const Sequence> batch, int washout);

struct SpectralPair {
  double sigma = 0.0;
  VectorXd u;  // left singular vector
  VectorXd v;  // right singular vector
};

// Leading singular triple by power iteration on W^T W. Starts from a fixed
// seeded vector, or from `start` (e.g. the previous right singular vector).
SpectralPair spectral_pair(const MatrixXd& W, int iters = 50, double tol = 1e-8,
                           const VectorXd* start = nullptr);
double spectral_norm(const MatrixXd& W, int iters = 50, double tol = 1e-8);

double lrelu(double s, double a1, double a2);
// LReLU(||W_h||_2 - 1)
double loss_stability(const RnnModel& model, const TrainConfig& cfg);

// Gradient of loss_accuracy by backpropagation through time; the fields of the
// returned model hold the partial derivatives.
RnnModel accuracy_gradient(const RnnModel& model, std::span<const Sequence> batch, int washout,
                           double* loss = nullptr);
// Subgradient of loss_stability with respect to W_h.
MatrixXd stability_gradient(const RnnModel& model, const TrainConfig& cfg);

// Initial weights uniform in [-1/sqrt(n), 1/sqrt(n)].
RnnModel init_model(Index n, Index m, Index p, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // accuracy part, averaged over batches
  double val_loss = 0.0;
  double spectral_norm = 0.0;  // exact (SVD); decides the norm condition
  double best_val = 0.0;  // best validation loss so far (drives patience)
};

struct TrainResult {
  RnnModel model;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val = 0.0;
  double spectral_norm = 0.0;
  bool norm_condition_met = false;
  bool stopped_early = false;
};

TrainResult train(const SequenceDataset& data, const TrainConfig& cfg);

}  // namespace rnnlip
