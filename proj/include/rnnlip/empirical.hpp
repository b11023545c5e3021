#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rnnlip/kernels.hpp"
#include "rnnlip/model.hpp"

namespace rnnlip {

enum class ExploreMethod { random, active, active_bounded };

const char* to_string(ExploreMethod method);
ExploreMethod parse_explore_method(const std::string& text);

struct ExplorationConfig {
  std::int64_t samples = 100000;        // random mode
  int restarts = 5;                     // active modes
  double perturbation_variance = 1e-3;  // Gaussian perturbation (random and active init)
  double perturbation_box = 1e-3;       // |delta_i| bound in bounded active mode
  int patience = 10;
  double step_size = 1e-2;
  int max_epochs = 2000;
  std::uint64_t seed = 0;
  kernels::Execution execution = kernels::Execution::parallel;

  void validate() const;
};

// Lower bound witness. base and perturbed are stacked inputs (x_1..x_N, h_0);
// l_emp(model, base, perturbed, horizon) reproduces L_emp.
struct EmpiricalResult {
  int horizon = 0;
  ExploreMethod method = ExploreMethod::random;
  double L_emp = 0.0;
  VectorXd base;
  VectorXd perturbed;
  std::int64_t evaluations = 0;
  std::vector<std::string> notes;  // aborted restarts
};

// ||y_N(u2) - y_N(u1)|| / ||u2 - u1||.
double l_emp(const RnnModel& model, const VectorXd& u1, const VectorXd& u2, int horizon);

EmpiricalResult random_explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg);

// Adam ascent on the ratio over (base, perturbation). The bounded variant
// optimizes base = tanh(a), delta = box * tanh(b).
EmpiricalResult active_explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg,
                               bool bounded);

EmpiricalResult explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg,
                        ExploreMethod method);

// Ratio of a sequence-to-sequence map versus per-step ratios
// L_t = ||dy_t|| / ||du_{1:t}||. Entries of du and dy are per-step vectors.
struct SequenceRatios {
  double L_seq = 0.0;
  std::vector<double> per_step;
};

SequenceRatios sequence_vs_pointwise_demo(std::span<const VectorXd> du,
                                          std::span<const VectorXd> dy);

}  // namespace rnnlip
