#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnnlip/conic.hpp"
#include "rnnlip/model.hpp"
#include "rnnlip/slopes.hpp"

namespace rnnlip {

enum class SlopeMode { global, local };

// How the slope multipliers are shared across the nN unrolled neurons.
enum class MultiplierSharing { neuron, layer };

const char* to_string(SlopeMode mode);
SlopeMode parse_slope_mode(const std::string& text);

// M(rho) = output_term + rho * rho_term, with output_term = E_out^T E_out and
// rho_term = -E_in^T E_in.
struct OutputMetric {
  MatrixXd output_term;
  MatrixXd rho_term;
};

OutputMetric build_M(const UnrolledSystem& sys);

// Incremental quadratic constraints of the activations. Neuron k (row k of A
// and B) contributes
//   Q_k = [a_k b_k] [[-2 alpha_k beta_k, alpha_k + beta_k],
//                    [alpha_k + beta_k,  -2              ]] [a_k b_k]^T
// and Q(lambda) = sum_k lambda_k Q_k.
struct SlopeConstraintBasis {
  MatrixXd A;
  MatrixXd B;
  VectorXd alpha;
  VectorXd beta;

  Index size() const { return alpha.size(); }
  MatrixXd factor(Index k) const;
  Eigen::Matrix2d core(Index k) const;
  MatrixXd term(Index k) const;
  MatrixXd combine(const VectorXd& lambda) const;
};

SlopeConstraintBasis build_Q_global(const UnrolledSystem& sys, double alpha, double beta);
SlopeConstraintBasis build_Q_local(const UnrolledSystem& sys, const SlopeBoundSet& slopes);

struct CertProblem {
  int horizon = 0;
  Index n = 0, m = 0, p = 0, dz = 0;
  MatrixXd M0;     // output term
  MatrixXd M_rho;  // coefficient of rho
  SlopeConstraintBasis Q;
  MultiplierSharing sharing = MultiplierSharing::neuron;

  // Number of slope multipliers (nN for per-neuron sharing, N per layer).
  Index multipliers() const;
  // M0 + rho * M_rho + Q(lambda), lambda given per multiplier.
  MatrixXd evaluate(double rho, const VectorXd& lambda) const;
  // Variables (rho, lambda_1..); all nonnegative.
  conic::LmiProblem to_lmi() const;
};

CertProblem make_cert_problem(const UnrolledSystem& sys, SlopeConstraintBasis basis,
                              MultiplierSharing sharing = MultiplierSharing::neuron);

struct CertSettings {
  conic::SolverSettings solver;
  double certificate_tol = 1e-6;
};

struct CertificationResult {
  int horizon = 0;
  SlopeMode mode = SlopeMode::global;
  double rho = 0.0;
  double L = 0.0;
  VectorXd lambda;
  conic::SolveStatus status = conic::SolveStatus::numerical_limit;
  double certificate_residual = 0.0;  // lambda_max(M + Q) at (rho, lambda)
  double solve_seconds = 0.0;
  int iterations = 0;
  std::string message;
};

// min rho s.t. M0 + rho M_rho + Q(lambda) <= 0, rho >= 0, lambda >= 0. The
// certificate residual is recomputed from a dense eigenvalue decomposition,
// independently of the backend.
CertificationResult solve_lipschitz(const CertProblem& problem, const CertSettings& settings = {},
                                    const conic::ConicBackend* backend = nullptr);

// ||W_out|| * sqrt(sum_t (beta ||W_x||)^2 (beta ||W_h||)^(2(N-t)) + (beta ||W_h||)^(2N)).
// A loose but valid upper bound, used as a cross-check only.
double product_bound(const RnnModel& model, int horizon, double beta = 1.0);

struct SweepOptions {
  SlopeMode mode = SlopeMode::global;
  std::optional<IntervalBox> x_box;   // local mode default: [-1, 1]^m
  std::optional<IntervalBox> h0_box;  // local mode default: [-1, 1]^n
  MultiplierSharing sharing = MultiplierSharing::neuron;
  CertSettings settings;
};

struct SweepResult {
  std::vector<CertificationResult> results;
  double overall_L = 0.0;  // max over successful horizons
  bool warning = false;    // at least one horizon did not reach optimal
};

CertProblem build_cert_problem(const RnnModel& model, int horizon, const SweepOptions& options);

SweepResult sweep_horizons(const RnnModel& model, std::span<const int> horizons,
                           const SweepOptions& options = {});

}  // namespace rnnlip
