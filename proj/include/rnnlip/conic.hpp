#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rnnlip/kernels.hpp"

// Linear matrix inequality programs and a primal-dual interior-point backend.
namespace rnnlip::conic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Symmetric matrix F = U C U^T kept in factored form. Every coefficient of the
// Lipschitz program has low rank (rank 2 per neuron, mN + n for the rho term).
struct FactoredSym {
  MatrixXd factor;  // d x r
  MatrixXd core;    // r x r, symmetric

  MatrixXd dense() const { return factor * core * factor.transpose(); }
};

// minimize    objective^T y
// subject to  constant + sum_i y_i * terms[i]  is negative semidefinite
//             y_i >= 0 for every i with nonnegative[i]
struct LmiProblem {
  VectorXd objective;
  MatrixXd constant;
  std::vector<FactoredSym> terms;
  std::vector<bool> nonnegative;

  Index dim() const { return constant.rows(); }
  Index variables() const { return objective.size(); }
  MatrixXd evaluate(const VectorXd& y) const;
  void validate() const;
};

struct SolverSettings {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-9;
  int max_iterations = 150;
  double step_fraction = 0.99;  // upper limit; the solver adapts below it
  kernels::Execution execution = kernels::Execution::parallel;
};

enum class SolveStatus { optimal, infeasible, numerical_limit };

const char* to_string(SolveStatus status);

struct SolverResult {
  SolveStatus status = SolveStatus::numerical_limit;
  VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
  std::string message;
};

// Backends must be reentrant: solve() may run concurrently on distinct problems.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual SolverResult solve(const LmiProblem& problem, const SolverSettings& settings) const = 0;
  virtual const char* name() const = 0;
};

// Infeasible-start path-following method with the HKM search direction and
// Mehrotra predictor-corrector steps. The LMI is the dual slack block
// Z = -(constant + sum y_i F_i); nonnegativity of y adds a diagonal block.
class InteriorPointBackend final : public ConicBackend {
 public:
  SolverResult solve(const LmiProblem& problem, const SolverSettings& settings) const override;
  const char* name() const override { return "hkm-interior-point"; }
};

// Symmetric-triangle vectorization: upper triangle taken column by column with
// off-diagonal entries multiplied by sqrt(2). Hence svec(A).dot(svec(B)) equals
// trace(A * B) for symmetric A, B, and smat inverts svec.
VectorXd svec(const MatrixXd& S);
MatrixXd smat(const VectorXd& v, Index n);

// The program in cone form for vectorized backends:
//   minimize c^T y  s.t.  h - G y = svec(S), S PSD of order psd_order,
//                         y_i >= 0 for i in nonnegative.
struct VectorizedLmi {
  VectorXd c;
  MatrixXd G;
  VectorXd h;
  Index psd_order = 0;
  std::vector<Index> nonnegative;
};

VectorizedLmi vectorize(const LmiProblem& problem);

double max_eigenvalue(const MatrixXd& S);

}  // namespace rnnlip::conic
