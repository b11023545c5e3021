#include "rnnlip/certify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rnnlip/errors.hpp"
#include "rnnlip/kernels.hpp"

namespace rnnlip {

const char* to_string(SlopeMode mode) { return mode == SlopeMode::global ? "global" : "local"; }

SlopeMode parse_slope_mode(const std::string& text) {
  if (text == "global") return SlopeMode::global;
  if (text == "local") return SlopeMode::local;
  throw ContractError("unknown slope mode: " + text);
}

OutputMetric build_M(const UnrolledSystem& sys) {
  OutputMetric M;
  M.output_term = sys.E_out.transpose() * sys.E_out;
  M.rho_term = -(sys.E_in.transpose() * sys.E_in);
  return M;
}

MatrixXd SlopeConstraintBasis::factor(Index k) const {
  MatrixXd F(A.cols(), 2);
  F.col(0) = A.row(k).transpose();
  F.col(1) = B.row(k).transpose();
  return F;
}

Eigen::Matrix2d SlopeConstraintBasis::core(Index k) const {
  Eigen::Matrix2d C;
  C << -2.0 * alpha(k) * beta(k), alpha(k) + beta(k), alpha(k) + beta(k), -2.0;
  return C;
}

MatrixXd SlopeConstraintBasis::term(Index k) const {
  const MatrixXd F = factor(k);
  return F * core(k) * F.transpose();
}

MatrixXd SlopeConstraintBasis::combine(const VectorXd& lambda) const {
  require(lambda.size() == size(), "combine: one multiplier per neuron required");
  // [A; B]^T [[-2 D_x T, D_+ T], [D_+ T, -2 T]] [A; B]
  const VectorXd d_times = (-2.0 * alpha.cwiseProduct(beta)).cwiseProduct(lambda);
  const VectorXd d_plus = (alpha + beta).cwiseProduct(lambda);
  const VectorXd d_h = -2.0 * lambda;
  MatrixXd Q = A.transpose() * d_times.asDiagonal() * A;
  const MatrixXd cross = A.transpose() * d_plus.asDiagonal() * B;
  Q += cross + cross.transpose();
  Q += B.transpose() * d_h.asDiagonal() * B;
  return Q;
}

SlopeConstraintBasis build_Q_global(const UnrolledSystem& sys, double alpha, double beta) {
  require(alpha <= beta, "build_Q_global: alpha must not exceed beta");
  SlopeConstraintBasis basis;
  basis.A = sys.A;
  basis.B = sys.B;
  basis.alpha = VectorXd::Constant(sys.neurons(), alpha);
  basis.beta = VectorXd::Constant(sys.neurons(), beta);
  return basis;
}

SlopeConstraintBasis build_Q_local(const UnrolledSystem& sys, const SlopeBoundSet& slopes) {
  require(slopes.horizon() == sys.horizon, "build_Q_local: slope set covers the wrong number of layers");
  SlopeConstraintBasis basis;
  basis.A = sys.A;
  basis.B = sys.B;
  basis.alpha.resize(sys.neurons());
  basis.beta.resize(sys.neurons());
  for (int l = 0; l < sys.horizon; ++l) {
    const auto& layer = slopes.layers[l];
    require(layer.alpha.size() == sys.n && layer.beta.size() == sys.n,
            "build_Q_local: slope layer has wrong width");
    for (Index i = 0; i < sys.n; ++i)
      require(layer.alpha(i) <= layer.beta(i), "build_Q_local: alpha exceeds beta");
    basis.alpha.segment(sys.n * l, sys.n) = layer.alpha;
    basis.beta.segment(sys.n * l, sys.n) = layer.beta;
  }
  return basis;
}

Index CertProblem::multipliers() const {
  return sharing == MultiplierSharing::neuron ? Q.size() : static_cast<Index>(horizon);
}

MatrixXd CertProblem::evaluate(double rho, const VectorXd& lambda) const {
  require(lambda.size() == multipliers(), "evaluate: wrong multiplier count");
  VectorXd per_neuron(Q.size());
  if (sharing == MultiplierSharing::neuron) {
    per_neuron = lambda;
  } else {
    for (int l = 0; l < horizon; ++l) per_neuron.segment(n * l, n).setConstant(lambda(l));
  }
  MatrixXd S = M0 + rho * M_rho + Q.combine(per_neuron);
  return 0.5 * (S + S.transpose());
}

conic::LmiProblem CertProblem::to_lmi() const {
  conic::LmiProblem lmi;
  const Index k = multipliers();
  lmi.objective = VectorXd::Zero(k + 1);
  lmi.objective(0) = 1.0;
  lmi.constant = M0;
  lmi.nonnegative.assign(static_cast<std::size_t>(k + 1), true);
  lmi.terms.reserve(static_cast<std::size_t>(k + 1));

  // rho term: -E_in^T E_in selects the leading mN + n coordinates.
  const Index in_dim = m * horizon + n;
  conic::FactoredSym rho_term;
  rho_term.factor = MatrixXd::Zero(dz, in_dim);
  rho_term.factor.topRows(in_dim).setIdentity();
  rho_term.core = -MatrixXd::Identity(in_dim, in_dim);
  lmi.terms.push_back(std::move(rho_term));

  const Index group = sharing == MultiplierSharing::neuron ? 1 : n;
  for (Index g = 0; g < k; ++g) {
    conic::FactoredSym term;
    term.factor.resize(dz, 2 * group);
    term.core = MatrixXd::Zero(2 * group, 2 * group);
    for (Index j = 0; j < group; ++j) {
      const Index neuron = g * group + j;
      term.factor.middleCols(2 * j, 2) = Q.factor(neuron);
      term.core.block(2 * j, 2 * j, 2, 2) = Q.core(neuron);
    }
    lmi.terms.push_back(std::move(term));
  }
  return lmi;
}

CertProblem make_cert_problem(const UnrolledSystem& sys, SlopeConstraintBasis basis,
                              MultiplierSharing sharing) {
  require(basis.size() == sys.neurons(), "make_cert_problem: basis does not match system");
  CertProblem problem;
  problem.horizon = sys.horizon;
  problem.n = sys.n;
  problem.m = sys.m;
  problem.p = sys.p;
  problem.dz = sys.joint_dim();
  OutputMetric M = build_M(sys);
  problem.M0 = std::move(M.output_term);
  problem.M_rho = std::move(M.rho_term);
  problem.Q = std::move(basis);
  problem.sharing = sharing;
  return problem;
}

CertificationResult solve_lipschitz(const CertProblem& problem, const CertSettings& settings,
                                    const conic::ConicBackend* backend) {
  const auto start = std::chrono::steady_clock::now();
  CertificationResult result;
  result.horizon = problem.horizon;
  const Index k = problem.multipliers();

  // rho = 0, lambda = 0 is optimal whenever M0 is already negative semidefinite
  // (e.g. W_out = 0); the objective cannot go below zero.
  const double m0_top = conic::max_eigenvalue(problem.M0);
  if (m0_top <= 0.0) {
    result.rho = 0.0;
    result.L = 0.0;
    result.lambda = VectorXd::Zero(k);
    result.status = conic::SolveStatus::optimal;
    result.certificate_residual = m0_top;
    result.message = "output term negative semidefinite";
  } else {
    const conic::InteriorPointBackend default_backend;
    const conic::ConicBackend& solver = backend ? *backend : default_backend;
    const conic::SolverResult sol = solver.solve(problem.to_lmi(), settings.solver);
    result.iterations = sol.iterations;
    result.message = sol.message;
    result.status = sol.status;
    result.rho = std::max(0.0, sol.y(0));
    result.L = std::sqrt(result.rho);
    result.lambda = sol.y.tail(k).cwiseMax(0.0);
    result.certificate_residual =
        conic::max_eigenvalue(problem.evaluate(result.rho, result.lambda));
    if (result.status == conic::SolveStatus::optimal &&
        result.certificate_residual > settings.certificate_tol) {
      result.status = conic::SolveStatus::numerical_limit;
      result.message = "certificate residual above tolerance";
    }
  }
  result.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double product_bound(const RnnModel& model, int horizon, double beta) {
  model.validate();
  require(horizon >= 1, "product_bound: horizon must be >= 1");
  auto spectral = [](const MatrixXd& W) {
    Eigen::JacobiSVD<MatrixXd> svd(W);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  };
  const double out = spectral(model.W_out);
  const double gx = beta * spectral(model.W_x);
  const double gh = beta * spectral(model.W_h);
  double sum = std::pow(gh, 2.0 * horizon);
  for (int t = 1; t <= horizon; ++t) sum += gx * gx * std::pow(gh, 2.0 * (horizon - t));
  return out * std::sqrt(sum);
}

CertProblem build_cert_problem(const RnnModel& model, int horizon, const SweepOptions& options) {
  const UnrolledSystem sys = build_unrolled(model, horizon);
  if (options.mode == SlopeMode::global)
    return make_cert_problem(sys, build_Q_global(sys, 0.0, 1.0), options.sharing);
  const IntervalBox x_box = options.x_box.value_or(IntervalBox::uniform(model.input(), -1.0, 1.0));
  const IntervalBox h0_box =
      options.h0_box.value_or(IntervalBox::uniform(model.hidden(), -1.0, 1.0));
  const SlopeBoundSet slopes = propagate_slope_bounds(model, horizon, x_box, h0_box);
  return make_cert_problem(sys, build_Q_local(sys, slopes), options.sharing);
}

SweepResult sweep_horizons(const RnnModel& model, std::span<const int> horizons,
                           const SweepOptions& options) {
  require(!horizons.empty(), "sweep_horizons: no horizons given");
  for (int h : horizons) require(h >= 1, "sweep_horizons: horizons must be >= 1");
  model.validate();

  const auto count = static_cast<std::ptrdiff_t>(horizons.size());
  SweepResult sweep;
  sweep.results.resize(horizons.size());

  // Horizons are independent; when several run concurrently each solve keeps
  // its own kernels serial.
  const bool outer_parallel = count > 1 && kernels::max_threads() > 1;
  CertSettings settings = options.settings;
  if (outer_parallel) settings.solver.execution = kernels::Execution::serial;

#pragma omp parallel for schedule(dynamic, 1) if (outer_parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    CertificationResult r;
    try {
      const CertProblem problem = build_cert_problem(model, horizons[i], options);
      r = solve_lipschitz(problem, settings);
    } catch (const std::exception& e) {
      r.horizon = horizons[i];
      r.status = conic::SolveStatus::numerical_limit;
      r.message = e.what();
    }
    r.mode = options.mode;
    sweep.results[i] = std::move(r);
  }

  bool any = false;
  for (const auto& r : sweep.results) {
    if (r.status != conic::SolveStatus::optimal) {
      sweep.warning = true;
      continue;
    }
    sweep.overall_L = any ? std::max(sweep.overall_L, r.L) : r.L;
    any = true;
  }
  if (!any) sweep.warning = true;
  return sweep;
}

}  // namespace rnnlip
