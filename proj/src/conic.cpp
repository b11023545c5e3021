#include "rnnlip/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rnnlip/errors.hpp"

namespace rnnlip::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void symmetrize(MatrixXd& S) { S = 0.5 * (S + S.transpose()).eval(); }

// Standard form used internally:
//   primal  max <C, X>  s.t. <A_i, X> + x_{slot(i)} = b_i,  X PSD, x >= 0
//   dual    min b^T y   s.t. Z = sum_i y_i A_i - C PSD,  s = y_{lp} >= 0
// with C = constant and A_i = -F_i, so Z = -(constant + sum_i y_i F_i).
class StandardForm {
 public:
  StandardForm(const LmiProblem& problem, kernels::Execution exec)
      : exec_(exec), C_(problem.constant), b_(problem.objective) {
    d_ = problem.dim();
    k_ = problem.variables();
    offsets_.reserve(static_cast<std::size_t>(k_) + 1);
    offsets_.push_back(0);
    for (const auto& term : problem.terms) offsets_.push_back(offsets_.back() + term.core.rows());
    U_.resize(d_, offsets_.back());
    cores_.reserve(problem.terms.size());
    for (Index i = 0; i < k_; ++i) {
      const auto& term = problem.terms[i];
      U_.middleCols(offsets_[i], term.core.rows()) = term.factor;
      MatrixXd core = -term.core;
      symmetrize(core);
      cores_.push_back(std::move(core));
    }
    // Unit-norm constraint matrices: y'_i = scale_i * y_i with A'_i = A_i / scale_i.
    scale_ = VectorXd::Ones(k_);
    for (Index i = 0; i < k_; ++i) {
      const double nrm = term_norm(i);
      if (nrm > 0.0) {
        scale_(i) = nrm;
        cores_[i] /= nrm;
        b_(i) /= nrm;
      }
    }
    for (Index i = 0; i < k_; ++i)
      if (problem.nonnegative[i]) lp_vars_.push_back(i);
  }

  Index dim() const { return d_; }
  Index constraints() const { return k_; }
  Index lp_size() const { return static_cast<Index>(lp_vars_.size()); }
  Index lp_var(Index j) const { return lp_vars_[j]; }
  const MatrixXd& C() const { return C_; }
  const VectorXd& b() const { return b_; }
  const VectorXd& scale() const { return scale_; }

  // (<A_i, K>)_i; K need not be symmetric.
  VectorXd apply(const MatrixXd& K) const {
    const MatrixXd KU = K * U_;
    VectorXd out;
    kernels::block_traces(U_, KU, cores_, offsets_, out, exec_);
    return out;
  }

  // sum_i y_i A_i
  MatrixXd adjoint(const VectorXd& y) const {
    MatrixXd W(d_, U_.cols());
    for (Index i = 0; i < k_; ++i) {
      const Index r = cores_[i].rows();
      W.middleCols(offsets_[i], r).noalias() = U_.middleCols(offsets_[i], r) * (y(i) * cores_[i]);
    }
    MatrixXd S = W * U_.transpose();
    symmetrize(S);
    return S;
  }

  // H_ij = <A_i, X A_j Z^{-1}> for the dense block.
  MatrixXd schur(const MatrixXd& X, const MatrixXd& Zinv) const {
    const MatrixXd G1 = U_.transpose() * (X * U_);
    const MatrixXd G2 = U_.transpose() * (Zinv * U_);
    // P = blkdiag(D) * G1 * blkdiag(D)
    MatrixXd P = G1;
    for (Index i = 0; i < k_; ++i) {
      const Index r = cores_[i].rows();
      P.middleRows(offsets_[i], r) = cores_[i] * P.middleRows(offsets_[i], r);
    }
    for (Index i = 0; i < k_; ++i) {
      const Index r = cores_[i].rows();
      P.middleCols(offsets_[i], r) = P.middleCols(offsets_[i], r) * cores_[i];
    }
    MatrixXd H;
    kernels::block_hadamard_sum(P, G2, offsets_, H, exec_);
    return H;
  }

  double term_norm(Index i) const {
    const Index r = cores_[i].rows();
    const auto Ui = U_.middleCols(offsets_[i], r);
    const MatrixXd DG = cores_[i] * (Ui.transpose() * Ui);
    return std::sqrt(std::max(0.0, (DG * DG).trace()));
  }

 private:
  kernels::Execution exec_;
  Index d_ = 0;
  Index k_ = 0;
  MatrixXd C_;
  VectorXd b_;
  MatrixXd U_;
  std::vector<MatrixXd> cores_;
  std::vector<Index> offsets_;
  std::vector<Index> lp_vars_;
  VectorXd scale_;
};

// Largest alpha with S + alpha * dS PSD, given a Cholesky factor of S.
double max_psd_step(const Eigen::LLT<MatrixXd>& chol, const MatrixXd& dS) {
  MatrixXd M = chol.matrixL().solve(dS);
  M = chol.matrixL().solve(M.transpose().eval());
  symmetrize(M);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  return lo >= 0.0 ? kInf : -1.0 / lo;
}

double max_lp_step(const VectorXd& v, const VectorXd& dv) {
  double step = kInf;
  for (Index j = 0; j < v.size(); ++j)
    if (dv(j) < 0.0) step = std::min(step, -v(j) / dv(j));
  return step;
}

struct Direction {
  VectorXd dy;
  MatrixXd dX, dZ;
  VectorXd dx, ds;
};

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::numerical_limit:
      return "numerical-limit";
  }
  return "unknown";
}

MatrixXd LmiProblem::evaluate(const VectorXd& y) const {
  require(y.size() == variables(), "LmiProblem::evaluate: wrong variable count");
  MatrixXd S = constant;
  for (Index i = 0; i < variables(); ++i)
    if (y(i) != 0.0) S.noalias() += terms[i].factor * (y(i) * terms[i].core) * terms[i].factor.transpose();
  symmetrize(S);
  return S;
}

void LmiProblem::validate() const {
  require(constant.rows() == constant.cols(), "LMI constant must be square");
  require(static_cast<Index>(terms.size()) == variables(), "one LMI term per variable required");
  require(static_cast<Index>(nonnegative.size()) == variables(), "nonnegativity flags mismatch");
  require(variables() > 0, "LMI needs at least one variable");
  for (const auto& term : terms) {
    require(term.factor.rows() == dim(), "LMI factor has wrong row count");
    require(term.core.rows() == term.factor.cols() && term.core.cols() == term.core.rows(),
            "LMI core shape mismatch");
    require(term.factor.allFinite() && term.core.allFinite(), "LMI term not finite");
  }
  require(constant.allFinite() && objective.allFinite(), "LMI data not finite");
}

SolverResult InteriorPointBackend::solve(const LmiProblem& problem,
                                         const SolverSettings& settings) const {
  problem.validate();
  const StandardForm sf(problem, settings.execution);
  const Index d = sf.dim();
  const Index k = sf.constraints();
  const Index nlp = sf.lp_size();
  const double n_total = static_cast<double>(d + nlp);
  const double norm_b = sf.b().norm();
  const double norm_C = sf.C().norm();

  double max_ratio = 0.0;
  double max_norm = norm_C;
  for (Index i = 0; i < k; ++i) {
    const double a = sf.term_norm(i);
    max_ratio = std::max(max_ratio, (1.0 + std::abs(sf.b()(i))) / (1.0 + a));
    max_norm = std::max(max_norm, a);
  }
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double xi = std::max({10.0, sqrt_d, static_cast<double>(d) * max_ratio});
  const double eta = std::max({10.0, sqrt_d, max_norm});

  MatrixXd X = xi * MatrixXd::Identity(d, d);
  MatrixXd Z = eta * MatrixXd::Identity(d, d);
  VectorXd x = VectorXd::Constant(nlp, xi);
  VectorXd s = VectorXd::Constant(nlp, eta);
  VectorXd y = VectorXd::Zero(k);

  SolverResult result;
  const MatrixXd I = MatrixXd::Identity(d, d);
  int stalled = 0;
  double fraction = 0.9;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    // Residuals
    VectorXd rp = sf.b() - sf.apply(X);
    for (Index j = 0; j < nlp; ++j) rp(sf.lp_var(j)) -= x(j);
    MatrixXd Rd = sf.adjoint(y) - sf.C() - Z;
    VectorXd rlp(nlp);
    for (Index j = 0; j < nlp; ++j) rlp(j) = y(sf.lp_var(j)) - s(j);

    const double pobj = (sf.C().array() * X.array()).sum();
    const double dobj = sf.b().dot(y);
    const double compl_gap = (X.array() * Z.array()).sum() + x.dot(s);
    const double denom = 1.0 + std::abs(pobj) + std::abs(dobj);

    result.iterations = iter;
    result.y = y.cwiseQuotient(sf.scale());
    result.primal_objective = pobj;
    result.dual_objective = dobj;
    result.primal_infeasibility = rp.norm() / (1.0 + norm_b);
    result.dual_infeasibility =
        std::sqrt(Rd.squaredNorm() + rlp.squaredNorm()) / (1.0 + norm_C);
    result.relative_gap = std::max(std::abs(dobj - pobj), std::abs(compl_gap)) / denom;

    if (result.primal_infeasibility < settings.feasibility_tol &&
        result.dual_infeasibility < settings.feasibility_tol &&
        result.relative_gap < settings.gap_tol) {
      result.status = SolveStatus::optimal;
      result.message = "converged";
      return result;
    }
    if (y.lpNorm<Eigen::Infinity>() > 1e12) {
      result.status = SolveStatus::infeasible;
      result.message = "dual iterates diverged";
      return result;
    }
    if (iter == settings.max_iterations) break;

    const double mu = compl_gap / n_total;
    Eigen::LLT<MatrixXd> zchol(Z);
    Eigen::LLT<MatrixXd> xchol(X);
    if (zchol.info() != Eigen::Success || xchol.info() != Eigen::Success) {
      result.message = "iterate lost positive definiteness";
      break;
    }
    MatrixXd Zinv = zchol.solve(I);
    symmetrize(Zinv);

    MatrixXd H = sf.schur(X, Zinv);
    for (Index j = 0; j < nlp; ++j) H(sf.lp_var(j), sf.lp_var(j)) += x(j) / s(j);
    Eigen::LDLT<MatrixXd> hfac(H);
    if (hfac.info() != Eigen::Success) {
      result.message = "Schur complement factorization failed";
      break;
    }

    const MatrixXd XRdZinv = X * Rd * Zinv;

    auto direction = [&](double sigma_mu, const MatrixXd* Gc, const VectorXd* gc) {
      Direction dir;
      MatrixXd K = sigma_mu * Zinv - X - XRdZinv;
      if (Gc) K.noalias() -= (*Gc) * Zinv;
      VectorXd lpK(nlp);
      for (Index j = 0; j < nlp; ++j) {
        const double g = gc ? (*gc)(j) : 0.0;
        lpK(j) = (sigma_mu - g) / s(j) - x(j) - x(j) * rlp(j) / s(j);
      }
      VectorXd rhs = sf.apply(K) - rp;
      for (Index j = 0; j < nlp; ++j) rhs(sf.lp_var(j)) += lpK(j);
      dir.dy = hfac.solve(rhs);

      const MatrixXd Ady = sf.adjoint(dir.dy);
      dir.dZ = Ady + Rd;
      dir.dX = K - X * Ady * Zinv;
      symmetrize(dir.dX);
      dir.ds.resize(nlp);
      dir.dx.resize(nlp);
      for (Index j = 0; j < nlp; ++j) {
        const double dyj = dir.dy(sf.lp_var(j));
        dir.ds(j) = dyj + rlp(j);
        dir.dx(j) = lpK(j) - x(j) * dyj / s(j);
      }
      return dir;
    };

    auto steps = [&](const Direction& dir, double fraction) {
      const double ap = std::min({1.0, fraction * max_psd_step(xchol, dir.dX),
                                  fraction * max_lp_step(x, dir.dx)});
      const double ad = std::min({1.0, fraction * max_psd_step(zchol, dir.dZ),
                                  fraction * max_lp_step(s, dir.ds)});
      return std::pair{ap, ad};
    };

    // Predictor
    const Direction aff = direction(0.0, nullptr, nullptr);
    const auto [ap_aff, ad_aff] = steps(aff, 1.0);
    const double mu_aff = (((X + ap_aff * aff.dX).array() * (Z + ad_aff * aff.dZ).array()).sum() +
                           (x + ap_aff * aff.dx).dot(s + ad_aff * aff.ds)) /
                          n_total;
    // Short predictor steps mean the iterate is poorly centred: lower the
    // exponent so more centring is mixed in.
    const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap_aff, ad_aff), 2));
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);

    // Corrector
    const MatrixXd Gc = aff.dX * aff.dZ;
    const VectorXd gc = aff.dx.cwiseProduct(aff.ds);
    const Direction dir = direction(sigma * mu, &Gc, &gc);
    const auto [ap, ad] = steps(dir, std::min(settings.step_fraction, fraction));

    if (!dir.dy.allFinite() || !dir.dX.allFinite()) {
      result.message = "non-finite search direction";
      break;
    }
    stalled = (ap < 1e-10 && ad < 1e-10) ? stalled + 1 : 0;
    if (stalled >= 3) {
      result.message = "step length stalled";
      break;
    }

    // Back off from the boundary after short steps, press on after long ones.
    fraction = 0.9 + 0.09 * std::min(ap, ad);
    X += ap * dir.dX;
    x += ap * dir.dx;
    y += ad * dir.dy;
    Z += ad * dir.dZ;
    s += ad * dir.ds;
    symmetrize(X);
    symmetrize(Z);
  }

  result.status = SolveStatus::numerical_limit;
  if (result.message.empty()) result.message = "iteration limit reached";
  return result;
}

VectorXd svec(const MatrixXd& S) {
  require(S.rows() == S.cols(), "svec needs a square matrix");
  const Index n = S.rows();
  VectorXd v(n * (n + 1) / 2);
  Index pos = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) v(pos++) = (i == j) ? S(i, j) : std::sqrt(2.0) * S(i, j);
  return v;
}

MatrixXd smat(const VectorXd& v, Index n) {
  require(v.size() == n * (n + 1) / 2, "smat: vector length does not match order");
  MatrixXd S(n, n);
  Index pos = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) {
      const double value = (i == j) ? v(pos) : v(pos) / std::sqrt(2.0);
      S(i, j) = value;
      S(j, i) = value;
      ++pos;
    }
  return S;
}

VectorizedLmi vectorize(const LmiProblem& problem) {
  problem.validate();
  VectorizedLmi out;
  out.c = problem.objective;
  out.psd_order = problem.dim();
  out.h = svec(-problem.constant);
  out.G.resize(out.h.size(), problem.variables());
  for (Index i = 0; i < problem.variables(); ++i) {
    out.G.col(i) = svec(problem.terms[i].dense());
    if (problem.nonnegative[i]) out.nonnegative.push_back(i);
  }
  return out;
}

double max_eigenvalue(const MatrixXd& S) {
  MatrixXd sym = S;
  symmetrize(sym);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(sym.rows() - 1);
}

}  // namespace rnnlip::conic
