#include "rnnlip/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rnnlip/errors.hpp"

namespace rnnlip {

const char* to_string(ExploreMethod method) {
  switch (method) {
    case ExploreMethod::random:
      return "random";
    case ExploreMethod::active:
      return "active";
    case ExploreMethod::active_bounded:
      return "active-bounded";
  }
  return "unknown";
}

ExploreMethod parse_explore_method(const std::string& text) {
  if (text == "random") return ExploreMethod::random;
  if (text == "active") return ExploreMethod::active;
  if (text == "active-bounded") return ExploreMethod::active_bounded;
  throw ContractError("unknown exploration method: " + text);
}

void ExplorationConfig::validate() const {
  require(samples >= 1, "samples must be >= 1");
  require(restarts >= 1, "restarts must be >= 1");
  require(perturbation_variance > 0.0 && perturbation_box > 0.0,
          "perturbation scales must be positive");
  require(patience >= 1, "patience must be >= 1");
  require(step_size > 0.0, "step size must be positive");
  require(max_epochs >= 1, "max_epochs must be >= 1");
}

double l_emp(const RnnModel& model, const VectorXd& u1, const VectorXd& u2, int horizon) {
  require(u1.size() == u2.size(), "l_emp: input pair has mismatched lengths");
  const double du = (u2 - u1).norm();
  require(du > 0.0, "l_emp: identical inputs");
  return (final_output(model, u2, horizon) - final_output(model, u1, horizon)).norm() / du;
}

EmpiricalResult random_explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg) {
  model.validate();
  cfg.validate();
  require(horizon >= 1, "random_explore: horizon must be >= 1");
  const double noise_std = std::sqrt(cfg.perturbation_variance);
  const kernels::PairSearch search =
      cfg.execution == kernels::Execution::parallel
          ? kernels::random_pairs_parallel(model, horizon, noise_std, cfg.seed, cfg.samples)
          : kernels::random_pairs_serial(model, horizon, noise_std, cfg.seed, cfg.samples);

  EmpiricalResult result;
  result.horizon = horizon;
  result.method = ExploreMethod::random;
  result.evaluations = search.evaluations;
  if (search.base.size() == 0) return result;  // every sampled perturbation was exactly zero
  result.base = search.base;
  result.perturbed = search.perturbed;
  result.L_emp = l_emp(model, result.base, result.perturbed, horizon);
  return result;
}

namespace {

struct Adam {
  VectorXd m, v;
  int t = 0;
  VectorXd lr;  // per coordinate

  explicit Adam(VectorXd step) : m(VectorXd::Zero(step.size())), v(VectorXd::Zero(step.size())), lr(std::move(step)) {}

  // Ascent step on theta along gradient g.
  void ascend(VectorXd& theta, const VectorXd& g) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    theta.array() += lr.array() * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

struct RestartOutcome {
  bool ok = false;
  double ratio = 0.0;
  VectorXd base, perturbed;
  std::int64_t evaluations = 0;
  std::string note;
};

// ratio r(u, d) = ||f(u + d) - f(u)|| / ||d|| and its gradient in (u, d).
double ratio_and_gradient(const RnnModel& model, int horizon, const VectorXd& u,
                          const VectorXd& d, VectorXd& grad_u, VectorXd& grad_d) {
  const VectorXd u2 = u + d;
  const VectorXd e = final_output(model, u2, horizon) - final_output(model, u, horizon);
  const double ne = e.norm();
  const double nd = d.norm();
  const double r = ne / nd;
  const VectorXd w = ne > 0.0 ? VectorXd(e / (ne * nd)) : VectorXd::Zero(e.size());
  const VectorXd g2 = input_gradient(model, u2, horizon, w);
  const VectorXd g1 = input_gradient(model, u, horizon, w);
  grad_u = g2 - g1;
  grad_d = g2 - (r / (nd * nd)) * d;
  return r;
}

RestartOutcome run_restart(const RnnModel& model, int horizon, const ExplorationConfig& cfg,
                           bool bounded, int restart) {
  std::mt19937_64 rng(kernels::derive_seed(cfg.seed, static_cast<std::uint64_t>(restart)));
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(cfg.perturbation_variance));
  const Index dim = model.input() * horizon + model.hidden();

  // theta = (u, d) or, bounded, the free variables (a, b) behind them.
  VectorXd theta(2 * dim);
  for (Index i = 0; i < dim; ++i) theta(i) = uniform(rng);
  for (Index i = 0; i < dim; ++i) theta(dim + i) = noise(rng);
  if (bounded) {
    for (Index i = 0; i < dim; ++i) theta(i) = std::atanh(theta(i) * 0.999);
    for (Index i = 0; i < dim; ++i)
      theta(dim + i) = std::atanh(std::clamp(theta(dim + i) / cfg.perturbation_box, -0.999, 0.999));
  }

  RestartOutcome out;
  // Adam moves every coordinate by about the step size. The raw perturbation is
  // ~sqrt(variance) per coordinate, so its step is scaled to match; otherwise
  // each update rescrambles delta. The tanh parameters are O(1) already.
  VectorXd lr = VectorXd::Constant(2 * dim, cfg.step_size);
  if (!bounded) lr.tail(dim) *= std::sqrt(cfg.perturbation_variance);
  Adam adam(std::move(lr));
  VectorXd u(dim), d(dim), gu, gd, grad(2 * dim);
  double best = -1.0;
  int since = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (bounded) {
      u = theta.head(dim).array().tanh();
      d = cfg.perturbation_box * theta.tail(dim).array().tanh();
    } else {
      u = theta.head(dim);
      d = theta.tail(dim);
    }
    if (!(d.norm() > 0.0)) {
      out.note = "restart " + std::to_string(restart) + ": perturbation collapsed";
      return out;
    }
    const double r = ratio_and_gradient(model, horizon, u, d, gu, gd);
    out.evaluations += 2;
    if (!std::isfinite(r) || !gu.allFinite() || !gd.allFinite()) {
      out.note = "restart " + std::to_string(restart) + ": non-finite gradient at epoch " +
                 std::to_string(epoch);
      return out;
    }
    if (best < 0.0 || r > best * (1.0 + 1e-6)) {
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
    if (r > best) {
      best = r;
      out.base = u;
      out.perturbed = u + d;
    }
    if (bounded) {
      grad.head(dim) = gu.array() * (1.0 - u.array().square());
      grad.tail(dim) = gd.array() * (cfg.perturbation_box - d.array().square() / cfg.perturbation_box);
    } else {
      grad.head(dim) = gu;
      grad.tail(dim) = gd;
    }
    adam.ascend(theta, grad);
  }
  out.ok = true;
  out.ratio = best;
  return out;
}

}  // namespace

EmpiricalResult active_explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg,
                               bool bounded) {
  model.validate();
  cfg.validate();
  require(horizon >= 1, "active_explore: horizon must be >= 1");

  std::vector<RestartOutcome> runs(static_cast<std::size_t>(cfg.restarts));
  const bool parallel = cfg.execution == kernels::Execution::parallel;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int r = 0; r < cfg.restarts; ++r) runs[r] = run_restart(model, horizon, cfg, bounded, r);

  EmpiricalResult result;
  result.horizon = horizon;
  result.method = bounded ? ExploreMethod::active_bounded : ExploreMethod::active;
  bool any = false;
  for (auto& run : runs) {
    result.evaluations += run.evaluations;
    if (!run.ok) {
      result.notes.push_back(run.note);
      continue;
    }
    if (run.base.size() == 0) continue;
    // The stored pair is the witness; its replayed ratio is the reported value.
    const double replay = l_emp(model, run.base, run.perturbed, horizon);
    if (!any || replay > result.L_emp) {
      result.L_emp = replay;
      result.base = std::move(run.base);
      result.perturbed = std::move(run.perturbed);
    }
    any = true;
  }
  if (!any) throw NumericalError("active_explore: every restart aborted");
  return result;
}

EmpiricalResult explore(const RnnModel& model, int horizon, const ExplorationConfig& cfg,
                        ExploreMethod method) {
  switch (method) {
    case ExploreMethod::random:
      return random_explore(model, horizon, cfg);
    case ExploreMethod::active:
      return active_explore(model, horizon, cfg, false);
    case ExploreMethod::active_bounded:
      return active_explore(model, horizon, cfg, true);
  }
  throw ContractError("unknown exploration method");
}

SequenceRatios sequence_vs_pointwise_demo(std::span<const VectorXd> du,
                                          std::span<const VectorXd> dy) {
  require(!du.empty() && du.size() == dy.size(), "demo: du and dy need the same nonzero length");
  SequenceRatios out;
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < du.size(); ++t) {
    num += dy[t].squaredNorm();
    den += du[t].squaredNorm();
    if (den == 0.0) throw ContractError("demo: zero input change up to step " + std::to_string(t + 1));
    out.per_step.push_back(dy[t].norm() / std::sqrt(den));
  }
  out.L_seq = std::sqrt(num) / std::sqrt(den);
  return out;
}

}  // namespace rnnlip
