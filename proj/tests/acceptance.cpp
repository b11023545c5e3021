// End-to-end acceptance run: trains a small fleet on tank data, certifies and
// estimates every net over a horizon sweep, then prints one PASS/FAIL line per
// criterion. Exit status is nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rnnlip/certify.hpp"
#include "rnnlip/empirical.hpp"
#include "rnnlip/kernels.hpp"
#include "rnnlip/tank.hpp"
#include "rnnlip/trainer.hpp"

using namespace rnnlip;

namespace {

constexpr int kFleet = 10;
constexpr int kHidden = 8;
const std::vector<int> kHorizons = {1, 2, 5, 10, 20};

int failures = 0;
std::map<int, std::string> verdicts;
double worst_residual = -1e300;
int certificates = 0;

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  char head[32];
  std::snprintf(head, sizeof head, "%s [%d] ", ok ? "PASS" : "FAIL", id);
  verdicts[id] = head + what + ": " + detail;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CertificationResult certify(const RnnModel& m, int N, SlopeMode mode) {
  SweepOptions o;
  o.mode = mode;
  CertificationResult r = solve_lipschitz(build_cert_problem(m, N, o));
  if (r.status == conic::SolveStatus::optimal) {
    worst_residual = std::max(worst_residual, r.certificate_residual);
    ++certificates;
  }
  return r;
}

struct Cell {
  double global = 0, local = 0, act = 0, act_b = 0, rand = 0;
  bool optimal = false;
};

}  // namespace

int main() {
  kernels::configure_threads();
  const auto t_start = std::chrono::steady_clock::now();

  // Fleet: one tank dataset, kFleet seeds.
  TankConfig tc;
  tc.seed = 1;
  const SequenceDataset data = generate_dataset(tc);
  TrainConfig cfg;
  cfg.hidden = kHidden;
  const double zero_val = loss_accuracy(RnnModel::zeros(kHidden, 3, 3), data.val, cfg.washout);

  std::vector<TrainResult> fleet;
  for (int s = 0; s < kFleet; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    fleet.push_back(train(data, cfg));
    const TrainResult& r = fleet.back();
    std::printf("  net %d: epochs %zu, val %.3e, ||W_h|| %.4f\n", s, r.log.size(), r.best_val,
                r.spectral_norm);
    std::fflush(stdout);
  }
  const double train_seconds = seconds_since(t_start);

  std::vector<std::vector<Cell>> table(kFleet, std::vector<Cell>(kHorizons.size()));
  for (int s = 0; s < kFleet; ++s) {
    const RnnModel& m = fleet[s].model;
    for (std::size_t k = 0; k < kHorizons.size(); ++k) {
      const int N = kHorizons[k];
      Cell& c = table[s][k];
      const CertificationResult g = certify(m, N, SlopeMode::global);
      const CertificationResult l = certify(m, N, SlopeMode::local);
      c.optimal = g.status == conic::SolveStatus::optimal && l.status == conic::SolveStatus::optimal;
      c.global = g.L;
      c.local = l.L;
      ExplorationConfig ec;
      ec.seed = kernels::derive_seed(1000 + s, static_cast<std::uint64_t>(N));
      c.rand = random_explore(m, N, ec).L_emp;
      c.act = active_explore(m, N, ec, false).L_emp;
      c.act_b = active_explore(m, N, ec, true).L_emp;
      std::printf("  net %d N=%2d: global %.5f local %.5f act %.5f act_b %.5f rand %.5f%s\n", s, N,
                  c.global, c.local, c.act, c.act_b, c.rand, c.optimal ? "" : " (not optimal)");
      std::fflush(stdout);
    }
  }
  const double pipeline_seconds = seconds_since(t_start);

  // 1
  {
    int bad = 0, total = 0, bounded_above = 0;
    for (const auto& row : table)
      for (const Cell& c : row) {
        ++total;
        if (!c.optimal || !(c.rand <= c.act) || !(c.act <= c.global * (1 + 1e-6) + 1e-8)) ++bad;
        if (c.act_b > c.act + 1e-9) ++bounded_above;
      }
    verdict(1, bad == 0 && pipeline_seconds <= 1800.0, "soundness ordering L_rand <= L_act <= L_cert",
            std::to_string(total - bad) + "/" + std::to_string(total) + " cases hold, pipeline " +
                fmt("%.0f s", pipeline_seconds) + " (training " + fmt("%.0f s)", train_seconds) +
                "; bounded active above unbounded in " + std::to_string(bounded_above) + " cases");
  }

  auto mean_gap = [&](std::size_t k) {
    double sum = 0.0;
    for (const auto& row : table) sum += (row[k].global - row[k].act) / row[k].act * 100.0;
    return sum / kFleet;
  };
  // 2, 3
  {
    const double g1 = mean_gap(0);
    verdict(2, g1 <= 5.0, "short-horizon gap at N=1", fmt("mean gap %.3f%% (limit 5%%)", g1));
    const double g20 = mean_gap(kHorizons.size() - 1);
    verdict(3, g20 <= 60.0, "long-horizon gap at N=20", fmt("mean gap %.3f%% (limit 60%%)", g20));
  }
  // 4
  {
    double sum = 0.0;
    int count = 0, loosened = 0;
    for (const auto& row : table)
      for (const Cell& c : row) {
        sum += (c.global - c.local) / c.global * 100.0;
        ++count;
        if (c.local > c.global + 1e-6) ++loosened;
      }
    const double mean = sum / count;
    verdict(4, mean >= 0.0 && mean <= 5.0 && loosened == 0, "local-slope improvement",
            fmt("mean %.3f%% over fleet x horizons, ", mean) + std::to_string(loosened) +
                " cases with L_local > L_global + 1e-6");
  }

  // 6: one-neuron nets.
  {
    std::mt19937_64 rng(606);
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const VectorXd w = oracle::uniform_vector(rng, 4, -2.0, 2.0);
      RnnModel m = RnnModel::zeros(1, 1, 1);
      m.W_x(0, 0) = w(0);
      m.W_h(0, 0) = w(1);
      m.b(0) = 0.5 * w(2);
      m.W_out(0, 0) = w(3);
      const double grid = oracle::scalar_grid_supremum(w(0), w(1), 0.5 * w(2), w(3));
      const double L = certify(m, 1, SlopeMode::global).L;
      const double upper = product_bound(m, 1);
      if (L >= grid - 1e-3 && L <= upper + 1e-6) ++ok;
      worst = std::max({worst, grid - 1e-3 - L, L - upper - 1e-6});
    }
    verdict(6, ok == 20, "one-neuron oracle bracket",
            std::to_string(ok) + "/20 inside [grid - 1e-3, product bound + 1e-6], worst excess " +
                fmt("%.2e", worst));
  }
  // 7
  {
    double worst = 0.0;
    for (int s = 0; s < 5; ++s) {
      const double base = certify(fleet[s].model, 5, SlopeMode::global).L;
      for (double c : {0.5, 2.0, 10.0}) {
        RnnModel scaled = fleet[s].model;
        scaled.W_out *= c;
        const double Lc = certify(scaled, 5, SlopeMode::global).L;
        worst = std::max(worst, std::abs(Lc - c * base) / Lc);
      }
    }
    verdict(7, worst <= 1e-6, "output-scaling equivariance", fmt("worst relative deviation %.2e", worst));
  }
  // 8
  {
    double worst = 0.0;
    for (int s = 0; s < kFleet; ++s) {
      RnnModel m = fleet[s].model;
      m.W_out.setZero();
      for (int N : kHorizons)
        for (SlopeMode mode : {SlopeMode::global, SlopeMode::local})
          worst = std::max(worst, certify(m, N, mode).L);
    }
    verdict(8, worst <= 1e-6, "zero readout", fmt("largest certified L %.2e", worst));
  }
  // 9
  {
    const std::vector<VectorXd> du = {VectorXd::Constant(1, 4.0), VectorXd::Constant(1, 3.0)};
    const std::vector<VectorXd> dy = {VectorXd::Constant(1, 5.0), VectorXd::Constant(1, 0.0)};
    const SequenceRatios r = sequence_vs_pointwise_demo(du, dy);
    const bool ok = r.per_step.size() == 2 && std::abs(r.L_seq - 1.0) <= 1e-12 &&
                    std::abs(r.per_step[0] - 1.25) <= 1e-12 && std::abs(r.per_step[1]) <= 1e-12;
    verdict(9, ok, "sequence versus pointwise dilution",
            fmt("L_seq %.15g, ", r.L_seq) + fmt("L_1 %.15g, ", r.per_step.at(0)) +
                fmt("L_2 %.15g", r.per_step.at(1)));
  }
  // 10
  {
    const SlopeInterval s = local_slopes(IntervalBox::uniform(1, -1.0, 1.0));
    const double expect = oracle::sech2(1.0);
    const bool ok = std::abs(s.alpha(0) - expect) <= 1e-3 && s.beta(0) == 1.0 &&
                    std::abs(s.alpha(0) - 0.41997) <= 1e-3;
    verdict(10, ok, "local slopes on [-1, 1]",
            fmt("alpha %.6f, ", s.alpha(0)) + fmt("beta %.6f", s.beta(0)));
  }
  // 11
  {
    int stable = 0, better = 0;
    for (const auto& r : fleet) {
      if (r.norm_condition_met && oracle::spectral_norm_svd(r.model.W_h) < 1.0) ++stable;
      if (loss_accuracy(r.model, data.val, cfg.washout) < zero_val) ++better;
    }
    // BPTT against central differences on a 3-neuron net over 5 steps.
    std::mt19937_64 rng(1111);
    const RnnModel teacher = oracle::random_model(rng, 3, 2, 2);
    RnnModel m = oracle::random_model(rng, 3, 2, 2, 0.7);
    std::vector<Sequence> batch;
    for (int b = 0; b < 3; ++b) {
      Sequence seq{MatrixXd(5, 2), MatrixXd(5, 2)};
      VectorXd h = VectorXd::Zero(3);
      for (int t = 0; t < 5; ++t) {
        const VectorXd x = oracle::uniform_vector(rng, 2, -1, 1);
        const StepResult st = forward_step(teacher, h, x);
        h = st.h;
        seq.u.row(t) = x.transpose();
        seq.y.row(t) = st.y.transpose();
      }
      batch.push_back(std::move(seq));
    }
    RnnModel g = accuracy_gradient(m, batch, 1, nullptr);
    double worst = 0.0;
    auto check = [&](auto& P, const auto& G) {
      for (Index i = 0; i < P.size(); ++i) {
        const double keep = P(i);
        P(i) = keep + 1e-6;
        const double up = loss_accuracy(m, batch, 1);
        P(i) = keep - 1e-6;
        const double down = loss_accuracy(m, batch, 1);
        P(i) = keep;
        const double fd = (up - down) / 2e-6;
        worst = std::max(worst, std::abs(fd - G(i)) / std::max(1.0, std::abs(fd)));
      }
    };
    check(m.W_x, g.W_x);
    check(m.W_h, g.W_h);
    check(m.b, g.b);
    check(m.W_out, g.W_out);
    check(m.b_out, g.b_out);
    verdict(11, stable == kFleet && better == kFleet && worst <= 1e-5, "trainer stability",
            std::to_string(stable) + "/10 with ||W_h|| < 1, " + std::to_string(better) +
                "/10 below zero-predictor MSE " + fmt("%.3e, ", zero_val) +
                fmt("BPTT worst relative error %.2e", worst));
  }
  // 12
  {
    int decreasing = 0;
    for (const auto& row : table)
      if (row.front().global >= row.back().global) ++decreasing;
    verdict(12, decreasing * 10 >= kFleet * 8, "horizon plateau L(N=1) >= L(N=20)",
            std::to_string(decreasing) + "/10 nets");
  }
  // 5 goes last: it covers every certificate issued above.
  verdict(5, worst_residual <= 1e-6, "certificate residual",
          std::to_string(certificates) + fmt(" optimal certificates, max lambda_max(M+Q) %.2e", worst_residual));

  for (const auto& [id, line] : verdicts) std::printf("%s\n", line.c_str());
  std::printf("total %.0f s, %d failed\n", seconds_since(t_start), failures);
  return failures == 0 ? 0 : 1;
}
