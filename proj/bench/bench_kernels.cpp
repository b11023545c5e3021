// Serial reference versus OpenMP kernels: wall time and bitwise agreement.
// Usage: bench_kernels [--quick]
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "rnnlip/kernels.hpp"

using namespace rnnlip;
using namespace rnnlip::kernels;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

MatrixXd gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd M(r, c);
  for (Index i = 0; i < M.size(); ++i) M(i) = g(rng);
  return M;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int threads = configure_threads();
  const int reps = quick ? 1 : 3;
  std::printf("threads %d%s\n", threads, quick ? " (quick)" : "");
  std::mt19937_64 rng(1);
  bool all_same = true;

  {
    // Schur complement assembly at the size of a horizon-20 certificate (nN = 160 blocks of 2).
    const Index blocks = quick ? 40 : 160, width = 2, d = blocks * width;
    MatrixXd P = gaussian(rng, d, d), G = gaussian(rng, d, d);
    P = (P + P.transpose()).eval();
    G = (G + G.transpose()).eval();
    std::vector<Index> offsets;
    for (Index i = 0; i <= blocks; ++i) offsets.push_back(i * width);
    MatrixXd Hs, Hp;
    const double ts = best_of(reps, [&] { block_hadamard_sum_serial(P, G, offsets, Hs); });
    const double tp = best_of(reps, [&] { block_hadamard_sum_parallel(P, G, offsets, Hp); });
    all_same &= Hs == Hp;
    row("block_hadamard_sum", ts, tp, Hs == Hp);
  }
  {
    const Index blocks = quick ? 40 : 160, width = 2, rows = quick ? 120 : 420;
    const MatrixXd U = gaussian(rng, rows, blocks * width);
    const MatrixXd KU = gaussian(rng, rows, rows) * U;
    std::vector<MatrixXd> cores(static_cast<std::size_t>(blocks), gaussian(rng, width, width));
    std::vector<Index> offsets;
    for (Index i = 0; i <= blocks; ++i) offsets.push_back(i * width);
    VectorXd s, p;
    const double ts = best_of(reps * 20, [&] { block_traces_serial(U, KU, cores, offsets, s); });
    const double tp = best_of(reps * 20, [&] { block_traces_parallel(U, KU, cores, offsets, p); });
    all_same &= s == p;
    row("block_traces", ts, tp, s == p);
  }
  {
    RnnModel m = RnnModel::zeros(8, 3, 3);
    for (MatrixXd* W : {&m.W_x, &m.W_h, &m.W_out}) *W = 0.4 * gaussian(rng, W->rows(), W->cols());
    const std::int64_t samples = quick ? 5000 : 100000;
    PairSearch s, p;
    const double ts = best_of(reps, [&] { s = random_pairs_serial(m, 20, 0.0316, 7, samples); });
    const double tp = best_of(reps, [&] { p = random_pairs_parallel(m, 20, 0.0316, 7, samples); });
    const bool same = s.ratio == p.ratio && s.base == p.base && s.perturbed == p.perturbed;
    all_same &= same;
    row("random_pairs (N=20)", ts, tp, same);
  }
  return all_same ? 0 : 1;
}
