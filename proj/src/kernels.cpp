#include "rnnlip/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rnnlip/errors.hpp"

namespace rnnlip::kernels {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int configure_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("RNNLIP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) omp_set_num_threads(std::min(cap, omp_get_num_procs()));
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

double block_sum(const MatrixXd& P, const MatrixXd& G, Index r0, Index r1, Index c0, Index c1) {
  double acc = 0.0;
  for (Index c = c0; c < c1; ++c)
    for (Index r = r0; r < r1; ++r) acc += P(r, c) * G(r, c);
  return acc;
}

void check_blocks(const MatrixXd& P, const MatrixXd& G, std::span<const Index> offsets) {
  require(!offsets.empty(), "block offsets must not be empty");
  require(P.rows() == P.cols() && G.rows() == P.rows() && G.cols() == P.cols(),
          "block_hadamard_sum: shape mismatch");
  require(offsets.back() == P.rows(), "block offsets do not cover the matrix");
}

}  // namespace

void block_hadamard_sum_serial(const MatrixXd& P, const MatrixXd& G,
                               std::span<const Index> offsets, MatrixXd& H) {
  check_blocks(P, G, offsets);
  const auto k = static_cast<Index>(offsets.size()) - 1;
  H.resize(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i <= j; ++i) {
      const double v = block_sum(P, G, offsets[i], offsets[i + 1], offsets[j], offsets[j + 1]);
      H(i, j) = v;
      H(j, i) = v;
    }
}

void block_hadamard_sum_parallel(const MatrixXd& P, const MatrixXd& G,
                                 std::span<const Index> offsets, MatrixXd& H) {
  check_blocks(P, G, offsets);
  const auto k = static_cast<Index>(offsets.size()) - 1;
  H.resize(k, k);
#pragma omp parallel for schedule(dynamic, 4)
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i <= j; ++i) {
      const double v = block_sum(P, G, offsets[i], offsets[i + 1], offsets[j], offsets[j + 1]);
      H(i, j) = v;
      H(j, i) = v;
    }
}

void block_hadamard_sum(const MatrixXd& P, const MatrixXd& G, std::span<const Index> offsets,
                        MatrixXd& H, Execution exec) {
  if (exec == Execution::parallel)
    block_hadamard_sum_parallel(P, G, offsets, H);
  else
    block_hadamard_sum_serial(P, G, offsets, H);
}

namespace {

double block_trace(const MatrixXd& U, const MatrixXd& KU, const MatrixXd& core, Index off) {
  const Index r = core.rows();
  const MatrixXd S = U.middleCols(off, r).transpose() * KU.middleCols(off, r);
  return (core.array() * S.transpose().array()).sum();
}

void check_traces(const MatrixXd& U, const MatrixXd& KU, std::span<const MatrixXd> cores,
                  std::span<const Index> offsets) {
  require(offsets.size() == cores.size() + 1, "block_traces: offsets/cores mismatch");
  require(U.rows() == KU.rows() && U.cols() == KU.cols(), "block_traces: shape mismatch");
  require(offsets.back() == U.cols(), "block offsets do not cover the factor");
}

}  // namespace

void block_traces_serial(const MatrixXd& U, const MatrixXd& KU, std::span<const MatrixXd> cores,
                         std::span<const Index> offsets, VectorXd& out) {
  check_traces(U, KU, cores, offsets);
  const auto k = static_cast<Index>(cores.size());
  out.resize(k);
  for (Index i = 0; i < k; ++i) out(i) = block_trace(U, KU, cores[i], offsets[i]);
}

void block_traces_parallel(const MatrixXd& U, const MatrixXd& KU,
                           std::span<const MatrixXd> cores, std::span<const Index> offsets,
                           VectorXd& out) {
  check_traces(U, KU, cores, offsets);
  const auto k = static_cast<Index>(cores.size());
  out.resize(k);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < k; ++i) out(i) = block_trace(U, KU, cores[i], offsets[i]);
}

void block_traces(const MatrixXd& U, const MatrixXd& KU, std::span<const MatrixXd> cores,
                  std::span<const Index> offsets, VectorXd& out, Execution exec) {
  if (exec == Execution::parallel)
    block_traces_parallel(U, KU, cores, offsets, out);
  else
    block_traces_serial(U, KU, cores, offsets, out);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

PairSearch search_chunk(const RnnModel& model, int horizon, double noise_std, std::uint64_t seed,
                        std::int64_t chunk, std::int64_t count) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(chunk)));
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_std);
  const Index dim = model.input() * horizon + model.hidden();

  PairSearch best;
  VectorXd u1(dim), u2(dim);
  for (std::int64_t s = 0; s < count; ++s) {
    for (Index i = 0; i < dim; ++i) u1(i) = uniform(rng);
    for (Index i = 0; i < dim; ++i) u2(i) = u1(i) + noise(rng);
    const double du = (u2 - u1).norm();
    ++best.evaluations;
    if (du == 0.0) continue;
    const double ratio = (final_output(model, u2, horizon) - final_output(model, u1, horizon)).norm() / du;
    if (best.base.size() == 0 || ratio > best.ratio) {
      best.ratio = ratio;
      best.base = u1;
      best.perturbed = u2;
    }
  }
  return best;
}

// Merge in chunk order so ties resolve identically for any schedule.
PairSearch merge(std::vector<PairSearch>& parts) {
  PairSearch best;
  for (auto& part : parts) {
    best.evaluations += part.evaluations;
    if (part.base.size() == 0) continue;
    if (best.base.size() == 0 || part.ratio > best.ratio) {
      best.ratio = part.ratio;
      best.base = std::move(part.base);
      best.perturbed = std::move(part.perturbed);
    }
  }
  return best;
}

std::int64_t chunk_count(std::int64_t samples) {
  return (samples + kExploreChunk - 1) / kExploreChunk;
}

std::int64_t chunk_size(std::int64_t samples, std::int64_t chunk) {
  return std::min(kExploreChunk, samples - chunk * kExploreChunk);
}

}  // namespace

PairSearch random_pairs_serial(const RnnModel& model, int horizon, double noise_std,
                               std::uint64_t seed, std::int64_t samples) {
  require(samples >= 1, "random_pairs: samples must be >= 1");
  const std::int64_t chunks = chunk_count(samples);
  std::vector<PairSearch> parts(static_cast<std::size_t>(chunks));
  for (std::int64_t c = 0; c < chunks; ++c)
    parts[c] = search_chunk(model, horizon, noise_std, seed, c, chunk_size(samples, c));
  return merge(parts);
}

PairSearch random_pairs_parallel(const RnnModel& model, int horizon, double noise_std,
                                 std::uint64_t seed, std::int64_t samples) {
  require(samples >= 1, "random_pairs: samples must be >= 1");
  const std::int64_t chunks = chunk_count(samples);
  std::vector<PairSearch> parts(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < chunks; ++c)
    parts[c] = search_chunk(model, horizon, noise_std, seed, c, chunk_size(samples, c));
  return merge(parts);
}

}  // namespace rnnlip::kernels
