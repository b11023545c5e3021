#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "rnnlip/model.hpp"

// Data-parallel inner loops. Every kernel has a serial reference and an OpenMP
// version that must agree bit-for-bit; the tests and bench/ compare the two.
namespace rnnlip::kernels {

enum class Execution { serial, parallel };

// Worker cap from RNNLIP_THREADS (0 or unset: OpenMP default). Returns the
// number of threads parallel kernels will use.
int configure_threads();
int max_threads();

// H(i, j) = sum_{b in block i, c in block j} P(b, c) * G(b, c), with block i
// spanning rows/cols [offsets[i], offsets[i+1]). Assembles the Schur complement
// of the interior-point solver from the congruence-transformed Gram matrices.
// P and G must be symmetric; only blocks with i <= j are summed.
void block_hadamard_sum_serial(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                               std::span<const Eigen::Index> offsets, Eigen::MatrixXd& H);
void block_hadamard_sum_parallel(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                                 std::span<const Eigen::Index> offsets, Eigen::MatrixXd& H);
void block_hadamard_sum(const Eigen::MatrixXd& P, const Eigen::MatrixXd& G,
                        std::span<const Eigen::Index> offsets, Eigen::MatrixXd& H,
                        Execution exec);

// out(i) = trace(D_i * U_i^T * KU_i), where U_i and KU_i are the column blocks
// [offsets[i], offsets[i+1]) of U and K*U. Applies the constraint operator
// tr(U_i D_i U_i^T K) to a matrix K without forming U^T K U.
void block_traces_serial(const Eigen::MatrixXd& U, const Eigen::MatrixXd& KU,
                         std::span<const Eigen::MatrixXd> cores,
                         std::span<const Eigen::Index> offsets, Eigen::VectorXd& out);
void block_traces_parallel(const Eigen::MatrixXd& U, const Eigen::MatrixXd& KU,
                           std::span<const Eigen::MatrixXd> cores,
                           std::span<const Eigen::Index> offsets, Eigen::VectorXd& out);
void block_traces(const Eigen::MatrixXd& U, const Eigen::MatrixXd& KU,
                  std::span<const Eigen::MatrixXd> cores, std::span<const Eigen::Index> offsets,
                  Eigen::VectorXd& out, Execution exec);

// Best empirical ratio ||y_N(u2) - y_N(u1)|| / ||u2 - u1|| over `samples` random
// pairs: base u1 uniform on [-1, 1], u2 = u1 + N(0, noise_std^2) noise. Samples
// are drawn in fixed-size chunks whose RNG seeds derive from (seed, chunk), so
// the result does not depend on the thread count.
struct PairSearch {
  double ratio = 0.0;
  Eigen::VectorXd base;
  Eigen::VectorXd perturbed;
  std::int64_t evaluations = 0;
};

inline constexpr std::int64_t kExploreChunk = 1024;

PairSearch random_pairs_serial(const RnnModel& model, int horizon, double noise_std,
                               std::uint64_t seed, std::int64_t samples);
PairSearch random_pairs_parallel(const RnnModel& model, int horizon, double noise_std,
                                 std::uint64_t seed, std::int64_t samples);

// splitmix64 finalizer applied to (seed, stream); used to derive per-worker seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace rnnlip::kernels
