#pragma once

// One-shot distributed PCA. Each worker factors its local data once, ships
// the scaled basis (first dhat0 columns of U_n Lambda_n), and the server
// merges the concatenation with a second SVD. When dhat0 covers the global
// rank the merged basis spans exactly the centralized top subspace, because
// [C_1 ... C_N][C_1 ... C_N]^T = A A^T.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace pcawfl::dpca {

struct WorkerShard {
  Eigen::MatrixXd samples;  // d0 rows, one column per sample
  std::vector<int> labels;  // class per column, may be empty for unlabeled data
  int worker_id = 0;
};

struct LocalFactor {
  Eigen::MatrixXd scaled_basis;  // d0 x dhat0, first columns of U_n Lambda_n
  int worker_id = 0;
};

struct GlobalBasis {
  Eigen::MatrixXd basis;  // d0 x dhat0, orthonormal columns
};

namespace detail {

// Columns whose singular value sits at numerical-noise level are zeroed, so
// rank-deficient shards yield exact zero padding instead of garbage vectors.
inline void zero_negligible_columns(Eigen::MatrixXd& scaled,
                                    const Eigen::VectorXd& sv) {
  if (sv.size() == 0) return;
  const double cutoff = sv(0) * std::max(scaled.rows(), scaled.cols()) *
                        std::numeric_limits<double>::epsilon();
  for (Eigen::Index j = 0; j < scaled.cols() && j < sv.size(); ++j) {
    if (sv(j) <= cutoff) scaled.col(j).setZero();
  }
}

}  // namespace detail

inline LocalFactor local_factor(const WorkerShard& shard, int dhat0) {
  const Eigen::Index d0 = shard.samples.rows();
  const Eigen::Index m = shard.samples.cols();
  if (d0 == 0 || m == 0) throw std::invalid_argument("local_factor: empty shard");
  if (dhat0 < 1 || dhat0 > d0)
    throw std::invalid_argument("local_factor: dhat0 must be in [1, d0]");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(shard.samples, Eigen::ComputeThinU);
  const Eigen::Index have = svd.singularValues().size();
  const Eigen::Index keep = std::min<Eigen::Index>(dhat0, have);

  Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(d0, dhat0);
  scaled.leftCols(keep) = svd.matrixU().leftCols(keep) *
                          svd.singularValues().head(keep).asDiagonal();
  detail::zero_negligible_columns(scaled, svd.singularValues());
  return {std::move(scaled), shard.worker_id};
}

inline GlobalBasis merge_factors(const std::vector<LocalFactor>& factors) {
  if (factors.empty()) throw std::invalid_argument("merge_factors: no factors");
  const Eigen::Index d0 = factors.front().scaled_basis.rows();
  const Eigen::Index dhat0 = factors.front().scaled_basis.cols();
  for (const auto& f : factors) {
    if (f.scaled_basis.rows() != d0 || f.scaled_basis.cols() != dhat0)
      throw std::invalid_argument("merge_factors: factor shape mismatch");
  }
  if (dhat0 > d0)
    throw std::invalid_argument("merge_factors: dhat0 exceeds d0");

  std::vector<const LocalFactor*> ordered;
  ordered.reserve(factors.size());
  for (const auto& f : factors) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const LocalFactor* a, const LocalFactor* b) {
                     return a->worker_id < b->worker_id;
                   });

  Eigen::MatrixXd collected(d0, dhat0 * static_cast<Eigen::Index>(ordered.size()));
  for (std::size_t i = 0; i < ordered.size(); ++i)
    collected.middleCols(static_cast<Eigen::Index>(i) * dhat0, dhat0) =
        ordered[i]->scaled_basis;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(collected, Eigen::ComputeThinU);
  Eigen::MatrixXd basis = svd.matrixU().leftCols(dhat0);

  // Deterministic sign: make the largest-magnitude entry of each column
  // positive, first index winning ties.
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = 0.0;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      const double mag = std::abs(basis(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (basis(arg, j) < 0.0) basis.col(j) = -basis.col(j);
  }
  return {std::move(basis)};
}

inline WorkerShard project(const GlobalBasis& basis, const WorkerShard& shard) {
  if (basis.basis.rows() != shard.samples.rows())
    throw std::invalid_argument("project: basis/shard dimension mismatch");
  WorkerShard out;
  out.samples = basis.basis.transpose() * shard.samples;
  out.labels = shard.labels;
  out.worker_id = shard.worker_id;
  return out;
}

// Fraction of uplink payload removed by projecting d0-dim gradients down to
// dhat0 dimensions.
inline double comm_saving(int d0, int dhat0) {
  if (d0 < 1 || dhat0 < 1 || dhat0 > d0)
    throw std::invalid_argument("comm_saving: need 1 <= dhat0 <= d0");
  return 1.0 - static_cast<double>(dhat0) / static_cast<double>(d0);
}

}  // namespace pcawfl::dpca
