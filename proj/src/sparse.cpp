#include "stinla/sparse.hpp"

#include <cmath>

namespace stinla {

SparseMatrix sparse_identity(int n, double scale) {
  SparseMatrix m(n, n);
  m.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int i = 0; i < n; ++i) m.insert(i, i) = scale;
  m.makeCompressed();
  return m;
}

SparseMatrix block_diagonal(std::span<const SparseMatrix> blocks) {
  int rows = 0;
  int cols = 0;
  long nnz = 0;
  for (const auto& b : blocks) {
    rows += static_cast<int>(b.rows());
    cols += static_cast<int>(b.cols());
    nnz += b.nonZeros();
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  int r0 = 0;
  int c0 = 0;
  for (const auto& b : blocks) {
    for (int k = 0; k < b.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(b, k); it; ++it) {
        triplets.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
      }
    }
    r0 += static_cast<int>(b.rows());
    c0 += static_cast<int>(b.cols());
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

SparseMatrix kronecker_product(const SparseMatrix& a, const SparseMatrix& b) {
  const long rows = a.rows() * b.rows();
  const long cols = a.cols() * b.cols();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka) {
    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia) {
      for (int kb = 0; kb < b.outerSize(); ++kb) {
        for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib) {
          triplets.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                                static_cast<int>(ia.col() * b.cols() + ib.col()),
                                ia.value() * ib.value());
        }
      }
    }
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

DenseMatrix kronecker_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

bool is_symmetric(const SparseMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const SparseMatrix t = m.transpose();
  const SparseMatrix diff = m - t;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      if (std::abs(it.value()) > tol) return false;
    }
  }
  return true;
}

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  if (!a.isCompressed() || !b.isCompressed()) return false;
  for (Eigen::Index k = 0; k <= a.outerSize(); ++k) {
    if (a.outerIndexPtr()[k] != b.outerIndexPtr()[k]) return false;
  }
  for (Eigen::Index p = 0; p < a.nonZeros(); ++p) {
    if (a.innerIndexPtr()[p] != b.innerIndexPtr()[p]) return false;
  }
  return true;
}

}  // namespace stinla
