#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace stinla {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

SparseMatrix sparse_identity(int n, double scale = 1.0);

SparseMatrix block_diagonal(std::span<const SparseMatrix> blocks);

SparseMatrix kronecker_product(const SparseMatrix& a, const SparseMatrix& b);

// Dense k x (rows_a * rows_b) Kronecker product of row blocks.
DenseMatrix kronecker_product(const DenseMatrix& a, const DenseMatrix& b);

bool is_symmetric(const SparseMatrix& m, double tol = 0.0);

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace stinla
