#pragma once

#include <memory>
#include <vector>

#include "stinla/gmrf.hpp"
#include "stinla/sparse.hpp"

namespace stinla::gmrf {

enum class Ordering { Amd, Natural };

// Fill-reducing permutation, elimination tree and the row pattern of the
// lower factor. Depends only on the sparsity pattern, so it can be shared by
// every numeric factorization of matrices with that pattern.
class SymbolicCholesky {
 public:
  static std::shared_ptr<const SymbolicCholesky> analyze(const SparseMatrix& m,
                                                         Ordering ordering = Ordering::Amd);

  int dim() const noexcept { return n_; }
  // permutation()[k] is the original index placed at position k.
  const std::vector<int>& permutation() const noexcept { return perm_; }
  const std::vector<int>& inverse_permutation() const noexcept { return iperm_; }
  long factor_nonzeros() const noexcept { return static_cast<long>(li_.size()); }
  bool matches(const SparseMatrix& m) const;

 private:
  friend class CholeskyFactor;
  friend class SelectedInverse;

  void reach(int k, std::vector<int>& flag, std::vector<int>& stack, int& top) const;
  long find(int row, int col) const;  // position of L(row, col), row >= col, or -1

  int n_ = 0;
  std::vector<int> perm_;
  std::vector<int> iperm_;
  std::vector<int> parent_;
  // Upper triangle of the permuted matrix and, for each stored entry of the
  // input, its slot there (-1 for strictly lower entries).
  std::vector<int> cp_;
  std::vector<int> ci_;
  std::vector<int> value_slot_;
  std::vector<int> input_outer_;
  std::vector<int> input_inner_;
  // Lower factor pattern, diagonal first in each column, rows ascending.
  std::vector<int> lp_;
  std::vector<int> li_;
};

class SelectedInverse;

// P (M + jitter I) P' = L L'.
class CholeskyFactor {
 public:
  CholeskyFactor(const SparseMatrix& m, double jitter,
                 std::shared_ptr<const SymbolicCholesky> symbolic = nullptr);

  int dim() const noexcept { return symbolic_->dim(); }
  const std::vector<int>& permutation() const noexcept { return symbolic_->permutation(); }
  const std::shared_ptr<const SymbolicCholesky>& symbolic() const noexcept { return symbolic_; }
  // L in permuted numbering.
  SparseMatrix lower_factor() const;
  double log_det() const noexcept { return log_det_; }

  Vector solve(const Vector& rhs) const;
  DenseMatrix solve(const DenseMatrix& rhs) const;
  // P' L^{-T} z: maps standard normal draws to draws with precision M.
  Vector correlate(const Vector& z) const;

  SelectedInverse selected_inverse() const;

 private:
  friend class SelectedInverse;

  void forward(Vector& y) const;
  void backward(Vector& y) const;

  std::shared_ptr<const SymbolicCholesky> symbolic_;
  std::vector<double> lx_;
  double log_det_ = 0.0;
};

inline CholeskyFactor cholesky(const SparseMatrix& m, double jitter = 0.0) {
  return CholeskyFactor(m, jitter);
}
inline CholeskyFactor cholesky(const PrecisionStructure& m, double jitter = 0.0) {
  return CholeskyFactor(m.entries, jitter);
}

// Entries of the inverse on the pattern of L + L' (Takahashi recursions).
class SelectedInverse {
 public:
  explicit SelectedInverse(const CholeskyFactor& factor);

  bool contains(int i, int j) const;
  // Inverse entry (i, j) in original numbering; throws if outside the pattern.
  double operator()(int i, int j) const;
  Vector diagonal() const;

 private:
  std::shared_ptr<const SymbolicCholesky> symbolic_;
  std::vector<double> zx_;
};

}  // namespace stinla::gmrf
