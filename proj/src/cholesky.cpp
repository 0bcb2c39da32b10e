#include "stinla/cholesky.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/OrderingMethods>

#include "stinla/error.hpp"

namespace stinla::gmrf {

std::shared_ptr<const SymbolicCholesky> SymbolicCholesky::analyze(const SparseMatrix& m,
                                                                  Ordering ordering) {
  require(m.rows() == m.cols(), ErrorCode::InvalidInput, "cholesky needs a square matrix");
  require(m.isCompressed(), ErrorCode::InvalidInput, "cholesky needs a compressed matrix");
  auto s = std::make_shared<SymbolicCholesky>();
  const int n = static_cast<int>(m.rows());
  s->n_ = n;

  s->perm_.resize(static_cast<std::size_t>(n));
  if (ordering == Ordering::Amd && n > 1) {
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    amd(m, pinv);
    for (int k = 0; k < n; ++k) s->perm_[k] = pinv.indices()[k];
  } else {
    for (int k = 0; k < n; ++k) s->perm_[k] = k;
  }
  s->iperm_.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) s->iperm_[s->perm_[k]] = k;

  const int* outer = m.outerIndexPtr();
  const int* inner = m.innerIndexPtr();
  const long nnz = m.nonZeros();
  s->input_outer_.assign(outer, outer + n + 1);
  s->input_inner_.assign(inner, inner + nnz);

  // Upper triangle of P M P'.
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int a = s->iperm_[inner[p]];
      const int b = s->iperm_[j];
      if (a <= b) ++count[b];
    }
  }
  s->cp_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int k = 0; k < n; ++k) s->cp_[k + 1] = s->cp_[k] + count[k];
  s->ci_.resize(static_cast<std::size_t>(s->cp_[n]));
  s->value_slot_.assign(static_cast<std::size_t>(nnz), -1);
  std::vector<int> next(s->cp_.begin(), s->cp_.end() - 1);
  for (int j = 0; j < n; ++j) {
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int a = s->iperm_[inner[p]];
      const int b = s->iperm_[j];
      if (a <= b) {
        s->ci_[next[b]] = a;
        s->value_slot_[p] = next[b]++;
      }
    }
  }

  // Elimination tree.
  s->parent_.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> ancestor(static_cast<std::size_t>(n), -1);
  for (int k = 0; k < n; ++k) {
    for (int p = s->cp_[k]; p < s->cp_[k + 1]; ++p) {
      int i = s->ci_[p];
      while (i != -1 && i < k) {
        const int inext = ancestor[i];
        ancestor[i] = k;
        if (inext == -1) s->parent_[i] = k;
        i = inext;
      }
    }
  }

  // Row patterns give the column counts and then the row indices of L.
  std::vector<int> flag(static_cast<std::size_t>(n), -1);
  std::vector<int> stack(static_cast<std::size_t>(n));
  std::vector<int> colcount(static_cast<std::size_t>(n), 1);
  for (int k = 0; k < n; ++k) {
    int top = 0;
    s->reach(k, flag, stack, top);
    for (int t = top; t < n; ++t) ++colcount[stack[t]];
  }
  s->lp_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int k = 0; k < n; ++k) s->lp_[k + 1] = s->lp_[k] + colcount[k];
  s->li_.resize(static_cast<std::size_t>(s->lp_[n]));
  std::fill(flag.begin(), flag.end(), -1);
  std::vector<int> fill(s->lp_.begin(), s->lp_.end() - 1);
  for (int k = 0; k < n; ++k) {
    int top = 0;
    s->reach(k, flag, stack, top);
    for (int t = top; t < n; ++t) s->li_[fill[stack[t]]++] = k;
    s->li_[fill[k]++] = k;
  }
  return s;
}

void SymbolicCholesky::reach(int k, std::vector<int>& flag, std::vector<int>& stack,
                             int& top) const {
  thread_local std::vector<int> path;
  path.resize(static_cast<std::size_t>(n_));
  top = n_;
  flag[k] = k;
  for (int p = cp_[k]; p < cp_[k + 1]; ++p) {
    int i = ci_[p];
    if (i > k) continue;
    int len = 0;
    for (; flag[i] != k; i = parent_[i]) {
      path[len++] = i;
      flag[i] = k;
    }
    while (len > 0) stack[--top] = path[--len];
  }
}

long SymbolicCholesky::find(int row, int col) const {
  const auto first = li_.begin() + lp_[col];
  const auto last = li_.begin() + lp_[col + 1];
  const auto it = std::lower_bound(first, last, row);
  if (it == last || *it != row) return -1;
  return static_cast<long>(it - li_.begin());
}

bool SymbolicCholesky::matches(const SparseMatrix& m) const {
  if (m.rows() != n_ || m.cols() != n_ || !m.isCompressed()) return false;
  if (static_cast<std::size_t>(m.nonZeros()) != input_inner_.size()) return false;
  return std::equal(input_outer_.begin(), input_outer_.end(), m.outerIndexPtr()) &&
         std::equal(input_inner_.begin(), input_inner_.end(), m.innerIndexPtr());
}

CholeskyFactor::CholeskyFactor(const SparseMatrix& m, double jitter,
                               std::shared_ptr<const SymbolicCholesky> symbolic) {
  SparseMatrix compressed;
  const SparseMatrix* input = &m;
  if (!m.isCompressed()) {
    compressed = m;
    compressed.makeCompressed();
    input = &compressed;
  }
  if (!symbolic || !symbolic->matches(*input)) symbolic = SymbolicCholesky::analyze(*input);
  symbolic_ = std::move(symbolic);
  const SymbolicCholesky& s = *symbolic_;
  const int n = s.n_;

  std::vector<double> cx(s.ci_.size(), 0.0);
  const double* values = input->valuePtr();
  for (std::size_t p = 0; p < s.value_slot_.size(); ++p) {
    if (s.value_slot_[p] >= 0) cx[s.value_slot_[p]] += values[p];
  }

  lx_.assign(s.li_.size(), 0.0);
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  std::vector<int> next(s.lp_.begin(), s.lp_.end() - 1);
  std::vector<int> flag(static_cast<std::size_t>(n), -1);
  std::vector<int> stack(static_cast<std::size_t>(n));
  log_det_ = 0.0;
  for (int k = 0; k < n; ++k) {
    int top = 0;
    s.reach(k, flag, stack, top);
    for (int p = s.cp_[k]; p < s.cp_[k + 1]; ++p) x[s.ci_[p]] += cx[p];
    double d = x[k] + jitter;
    x[k] = 0.0;
    for (int t = top; t < n; ++t) {
      const int i = stack[t];
      const double lki = x[i] / lx_[s.lp_[i]];
      x[i] = 0.0;
      for (int q = s.lp_[i] + 1; q < next[i]; ++q) x[s.li_[q]] -= lx_[q] * lki;
      d -= lki * lki;
      lx_[next[i]++] = lki;
    }
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(s.perm_[k], d);
    const double lkk = std::sqrt(d);
    lx_[next[k]++] = lkk;
    log_det_ += 2.0 * std::log(lkk);
  }
}

SparseMatrix CholeskyFactor::lower_factor() const {
  const SymbolicCholesky& s = *symbolic_;
  std::vector<Triplet> triplets;
  triplets.reserve(lx_.size());
  for (int j = 0; j < s.n_; ++j) {
    for (int p = s.lp_[j]; p < s.lp_[j + 1]; ++p) triplets.emplace_back(s.li_[p], j, lx_[p]);
  }
  SparseMatrix l(s.n_, s.n_);
  l.setFromTriplets(triplets.begin(), triplets.end());
  return l;
}

void CholeskyFactor::forward(Vector& y) const {
  const SymbolicCholesky& s = *symbolic_;
  for (int j = 0; j < s.n_; ++j) {
    y[j] /= lx_[s.lp_[j]];
    const double yj = y[j];
    for (int p = s.lp_[j] + 1; p < s.lp_[j + 1]; ++p) y[s.li_[p]] -= lx_[p] * yj;
  }
}

void CholeskyFactor::backward(Vector& y) const {
  const SymbolicCholesky& s = *symbolic_;
  for (int j = s.n_ - 1; j >= 0; --j) {
    double v = y[j];
    for (int p = s.lp_[j] + 1; p < s.lp_[j + 1]; ++p) v -= lx_[p] * y[s.li_[p]];
    y[j] = v / lx_[s.lp_[j]];
  }
}

Vector CholeskyFactor::solve(const Vector& rhs) const {
  const SymbolicCholesky& s = *symbolic_;
  require(rhs.size() == s.n_, ErrorCode::InvalidInput,
          "solve: right-hand side has length " + std::to_string(rhs.size()) + ", expected " +
              std::to_string(s.n_));
  Vector y(s.n_);
  for (int k = 0; k < s.n_; ++k) y[k] = rhs[s.perm_[k]];
  forward(y);
  backward(y);
  Vector x(s.n_);
  for (int k = 0; k < s.n_; ++k) x[s.perm_[k]] = y[k];
  return x;
}

DenseMatrix CholeskyFactor::solve(const DenseMatrix& rhs) const {
  require(rhs.rows() == dim(), ErrorCode::InvalidInput, "solve: row count mismatch");
  DenseMatrix out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Vector(rhs.col(c)));
  return out;
}

Vector CholeskyFactor::correlate(const Vector& z) const {
  const SymbolicCholesky& s = *symbolic_;
  require(z.size() == s.n_, ErrorCode::InvalidInput, "correlate: length mismatch");
  Vector y = z;
  backward(y);
  Vector x(s.n_);
  for (int k = 0; k < s.n_; ++k) x[s.perm_[k]] = y[k];
  return x;
}

SelectedInverse CholeskyFactor::selected_inverse() const { return SelectedInverse(*this); }

SelectedInverse::SelectedInverse(const CholeskyFactor& factor) : symbolic_(factor.symbolic_) {
  const SymbolicCholesky& s = *symbolic_;
  const std::vector<double>& lx = factor.lx_;
  zx_.assign(lx.size(), 0.0);
  for (int j = s.n_ - 1; j >= 0; --j) {
    const int p0 = s.lp_[j];
    const int p1 = s.lp_[j + 1];
    const double ljj = lx[p0];
    // Off-diagonal entries of column j only need entries in later columns.
    for (int q = p0 + 1; q < p1; ++q) {
      const int i = s.li_[q];
      double acc = 0.0;
      for (int p = p0 + 1; p < p1; ++p) {
        const int k = s.li_[p];
        const long pos = k >= i ? s.find(k, i) : s.find(i, k);
        acc += lx[p] * zx_[pos];
      }
      zx_[q] = -acc / ljj;
    }
    double acc = 0.0;
    for (int p = p0 + 1; p < p1; ++p) acc += lx[p] * zx_[p];
    zx_[p0] = 1.0 / (ljj * ljj) - acc / ljj;
  }
}

bool SelectedInverse::contains(int i, int j) const {
  const SymbolicCholesky& s = *symbolic_;
  if (i < 0 || j < 0 || i >= s.n_ || j >= s.n_) return false;
  const int a = s.iperm_[i];
  const int b = s.iperm_[j];
  return (a >= b ? s.find(a, b) : s.find(b, a)) >= 0;
}

double SelectedInverse::operator()(int i, int j) const {
  const SymbolicCholesky& s = *symbolic_;
  require(i >= 0 && j >= 0 && i < s.n_ && j < s.n_, ErrorCode::InvalidInput,
          "selected inverse index out of range");
  const int a = s.iperm_[i];
  const int b = s.iperm_[j];
  const long pos = a >= b ? s.find(a, b) : s.find(b, a);
  require(pos >= 0, ErrorCode::InvalidInput,
          "inverse entry (" + std::to_string(i) + ", " + std::to_string(j) +
              ") lies outside the factor pattern");
  return zx_[pos];
}

Vector SelectedInverse::diagonal() const {
  const SymbolicCholesky& s = *symbolic_;
  Vector d(s.n_);
  for (int i = 0; i < s.n_; ++i) d[i] = zx_[s.lp_[s.iperm_[i]]];
  return d;
}

}  // namespace stinla::gmrf
