#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stinla/sparse.hpp"

namespace stinla::gmrf {

// Undirected neighbour graph over sites numbered 1..num_sites.
class SiteGraph {
 public:
  using Edge = std::pair<int, int>;

  SiteGraph(int num_sites, std::vector<Edge> edges);

  int num_sites() const noexcept { return num_sites_; }
  // Edges as (i, j) with 1 <= i < j <= num_sites, sorted.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  // Zero-based adjacency lists.
  const std::vector<std::vector<int>>& neighbors() const noexcept { return neighbors_; }
  bool has_edge(int i, int j) const;

  // Zero-based component label per site; labels are 0..num_components()-1 in
  // order of first appearance.
  const std::vector<int>& component_of() const noexcept { return component_; }
  int num_components() const noexcept { return num_components_; }

  // Edge-list text format: "n <n_sites>" then one "i j" pair per line,
  // 1-based, '#' starts a comment.
  static SiteGraph read(std::istream& in);
  static SiteGraph read_file(const std::string& path);
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
  // 0/1 presence grid, one CSV row per site.
  void write_grid_csv(std::ostream& out) const;

 private:
  int num_sites_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> component_;
  int num_components_ = 0;
};

// Sparse symmetric positive semi-definite structure matrix together with its
// known rank deficiency and the linear constraints A x = 0 that remove the
// null space.
struct PrecisionStructure {
  SparseMatrix entries;
  int rank_deficiency = 0;
  DenseMatrix constraints;  // one row per constraint, dim() columns

  int dim() const noexcept { return static_cast<int>(entries.rows()); }
  int num_constraints() const noexcept { return static_cast<int>(constraints.rows()); }
};

// Degree on the diagonal, -1 for each neighbour pair. One sum-to-zero
// constraint per connected component.
PrecisionStructure build_icar_structure(const SiteGraph& graph);

PrecisionStructure build_iid_structure(int n);

// S'S where S is the (T-p+1) x T matrix summing p consecutive entries. The
// null space (periodic patterns with zero window sum) is removed by
// constraining the sums over seasonal phases 0..p-2 to zero.
PrecisionStructure build_seasonal_structure(int num_times, int period);

// D'D with D the order-th difference matrix; constraints remove the
// polynomial null space (sum, and for order 2 also the centred trend).
PrecisionStructure build_rw_structure(int num_times, int order);

// Standard Kronecker product. Constraints of the factors are not carried over;
// rank_deficiency is dim - rank(a) * rank(b).
PrecisionStructure kronecker(const PrecisionStructure& a, const PrecisionStructure& b);

inline constexpr int kNumericRankMaxDim = 4096;

// Number of eigenvalues above 1e-8 * max eigenvalue (dense eigensolve).
int numeric_rank(const SparseMatrix& m);
inline int numeric_rank(const PrecisionStructure& m) { return numeric_rank(m.entries); }

}  // namespace stinla::gmrf
