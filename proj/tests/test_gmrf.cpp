#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "stinla/error.hpp"
#include "stinla/gmrf.hpp"

using namespace stinla;
using gmrf::SiteGraph;

namespace {

DenseMatrix dense(const SparseMatrix& m) { return DenseMatrix(m); }

// Sliding-window sum matrix built entry by entry.
DenseMatrix window_matrix(int t, int p) {
  DenseMatrix s = DenseMatrix::Zero(t - p + 1, t);
  for (int r = 0; r < t - p + 1; ++r) {
    for (int j = 0; j < p; ++j) s(r, r + j) = 1.0;
  }
  return s;
}

DenseMatrix difference_matrix(int t, int order) {
  DenseMatrix d = DenseMatrix::Identity(t, t);
  for (int k = 0; k < order; ++k) {
    DenseMatrix next = DenseMatrix::Zero(d.rows() - 1, t);
    for (int r = 0; r + 1 < d.rows(); ++r) next.row(r) = d.row(r + 1) - d.row(r);
    d = next;
  }
  return d;
}

int dense_rank(const DenseMatrix& m) {
  Eigen::FullPivLU<DenseMatrix> lu(m);
  lu.setThreshold(1e-9);
  return static_cast<int>(lu.rank());
}

}  // namespace

TEST_CASE("site graph normalises and validates edges") {
  SiteGraph g(4, {{2, 1}, {3, 4}, {2, 3}});
  CHECK(g.edges() == std::vector<SiteGraph::Edge>{{1, 2}, {2, 3}, {3, 4}});
  CHECK(g.has_edge(3, 2));
  CHECK_FALSE(g.has_edge(1, 4));
  CHECK(g.num_components() == 1);

  CHECK_THROWS_AS(SiteGraph(3, {{1, 1}}), Error);
  CHECK_THROWS_AS(SiteGraph(3, {{1, 4}}), Error);
  CHECK_THROWS_AS(SiteGraph(3, {{1, 2}, {2, 1}}), Error);
  CHECK_THROWS_AS(SiteGraph(0, {}), Error);

  SiteGraph split(5, {{1, 2}, {4, 5}});
  CHECK(split.num_components() == 3);
  CHECK(split.component_of() == std::vector<int>{0, 0, 1, 2, 2});
}

TEST_CASE("edge list round trip and parse errors") {
  SiteGraph g(5, {{1, 2}, {2, 3}, {1, 5}});
  std::stringstream buf;
  g.write(buf);
  const SiteGraph back = SiteGraph::read(buf);
  CHECK(back.num_sites() == 5);
  CHECK(back.edges() == g.edges());

  std::istringstream commented("# roads\nn 3\n1 2 # main street\n\n2 3\n");
  CHECK(SiteGraph::read(commented).edges().size() == 2);

  std::istringstream bad("n 3\n1 x\n");
  try {
    SiteGraph::read(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream no_header("1 2\n");
  CHECK_THROWS_AS(SiteGraph::read(no_header), ParseError);

  std::ostringstream grid;
  SiteGraph(3, {{1, 3}}).write_grid_csv(grid);
  CHECK(grid.str() == "0,0,1\n0,0,0\n1,0,0\n");
}

TEST_CASE("ICAR structure is degree minus adjacency") {
  // 1-2-3 path plus the chord 1-3 and an isolated pair 4-5.
  SiteGraph g(5, {{1, 2}, {2, 3}, {1, 3}, {4, 5}});
  const auto s = gmrf::build_icar_structure(g);
  DenseMatrix expected = DenseMatrix::Zero(5, 5);
  for (const auto& [i, j] : g.edges()) {
    expected(i - 1, j - 1) = expected(j - 1, i - 1) = -1.0;
    expected(i - 1, i - 1) += 1.0;
    expected(j - 1, j - 1) += 1.0;
  }
  CHECK((dense(s.entries) - expected).norm() == 0.0);
  CHECK(s.rank_deficiency == 2);
  REQUIRE(s.num_constraints() == 2);
  CHECK((s.constraints * dense(s.entries)).norm() == doctest::Approx(0.0));
  CHECK(gmrf::numeric_rank(s) == 3);
}

TEST_CASE("seasonal structure matches the window-sum construction") {
  for (int p : {2, 3, 12}) {
    for (int t : {p, p + 1, 3 * p + 2}) {
      const auto s = gmrf::build_seasonal_structure(t, p);
      const DenseMatrix w = window_matrix(t, p);
      CHECK((dense(s.entries) - w.transpose() * w).norm() < 1e-12);
      CHECK(s.rank_deficiency == p - 1);
      CHECK(s.num_constraints() == p - 1);
      CHECK(dense_rank(dense(s.entries)) == t - (p - 1));
      // The constraints leave no null direction: R + A'A is full rank.
      const DenseMatrix full = dense(s.entries) + s.constraints.transpose() * s.constraints;
      CHECK(dense_rank(full) == t);
    }
  }
  // A periodic zero-sum pattern lies in the null space.
  const auto s = gmrf::build_seasonal_structure(12, 3);
  Vector v(12);
  for (int i = 0; i < 12; ++i) v[i] = std::array<double, 3>{1.0, -3.0, 2.0}[i % 3];
  CHECK((s.entries * v).norm() < 1e-12);
  CHECK_THROWS_AS(gmrf::build_seasonal_structure(2, 3), Error);
  CHECK_THROWS_AS(gmrf::build_seasonal_structure(10, 1), Error);
}

TEST_CASE("random-walk structures are D'D") {
  for (int order : {1, 2}) {
    for (int t : {order + 1, 6, 10}) {
      const auto s = gmrf::build_rw_structure(t, order);
      const DenseMatrix d = difference_matrix(t, order);
      CHECK((dense(s.entries) - d.transpose() * d).norm() < 1e-12);
      CHECK(s.rank_deficiency == order);
      CHECK(gmrf::numeric_rank(s) == t - order);
      CHECK((s.constraints * dense(s.entries)).norm() < 1e-12);
    }
  }
}

TEST_CASE("kronecker product agrees with the dense definition") {
  SiteGraph g(3, {{1, 2}, {2, 3}});
  const auto a = gmrf::build_rw_structure(4, 1);
  const auto b = gmrf::build_icar_structure(g);
  const auto k = gmrf::kronecker(a, b);
  const DenseMatrix da = dense(a.entries);
  const DenseMatrix db = dense(b.entries);
  DenseMatrix expected(12, 12);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) expected.block(3 * i, 3 * j, 3, 3) = da(i, j) * db;
  }
  CHECK((dense(k.entries) - expected).norm() < 1e-12);
  CHECK(k.rank_deficiency == 12 - 3 * 2);
  CHECK(k.num_constraints() == 0);
  CHECK(is_symmetric(k.entries));
}

TEST_CASE("Type I interaction structure is the identity") {
  const auto k = gmrf::kronecker(gmrf::build_iid_structure(5), gmrf::build_iid_structure(7));
  CHECK((dense(k.entries) - DenseMatrix::Identity(35, 35)).norm() == 0.0);
  CHECK(k.rank_deficiency == 0);
}

TEST_CASE("numeric rank guard") {
  CHECK(gmrf::numeric_rank(sparse_identity(3)) == 3);
  CHECK(gmrf::numeric_rank(SparseMatrix(4, 4)) == 0);
  CHECK_THROWS_AS(gmrf::numeric_rank(sparse_identity(gmrf::kNumericRankMaxDim + 1)), Error);
}

TEST_CASE("sparse helpers") {
  const SparseMatrix a = sparse_identity(2, 3.0);
  const SparseMatrix b = gmrf::build_rw_structure(3, 1).entries;
  const std::vector<SparseMatrix> blocks{a, b};
  const DenseMatrix bd = dense(block_diagonal(blocks));
  CHECK(bd.rows() == 5);
  CHECK(bd.topLeftCorner(2, 2).isApprox(DenseMatrix::Identity(2, 2) * 3.0));
  CHECK(bd.bottomRightCorner(3, 3).isApprox(dense(b)));
  CHECK(bd.topRightCorner(2, 3).norm() == 0.0);
  CHECK(same_pattern(b, SparseMatrix(2.0 * b)));
  CHECK_FALSE(same_pattern(b, sparse_identity(3)));
  SparseMatrix asym(2, 2);
  asym.insert(0, 1) = 1.0;
  CHECK_FALSE(is_symmetric(asym));
}
