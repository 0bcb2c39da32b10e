#include "stinla/gmrf.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stinla/error.hpp"

namespace stinla::gmrf {

SiteGraph::SiteGraph(int num_sites, std::vector<Edge> edges) : num_sites_(num_sites) {
  require(num_sites > 0, ErrorCode::InvalidInput, "graph must have at least one site");
  for (auto& [i, j] : edges) {
    require(i >= 1 && i <= num_sites && j >= 1 && j <= num_sites, ErrorCode::InvalidInput,
            "edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range 1.." +
                std::to_string(num_sites));
    require(i != j, ErrorCode::InvalidInput, "self-loop at site " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  const auto dup = std::adjacent_find(edges.begin(), edges.end());
  require(dup == edges.end(), ErrorCode::InvalidInput,
          dup == edges.end() ? std::string()
                             : "duplicate edge (" + std::to_string(dup->first) + ", " +
                                   std::to_string(dup->second) + ")");
  edges_ = std::move(edges);

  neighbors_.assign(static_cast<std::size_t>(num_sites), {});
  for (const auto& [i, j] : edges_) {
    neighbors_[i - 1].push_back(j - 1);
    neighbors_[j - 1].push_back(i - 1);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  component_.assign(static_cast<std::size_t>(num_sites), -1);
  std::vector<int> stack;
  for (int s = 0; s < num_sites; ++s) {
    if (component_[s] >= 0) continue;
    component_[s] = num_components_;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : neighbors_[u]) {
        if (component_[v] < 0) {
          component_[v] = num_components_;
          stack.push_back(v);
        }
      }
    }
    ++num_components_;
  }
}

bool SiteGraph::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

SiteGraph SiteGraph::read(std::istream& in) {
  std::string line;
  long line_no = 0;
  int n = -1;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    if (n < 0) {
      if (first != "n" || !(ss >> n) || n <= 0) {
        throw ParseError("expected header 'n <n_sites>'", line_no);
      }
    } else {
      int i = 0;
      int j = 0;
      try {
        std::size_t used = 0;
        i = std::stoi(first, &used);
        if (used != first.size()) throw std::invalid_argument(first);
      } catch (const std::exception&) {
        throw ParseError("expected an integer site id, got '" + first + "'", line_no);
      }
      if (!(ss >> j)) throw ParseError("expected 'i j' edge pair", line_no);
      std::string extra;
      if (ss >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line_no);
      edges.emplace_back(i, j);
    }
  }
  if (n < 0) throw ParseError("missing header 'n <n_sites>'", line_no);
  return SiteGraph(n, std::move(edges));
}

SiteGraph SiteGraph::read_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open graph file '" + path + "'");
  return read(in);
}

void SiteGraph::write(std::ostream& out) const {
  out << "n " << num_sites_ << '\n';
  for (const auto& [i, j] : edges_) out << i << ' ' << j << '\n';
}

void SiteGraph::write_file(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write graph file '" + path + "'");
  write(out);
}

void SiteGraph::write_grid_csv(std::ostream& out) const {
  for (int i = 0; i < num_sites_; ++i) {
    const auto& nb = neighbors_[i];
    for (int j = 0; j < num_sites_; ++j) {
      if (j > 0) out << ',';
      out << (std::binary_search(nb.begin(), nb.end(), j) ? 1 : 0);
    }
    out << '\n';
  }
}

PrecisionStructure build_icar_structure(const SiteGraph& graph) {
  const int n = graph.num_sites();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(n + 2 * graph.edges().size()));
  for (int i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, static_cast<double>(graph.neighbors()[i].size()));
  }
  for (const auto& [i, j] : graph.edges()) {
    triplets.emplace_back(i - 1, j - 1, -1.0);
    triplets.emplace_back(j - 1, i - 1, -1.0);
  }
  PrecisionStructure out;
  out.entries.resize(n, n);
  out.entries.setFromTriplets(triplets.begin(), triplets.end());
  out.rank_deficiency = graph.num_components();
  out.constraints = DenseMatrix::Zero(graph.num_components(), n);
  for (int i = 0; i < n; ++i) out.constraints(graph.component_of()[i], i) = 1.0;
  return out;
}

PrecisionStructure build_iid_structure(int n) {
  require(n >= 1, ErrorCode::InvalidInput, "iid structure needs n >= 1");
  PrecisionStructure out;
  out.entries = sparse_identity(n);
  out.constraints = DenseMatrix(0, n);
  return out;
}

PrecisionStructure build_seasonal_structure(int num_times, int period) {
  require(period >= 2, ErrorCode::InvalidInput, "season length must be at least 2");
  require(period <= num_times, ErrorCode::InvalidInput,
          "season length " + std::to_string(period) + " exceeds number of time points " +
              std::to_string(num_times));
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(num_times - period + 1) * period * period);
  for (int w = 0; w + period <= num_times; ++w) {
    for (int i = w; i < w + period; ++i) {
      for (int j = w; j < w + period; ++j) triplets.emplace_back(i, j, 1.0);
    }
  }
  PrecisionStructure out;
  out.entries.resize(num_times, num_times);
  out.entries.setFromTriplets(triplets.begin(), triplets.end());
  out.rank_deficiency = period - 1;
  out.constraints = DenseMatrix::Zero(period - 1, num_times);
  for (int t = 0; t < num_times; ++t) {
    const int phase = t % period;
    if (phase < period - 1) out.constraints(phase, t) = 1.0;
  }
  return out;
}

PrecisionStructure build_rw_structure(int num_times, int order) {
  require(order == 1 || order == 2, ErrorCode::InvalidInput, "random walk order must be 1 or 2");
  require(num_times > order, ErrorCode::InvalidInput,
          "random walk of order " + std::to_string(order) + " needs more than " +
              std::to_string(order) + " time points");
  std::vector<Triplet> diff;
  for (int r = 0; r + order < num_times; ++r) {
    if (order == 1) {
      diff.emplace_back(r, r, -1.0);
      diff.emplace_back(r, r + 1, 1.0);
    } else {
      diff.emplace_back(r, r, 1.0);
      diff.emplace_back(r, r + 1, -2.0);
      diff.emplace_back(r, r + 2, 1.0);
    }
  }
  SparseMatrix d(num_times - order, num_times);
  d.setFromTriplets(diff.begin(), diff.end());
  PrecisionStructure out;
  out.entries = SparseMatrix(d.transpose() * d);
  out.entries.makeCompressed();
  out.rank_deficiency = order;
  out.constraints = DenseMatrix::Zero(order, num_times);
  const double centre = 0.5 * (num_times - 1);
  for (int t = 0; t < num_times; ++t) {
    out.constraints(0, t) = 1.0;
    if (order == 2) out.constraints(1, t) = t - centre;
  }
  return out;
}

PrecisionStructure kronecker(const PrecisionStructure& a, const PrecisionStructure& b) {
  PrecisionStructure out;
  out.entries = kronecker_product(a.entries, b.entries);
  out.rank_deficiency =
      a.dim() * b.dim() - (a.dim() - a.rank_deficiency) * (b.dim() - b.rank_deficiency);
  out.constraints = DenseMatrix(0, out.dim());
  return out;
}

int numeric_rank(const SparseMatrix& m) {
  require(m.rows() == m.cols(), ErrorCode::InvalidInput, "numeric_rank needs a square matrix");
  require(m.rows() <= kNumericRankMaxDim, ErrorCode::UnsupportedSize,
          "numeric_rank limited to dimension " + std::to_string(kNumericRankMaxDim) + ", got " +
              std::to_string(m.rows()));
  if (m.rows() == 0) return 0;
  const DenseMatrix dense(m);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(dense, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > 1e-8 * top) ++rank;
  }
  return rank;
}

}  // namespace stinla::gmrf
