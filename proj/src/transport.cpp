#include "wcv/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "wcv/error.hpp"
#include "wcv/kernels.hpp"

namespace wcv {

Coupling::Coupling(Eigen::MatrixXd plan, Eigen::VectorXd row_marginal, Eigen::VectorXd col_marginal)
    : plan_(std::move(plan)), row_marginal_(std::move(row_marginal)), col_marginal_(std::move(col_marginal)) {
  if (plan_.rows() != row_marginal_.size() || plan_.cols() != col_marginal_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "coupling shape does not match marginals");
  }
  if (!plan_.allFinite() || (plan_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, "coupling entries must be finite and nonnegative");
  }
  if ((plan_.rowwise().sum() - row_marginal_).cwiseAbs().maxCoeff() > 1e-8 ||
      (plan_.colwise().sum().transpose() - col_marginal_).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error(ErrorCode::MarginalMismatch, "coupling sums do not match its marginals");
  }
}

Coupling Coupling::transposed() const { return Coupling(plan_.transpose(), col_marginal_, row_marginal_); }

namespace {

// Transportation simplex on a balanced m x n problem with strictly positive
// supplies and demands. The basis is a spanning tree of the bipartite graph
// (m + n - 1 cells, degenerate zero-flow cells included).
class TransportationSimplex {
 public:
  TransportationSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand)
      : cost_(cost), supply_(supply), demand_(demand), m_(cost.rows()), n_(cost.cols()),
        slot_(static_cast<std::size_t>(m_ * n_), -1) {}

  Eigen::MatrixXd solve() {
    northwest_corner();
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    const long max_pivots = 50 * static_cast<long>(m_ * n_) + 1000;
    long degenerate_streak = 0;
    for (long pivot = 0;; ++pivot) {
      if (pivot > max_pivots) throw Error(ErrorCode::InvalidInput, "transportation simplex did not terminate");
      build_adjacency();
      compute_potentials();
      // Dantzig pricing; after a long run of degenerate pivots switch to the
      // first improving cell in index order to break any cycle.
      const bool bland = degenerate_streak > m_ + n_;
      const auto entering = price(tol, bland);
      if (!entering) break;
      const double theta = pivot_on(entering->first, entering->second, bland);
      degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
    }
    recompute_flows();
    Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(m_, n_);
    for (const auto& b : basis_) plan(b.row, b.col) = std::max(0.0, b.flow);
    return plan;
  }

 private:
  struct Cell {
    Eigen::Index row;
    Eigen::Index col;
    double flow;
  };

  std::size_t index(Eigen::Index i, Eigen::Index j) const { return static_cast<std::size_t>(i * n_ + j); }

  void add_basic(Eigen::Index i, Eigen::Index j, double flow) {
    slot_[index(i, j)] = static_cast<int>(basis_.size());
    basis_.push_back({i, j, flow});
  }

  void northwest_corner() {
    std::vector<double> s(supply_.data(), supply_.data() + m_);
    std::vector<double> t(demand_.data(), demand_.data() + n_);
    Eigen::Index i = 0;
    Eigen::Index j = 0;
    for (;;) {
      const double x = std::min(s[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]);
      s[static_cast<std::size_t>(i)] -= x;
      t[static_cast<std::size_t>(j)] -= x;
      add_basic(i, j, x);
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) {
        ++j;
      } else if (j == n_ - 1) {
        ++i;
      } else if (s[static_cast<std::size_t>(i)] <= t[static_cast<std::size_t>(j)]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  // Nodes 0..m-1 are rows, m..m+n-1 are columns.
  void build_adjacency() {
    adjacency_.assign(static_cast<std::size_t>(m_ + n_), {});
    for (std::size_t e = 0; e < basis_.size(); ++e) {
      adjacency_[static_cast<std::size_t>(basis_[e].row)].push_back(e);
      adjacency_[static_cast<std::size_t>(m_ + basis_[e].col)].push_back(e);
    }
  }

  Eigen::Index other_end(std::size_t e, Eigen::Index node) const {
    const auto& b = basis_[e];
    return node < m_ ? m_ + b.col : b.row;
  }

  void compute_potentials() {
    potential_.assign(static_cast<std::size_t>(m_ + n_), 0.0);
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      for (const std::size_t e : adjacency_[static_cast<std::size_t>(node)]) {
        const Eigen::Index next = other_end(e, node);
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = 1;
        const double c = cost_(basis_[e].row, basis_[e].col);
        potential_[static_cast<std::size_t>(next)] = c - potential_[static_cast<std::size_t>(node)];
        stack.push_back(next);
      }
    }
  }

  std::optional<std::pair<Eigen::Index, Eigen::Index>> price(double tol, bool first_improving) const {
    double best = -tol;
    std::optional<std::pair<Eigen::Index, Eigen::Index>> entering;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double u = potential_[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (slot_[index(i, j)] >= 0) continue;
        const double reduced = cost_(i, j) - u - potential_[static_cast<std::size_t>(m_ + j)];
        if (reduced < best) {
          best = reduced;
          entering = {i, j};
          if (first_improving) return entering;
        }
      }
    }
    return entering;
  }

  // Adds cell (i, j) to the basis, pushes theta around the unique cycle and
  // drops the blocking cell. Returns theta.
  double pivot_on(Eigen::Index i, Eigen::Index j, bool smallest_index_leaves) {
    // Tree path from row i to column j.
    const auto nodes = static_cast<std::size_t>(m_ + n_);
    std::vector<long> parent_edge(nodes, -1);
    std::vector<char> seen(nodes, 0);
    std::vector<Eigen::Index> queue{i};
    seen[static_cast<std::size_t>(i)] = 1;
    const Eigen::Index target = m_ + j;
    for (std::size_t head = 0; head < queue.size() && !seen[static_cast<std::size_t>(target)]; ++head) {
      const Eigen::Index node = queue[head];
      for (const std::size_t e : adjacency_[static_cast<std::size_t>(node)]) {
        const Eigen::Index next = other_end(e, node);
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = 1;
        parent_edge[static_cast<std::size_t>(next)] = static_cast<long>(e);
        queue.push_back(next);
      }
    }
    // Walk back from column j; edges alternate -, +, -, ... ending with a -
    // edge at row i.
    std::vector<std::size_t> path;
    for (Eigen::Index node = target; node != i;) {
      const auto e = static_cast<std::size_t>(parent_edge[static_cast<std::size_t>(node)]);
      path.push_back(e);
      node = other_end(e, node);
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = path.front();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const auto& b = basis_[path[k]];
      const bool better = b.flow < theta ||
                          (smallest_index_leaves && b.flow == theta &&
                           index(b.row, b.col) < index(basis_[leaving].row, basis_[leaving].col));
      if (better) {
        theta = b.flow;
        leaving = path[k];
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t k = 0; k < path.size(); ++k) {
      basis_[path[k]].flow += (k % 2 == 0) ? -theta : theta;
    }
    const Cell old = basis_[leaving];
    slot_[index(old.row, old.col)] = -1;
    basis_[leaving] = {i, j, theta};
    slot_[index(i, j)] = static_cast<int>(leaving);
    return theta;
  }

  // Solves the tree flows directly from the marginals by leaf elimination,
  // removing drift accumulated over the pivots.
  void recompute_flows() {
    build_adjacency();
    const auto nodes = static_cast<std::size_t>(m_ + n_);
    std::vector<double> residual(nodes);
    for (Eigen::Index i = 0; i < m_; ++i) residual[static_cast<std::size_t>(i)] = supply_(i);
    for (Eigen::Index j = 0; j < n_; ++j) residual[static_cast<std::size_t>(m_ + j)] = demand_(j);
    std::vector<std::size_t> degree(nodes);
    for (std::size_t v = 0; v < nodes; ++v) degree[v] = adjacency_[v].size();
    std::vector<char> used(basis_.size(), 0);
    std::vector<std::size_t> leaves;
    for (std::size_t v = 0; v < nodes; ++v) {
      if (degree[v] == 1) leaves.push_back(v);
    }
    for (std::size_t head = 0; head < leaves.size(); ++head) {
      const std::size_t v = leaves[head];
      if (degree[v] != 1) continue;
      std::size_t edge = basis_.size();
      for (const std::size_t e : adjacency_[v]) {
        if (!used[e]) {
          edge = e;
          break;
        }
      }
      if (edge == basis_.size()) continue;
      used[edge] = 1;
      const double f = residual[v];
      basis_[edge].flow = f;
      residual[v] = 0.0;
      const auto w = static_cast<std::size_t>(other_end(edge, static_cast<Eigen::Index>(v)));
      residual[w] -= f;
      --degree[v];
      if (--degree[w] == 1) leaves.push_back(w);
    }
  }

  const Eigen::MatrixXd& cost_;
  const Eigen::VectorXd& supply_;
  const Eigen::VectorXd& demand_;
  Eigen::Index m_;
  Eigen::Index n_;
  std::vector<Cell> basis_;
  std::vector<int> slot_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<double> potential_;
};

void check_probability_like(const Eigen::VectorXd& p, const char* what) {
  if (p.size() == 0) throw Error(ErrorCode::InvalidInput, std::string(what) + " is empty");
  if (!p.allFinite() || (p.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " must be finite and nonnegative");
  }
  if (!(p.sum() > 0.0)) throw Error(ErrorCode::InvalidInput, std::string(what) + " has zero mass");
}

std::vector<Eigen::Index> positive_support(const Eigen::VectorXd& p) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) idx.push_back(i);
  }
  return idx;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// tr((S1^1/2 S2 S1^1/2)^1/2) equals the sum of singular values of
// S2^1/2 S1^1/2. The SVD resolves small singular values to absolute accuracy,
// whereas rooting eigenvalues of the inner product turns roundoff of order
// eps into errors of order sqrt(eps).
double trace_sqrt_product(const SymMatrix& root1, const SymMatrix& root2) {
  const Eigen::MatrixXd m = root2.matrix() * root1.matrix();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

double w2_given_roots(const GaussianComponent& c1, const SymMatrix* root1, const GaussianComponent& c2,
                      const SymMatrix* root2) {
  const auto& k = kernels::active();
  const double mean_term = k.squared_distance(c1.mean().data(), c2.mean().data(), static_cast<std::size_t>(c1.dim()));
  if (c1.degenerate() && c2.degenerate()) return mean_term;
  double cov_term;
  if (c1.dim() == 1) {
    const double s1 = std::sqrt(std::max(0.0, c1.covariance()(0, 0)));
    const double s2 = std::sqrt(std::max(0.0, c2.covariance()(0, 0)));
    cov_term = (s1 - s2) * (s1 - s2);
  } else if (c1.degenerate()) {
    cov_term = c2.covariance().trace();
  } else if (c2.degenerate()) {
    cov_term = c1.covariance().trace();
  } else {
    const SymMatrix local1 = root1 != nullptr ? SymMatrix() : psd_sqrt(c1.covariance());
    const SymMatrix local2 = root2 != nullptr ? SymMatrix() : psd_sqrt(c2.covariance());
    const SymMatrix& r1 = root1 != nullptr ? *root1 : local1;
    const SymMatrix& r2 = root2 != nullptr ? *root2 : local2;
    cov_term = c1.covariance().trace() + c2.covariance().trace() - 2.0 * trace_sqrt_product(r1, r2);
  }
  return std::max(0.0, mean_term + cov_term);
}

void require_same_dim(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, "dimension " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

OtResult solve_ot(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_probability_like(p, "row marginal");
  check_probability_like(q, "column marginal");
  if (cost.rows() != p.size() || cost.cols() != q.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cost matrix shape does not match marginals");
  }
  if (!cost.allFinite() || (cost.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, "cost must be finite and nonnegative");
  }
  const double mass_p = p.sum();
  const double mass_q = q.sum();
  if (std::abs(mass_p - mass_q) > 1e-6) {
    throw Error(ErrorCode::MarginalMismatch,
                "marginal masses differ: " + std::to_string(mass_p) + " vs " + std::to_string(mass_q));
  }
  const Eigen::VectorXd q_balanced = q * (mass_p / mass_q);

  const auto rows = positive_support(p);
  const auto cols = positive_support(q_balanced);
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd sub_cost(m, n);
  Eigen::VectorXd supply(m);
  Eigen::VectorXd demand(n);
  for (Eigen::Index a = 0; a < m; ++a) {
    supply(a) = p(rows[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < n; ++b) sub_cost(a, b) = cost(rows[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
  }
  for (Eigen::Index b = 0; b < n; ++b) demand(b) = q_balanced(cols[static_cast<std::size_t>(b)]);

  const Eigen::MatrixXd sub_plan = TransportationSimplex(sub_cost, supply, demand).solve();

  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(p.size(), q.size());
  double total = 0.0;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double f = sub_plan(a, b);
      if (f == 0.0) continue;
      plan(rows[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]) = f;
      total += f * sub_cost(a, b);
    }
  }
  return OtResult{total, Coupling(std::move(plan), p, q_balanced)};
}

OtResult wasserstein2_discrete(const DiscreteDistribution& q1, const DiscreteDistribution& q2) {
  require_same_dim(q1.dim(), q2.dim());
  const RowMajor x1 = q1.support();
  const RowMajor x2 = q2.support();
  const auto& k = kernels::active();
  const auto d = static_cast<std::size_t>(q1.dim());
  Eigen::MatrixXd cost(q1.size(), q2.size());
  for (Eigen::Index i = 0; i < q1.size(); ++i) {
    for (Eigen::Index j = 0; j < q2.size(); ++j) cost(i, j) = k.squared_distance(x1.row(i).data(), x2.row(j).data(), d);
  }
  return solve_ot(cost, q1.weights(), q2.weights());
}

double gaussian_w2(const GaussianComponent& c1, const GaussianComponent& c2) {
  require_same_dim(c1.dim(), c2.dim());
  return w2_given_roots(c1, nullptr, c2, nullptr);
}

double gaussian_what2(const GaussianComponent& c1, const GaussianComponent& c2) {
  require_same_dim(c1.dim(), c2.dim());
  const double mean_term = kernels::active().squared_distance(c1.mean().data(), c2.mean().data(),
                                                              static_cast<std::size_t>(c1.dim()));
  return mean_term + c1.covariance().trace() + c2.covariance().trace();
}

Eigen::MatrixXd component_cost_matrix(const GaussianMixture& g1, const GaussianMixture& g2) {
  require_same_dim(g1.dim(), g2.dim());
  // One square root per component instead of two per pair.
  auto roots_of = [](const GaussianMixture& g) {
    std::vector<std::optional<SymMatrix>> roots(static_cast<std::size_t>(g.size()));
    if (g.dim() > 1) {
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (!g.component(i).degenerate()) roots[static_cast<std::size_t>(i)] = psd_sqrt(g.component(i).covariance());
      }
    }
    return roots;
  };
  const auto roots1 = roots_of(g1);
  const auto roots2 = roots_of(g2);
  Eigen::MatrixXd cost(g1.size(), g2.size());
  for (Eigen::Index i = 0; i < g1.size(); ++i) {
    const auto& r1 = roots1[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < g2.size(); ++j) {
      const auto& r2 = roots2[static_cast<std::size_t>(j)];
      cost(i, j) = w2_given_roots(g1.component(i), r1 ? &*r1 : nullptr, g2.component(j), r2 ? &*r2 : nullptr);
    }
  }
  return cost;
}

OtResult maw2(const GaussianMixture& g1, const GaussianMixture& g2) {
  return solve_ot(component_cost_matrix(g1, g2), g1.priors(), g2.priors());
}

}  // namespace wcv
