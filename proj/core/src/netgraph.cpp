#include "hsi/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hsi::netgraph {
namespace {

void check_adjacency(const Eigen::MatrixXi& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw InvalidInput("adjacency must be a non-empty square matrix");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0) throw InvalidInput("adjacency must have a zero diagonal");
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != a(j, i)) throw InvalidInput("adjacency must be symmetric");
      if (a(i, j) != 0 && a(i, j) != 1) throw InvalidInput("adjacency entries must be 0 or 1");
    }
  }
}

double second_smallest(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd ev = sorted_eigenvalues(m);
  return ev.size() >= 2 ? ev(1) : 0.0;
}

}  // namespace

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& symmetric) {
  const Eigen::MatrixXd sym = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sym);
    const auto& sv = svd.singularValues();
    std::ostringstream os;
    os << "eigensolver did not converge on " << sym.rows() << "x" << sym.cols() << " matrix; condition estimate "
       << (sv.size() ? sv(0) / sv(sv.size() - 1) : 0.0);
    throw NumericError(os.str());
  }
  // SelfAdjointEigenSolver returns ascending order already; stable sort keeps
  // index order for ties.
  Eigen::VectorXd ev = solver.eigenvalues();
  std::stable_sort(ev.data(), ev.data() + ev.size());
  return ev;
}

Eigen::MatrixXd metropolis_weights(const Eigen::MatrixXi& adjacency) {
  const Eigen::Index m = adjacency.rows();
  const Eigen::VectorXi deg = adjacency.rowwise().sum();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || adjacency(i, j) == 0) continue;
      w(i, j) = 1.0 / (1.0 + std::max(deg(i), deg(j)));
      off += w(i, j);
    }
    w(i, i) = 1.0 - off;
  }
  return w;
}

CommGraph graph_from_adjacency(const Eigen::MatrixXi& adjacency, Matrix2Xr positions, double radius) {
  check_adjacency(adjacency);
  const Eigen::Index m = adjacency.rows();

  CommGraph g;
  g.positions = std::move(positions);
  g.radius = radius;
  g.adjacency = adjacency;
  g.degrees = adjacency.rowwise().sum();
  g.weights = metropolis_weights(adjacency);

  const Eigen::MatrixXd a = adjacency.cast<double>();
  const Eigen::VectorXd d = g.degrees.cast<double>();
  g.laplacian = Eigen::MatrixXd(d.asDiagonal()) - a;

  Eigen::VectorXd inv_sqrt(m);
  for (Eigen::Index i = 0; i < m; ++i) inv_sqrt(i) = d(i) > 0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  g.normalized_laplacian = inv_sqrt.asDiagonal() * g.laplacian * inv_sqrt.asDiagonal();
  g.weighted_laplacian = Eigen::MatrixXd::Identity(m, m) - g.weights;
  return g;
}

CommGraph build_nu_disk_graph(const Matrix2Xr& positions, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidInput("communication radius must be positive and finite");
  if (positions.rows() < 1) throw InvalidInput("at least one agent position is required");
  if (!positions.allFinite()) throw InvalidInput("agent positions must be finite");

  const Eigen::Index m = positions.rows();
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if ((positions.row(i) - positions.row(j)).norm() <= radius) a(i, j) = a(j, i) = 1;
    }
  }
  return graph_from_adjacency(a, positions, radius);
}

SpectralSummary spectral_summary(const CommGraph& graph) {
  SpectralSummary s;
  s.lambda2 = second_smallest(graph.laplacian);
  s.lambda2_normalized = second_smallest(graph.normalized_laplacian);
  s.lambda2_weighted = second_smallest(graph.weighted_laplacian);
  s.connected = graph.size() == 1 ? true : s.lambda2 > kConnectivityTolerance;
  return s;
}

Eigen::MatrixXd complement_basis(int agents) {
  if (agents < 2) throw InvalidInput("complement basis needs at least two agents");
  const Eigen::Index m = agents;
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  Eigen::VectorXd w = -u;
  w(0) += 1.0;
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m) - (2.0 / w.squaredNorm()) * w * w.transpose();
  return h.rightCols(m - 1);
}

Eigen::MatrixXd reduced_normalized_laplacian(const CommGraph& graph) {
  const Eigen::MatrixXd f = complement_basis(graph.size());
  return f.transpose() * graph.normalized_laplacian * f;
}

std::optional<double> connectivity_cost(const CommGraph& graph, double kappa1, double kappa2) {
  if (graph.size() < 2) return std::nullopt;
  const SpectralSummary s = spectral_summary(graph);
  if (!s.connected || s.lambda2_normalized <= kConnectivityTolerance) return std::nullopt;
  if (kappa1 == 0.0) return 0.0;
  const Eigen::VectorXd ev = sorted_eigenvalues(reduced_normalized_laplacian(graph));
  if (ev(0) <= 0.0) return std::nullopt;
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) log_det += std::log(kappa2 * ev(i));
  return -kappa1 * log_det;
}

std::optional<double> communication_cost(const CommGraph& graph, double kappa3) {
  const int edges = graph.edge_count();
  if (edges == 0) return std::nullopt;
  return kappa3 * std::log(graph.radius * graph.radius * 2.0 * edges);
}

}  // namespace hsi::netgraph
