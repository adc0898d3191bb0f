#pragma once

#include "hsi/types.hpp"

#include <optional>

namespace hsi::netgraph {

/// Eigenvalues at or below this are treated as zero when deciding connectivity.
inline constexpr double kConnectivityTolerance = 1e-9;

/// Undirected nu-disk communication graph over one swarm configuration,
/// together with its Metropolis weights and Laplacians.
struct CommGraph {
  Matrix2Xr positions;
  double radius = 0.0;
  Eigen::MatrixXi adjacency;
  Eigen::VectorXi degrees;
  Eigen::MatrixXd weights;
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd normalized_laplacian;
  Eigen::MatrixXd weighted_laplacian;

  int size() const { return static_cast<int>(adjacency.rows()); }
  int edge_count() const { return adjacency.sum() / 2; }
};

struct SpectralSummary {
  double lambda2 = 0.0;
  double lambda2_normalized = 0.0;
  double lambda2_weighted = 0.0;
  bool connected = false;
};

/// a_ij = 1 iff ||p_i - p_j|| <= radius (i != j). Throws InvalidInput on
/// non-finite positions, radius <= 0 or an empty swarm.
CommGraph build_nu_disk_graph(const Matrix2Xr& positions, double radius);

/// Builds the derived matrices for an explicit symmetric 0/1 adjacency.
/// `positions` may be empty; `radius` is carried through unchanged.
CommGraph graph_from_adjacency(const Eigen::MatrixXi& adjacency, Matrix2Xr positions = {}, double radius = 0.0);

/// w_ij = 1 / (1 + max(d_i, d_j)) on edges, diagonal fills rows to one.
Eigen::MatrixXd metropolis_weights(const Eigen::MatrixXi& adjacency);
inline Eigen::MatrixXd metropolis_weights(const CommGraph& graph) { return metropolis_weights(graph.adjacency); }

/// Ascending eigenvalues of a symmetric matrix (symmetrised first).
Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& symmetric);

SpectralSummary spectral_summary(const CommGraph& graph);

/// Deterministic orthonormal basis of the complement of span{1}:
/// F^T F = I and F^T 1 = 0. Built from the Householder reflection that maps
/// e_1 onto 1/sqrt(M); columns 2..M of that reflection.
Eigen::MatrixXd complement_basis(int agents);

/// G = F^T L^N F.
Eigen::MatrixXd reduced_normalized_laplacian(const CommGraph& graph);

/// -k1 * ln det(k2 * G). nullopt signals an infeasible (disconnected) mode.
std::optional<double> connectivity_cost(const CommGraph& graph, double kappa1, double kappa2);

/// k3 * ln(nu^2 * 1^T A 1). nullopt when the graph has no edges.
std::optional<double> communication_cost(const CommGraph& graph, double kappa3);

}  // namespace hsi::netgraph
