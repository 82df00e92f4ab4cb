#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ptvae/data.hpp"

namespace ptvae::eval {

/// Row-major feature matrix (rows are records).
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct CartParams {
  std::size_t min_leaf = 20;
  std::size_t max_depth = 25;
};

/// Binary classification tree stored as a flat node array; node 0 is the root.
class Tree {
 public:
  struct Node {
    // split nodes: feature >= 0; leaves: feature == -1
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double probability = 0.0;
    std::size_t count = 0;
    std::size_t depth = 0;
  };

  Tree() = default;
  explicit Tree(std::vector<Node> nodes, std::size_t n_features)
      : nodes_(std::move(nodes)), n_features_(n_features) {}

  /// Rows with x[feature] <= threshold go left.
  double predict_proba(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;
  std::size_t n_features() const { return n_features_; }

 private:
  std::vector<Node> nodes_;
  std::size_t n_features_ = 0;
};

/// Greedy CART minimising weighted Gini impurity. Candidate thresholds are the
/// midpoints between consecutive distinct sorted values. Ties on impurity go
/// to the lowest column, then the lowest threshold, so the seed does not
/// change the result; it is accepted for interface stability.
Tree fit_cart(const FeatureMatrix& features, std::span<const int> labels, const CartParams& params,
              std::uint64_t seed = 0);

/// In-sample weighted Gini impurity of the tree's leaves.
double training_gini(const Tree& tree);

}  // namespace ptvae::eval
