#include "ptvae/cart.hpp"

#include <algorithm>
#include <numeric>

namespace ptvae::eval {

double Tree::predict_proba(std::span<const double> x) const {
  if (nodes_.empty()) throw Error("predict_proba on an unfitted tree");
  if (x.size() != n_features_) {
    throw Error("predict_proba: expected " + std::to_string(n_features_) + " features, got " +
                std::to_string(x.size()));
  }
  const Node* node = &nodes_.front();
  while (node->feature >= 0) {
    node = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                                ? node->left
                                                : node->right)];
  }
  return node->probability;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

std::size_t Tree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

namespace {

using IndexList = std::vector<std::uint32_t>;

struct Builder {
  const FeatureMatrix& x;
  std::span<const int> y;
  CartParams params;
  std::vector<Tree::Node> nodes;
  std::vector<char> goes_left;

  static double weighted_gini(double n, double n1) {
    return n == 0.0 ? 0.0 : 2.0 * n1 * (n - n1) / n;
  }

  int build(std::vector<IndexList> sorted, std::size_t depth) {
    const std::size_t m = sorted.front().size();
    std::size_t n1 = 0;
    for (auto r : sorted.front()) n1 += static_cast<std::size_t>(y[r]);

    const int id = static_cast<int>(nodes.size());
    Tree::Node node;
    node.probability = static_cast<double>(n1) / static_cast<double>(m);
    node.count = m;
    node.depth = depth;
    nodes.push_back(node);

    if (depth >= params.max_depth || n1 == 0 || n1 == m || m < 2 * params.min_leaf) return id;

    const double parent = weighted_gini(static_cast<double>(m), static_cast<double>(n1));
    double best = parent;
    int best_feature = -1;
    double best_threshold = 0.0;
    const std::size_t lo = std::max<std::size_t>(params.min_leaf, 1);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto& order = sorted[static_cast<std::size_t>(j)];
      std::size_t left1 = 0;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        left1 += static_cast<std::size_t>(y[order[k]]);
        const std::size_t nl = k + 1;
        if (nl < lo) continue;
        if (m - nl < lo) break;
        const double v = x(order[k], j);
        const double next = x(order[k + 1], j);
        if (!(v < next)) continue;
        const double g = weighted_gini(static_cast<double>(nl), static_cast<double>(left1)) +
                         weighted_gini(static_cast<double>(m - nl), static_cast<double>(n1 - left1));
        if (g < best) {
          best = g;
          best_feature = static_cast<int>(j);
          best_threshold = v + 0.5 * (next - v);
          if (!(best_threshold < next)) best_threshold = v;
        }
      }
    }
    if (best_feature < 0 || !(best < parent - 1e-12 * static_cast<double>(m))) return id;

    for (auto r : sorted.front()) goes_left[r] = x(r, best_feature) <= best_threshold;
    std::vector<IndexList> left(sorted.size()), right(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      for (auto r : sorted[j]) (goes_left[r] ? left[j] : right[j]).push_back(r);
      IndexList().swap(sorted[j]);
    }
    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

}  // namespace

Tree fit_cart(const FeatureMatrix& features, std::span<const int> labels, const CartParams& params,
              std::uint64_t /*seed*/) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0 || features.cols() == 0) throw Error("fit_cart: empty input");
  if (labels.size() != n) throw Error("fit_cart: label count does not match row count");
  for (int v : labels) {
    if (v != 0 && v != 1) throw Error("fit_cart: labels must be 0 or 1");
  }
  std::vector<IndexList> sorted(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    auto& order = sorted[static_cast<std::size_t>(j)];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return features(a, j) < features(b, j);
    });
  }
  Builder b{features, labels, params, {}, std::vector<char>(n, 0)};
  b.build(std::move(sorted), 0);
  return Tree(std::move(b.nodes), static_cast<std::size_t>(features.cols()));
}

double training_gini(const Tree& tree) {
  double total = 0.0, weighted = 0.0;
  for (const auto& n : tree.nodes()) {
    if (n.feature >= 0) continue;
    const double c = static_cast<double>(n.count);
    total += c;
    weighted += c * 2.0 * n.probability * (1.0 - n.probability);
  }
  return total == 0.0 ? 0.0 : weighted / total;
}

}  // namespace ptvae::eval
