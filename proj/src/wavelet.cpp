#include "gems/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace gems {

int PartitionTree::split_count() const {
  int c = 0;
  for (const auto& node : nodes)
    if (node.split_ordinal > 0) ++c;
  return c;
}

std::vector<int> PartitionTree::splits_in_order() const {
  std::vector<int> ids;
  ids.reserve(nodes.size() / 2);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (nodes[i].split_ordinal > 0) ids.push_back(i);
  std::sort(ids.begin(), ids.end(), [this](int a, int b) {
    return nodes[a].split_ordinal < nodes[b].split_ordinal;
  });
  return ids;
}

int PartitionTree::max_depth() const {
  int d = 0;
  for (const auto& node : nodes) d = std::max(d, node.depth);
  return d;
}

namespace detail {

std::pair<IndexList, IndexList> median_threshold_split(const Vec& values,
                                                       const IndexList& subset) {
  const int d = static_cast<int>(subset.size());
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return values[a] != values[b] ? values[a] < values[b]
                                  : subset[a] < subset[b];
  });
  const int half = d / 2;
  IndexList lower, upper;
  lower.reserve(half);
  upper.reserve(d - half);
  for (int i = 0; i < half; ++i) lower.push_back(subset[order[i]]);
  for (int i = half; i < d; ++i) upper.push_back(subset[order[i]]);
  std::sort(lower.begin(), lower.end());
  std::sort(upper.begin(), upper.end());
  return {upper, lower};
}

}  // namespace detail

BisectResult bisect(const LaplacianMatrix& l, const IndexList& subset,
                    const FiedlerOptions& opts) {
  if (subset.size() < 2) throw invalid_input("bisect: subset needs >= 2 vertices");

  FiedlerResult f = fiedler_vector(l, subset, opts);
  BisectResult res;
  res.component_split = !f.connected;
  for (int i = 0; i < static_cast<int>(subset.size()); ++i) {
    if (f.vector[i] >= 0.0)
      res.omega1.push_back(subset[i]);
    else
      res.omega2.push_back(subset[i]);
  }
  if (res.omega1.empty() || res.omega2.empty()) {
    auto [upper, lower] = detail::median_threshold_split(f.vector, subset);
    res.omega1 = std::move(upper);
    res.omega2 = std::move(lower);
    res.median_fallback = true;
  }
  return res;
}

PartitionTree build_partition_tree(const LaplacianMatrix& l,
                                   const TreeOptions& opts) {
  const int n = l.size();
  if (n < 1) throw invalid_input("build_partition_tree: empty graph");
  if (!opts.allow_disconnected &&
      connected_components(l, all_vertices(n)).size() > 1)
    throw invalid_input(
        "build_partition_tree: graph is disconnected; build one tree per "
        "component or enable allow_disconnected");

  PartitionTree tree;
  tree.n = n;
  tree.nodes.push_back({all_vertices(n), -1, -1, 0, -1});

  std::deque<int> queue{0};
  int next_ordinal = 1;
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    if (tree.nodes[id].vertices.size() < 2) continue;

    BisectResult cut = bisect(l, tree.nodes[id].vertices, opts.fiedler);
    int left = static_cast<int>(tree.nodes.size());
    int depth = tree.nodes[id].depth + 1;
    tree.nodes.push_back({std::move(cut.omega1), -1, -1, depth, -1});
    tree.nodes.push_back({std::move(cut.omega2), -1, -1, depth, -1});
    tree.nodes[id].left = left;
    tree.nodes[id].right = left + 1;
    tree.nodes[id].split_ordinal = next_ordinal++;
    queue.push_back(left);
    queue.push_back(left + 1);
  }
  return tree;
}

HaarBasis build_haar_basis(const PartitionTree& tree) {
  const int n = tree.n;
  for (const auto& node : tree.nodes) {
    if (node.left < 0 && node.vertices.size() != 1)
      throw invalid_input("build_haar_basis: tree has non-singleton leaves");
  }
  const std::vector<int> splits = tree.splits_in_order();
  if (static_cast<int>(splits.size()) != n - 1)
    throw invalid_input("build_haar_basis: expected N-1 splits");

  Mat phi = Mat::Zero(n, n);
  phi.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  for (int c = 0; c < n - 1; ++c) {
    const PartitionNode& node = tree.nodes[splits[c]];
    const IndexList& o1 = tree.nodes[node.left].vertices;
    const IndexList& o2 = tree.nodes[node.right].vertices;
    const double n1 = static_cast<double>(o1.size());
    const double n2 = static_cast<double>(o2.size());
    const double total = std::sqrt(n1 + n2);
    const double hi = std::sqrt(n2) / (std::sqrt(n1) * total);
    const double lo = -std::sqrt(n1) / (std::sqrt(n2) * total);
    for (int v : o1) phi(v, c + 1) = hi;
    for (int v : o2) phi(v, c + 1) = lo;
  }
  return HaarBasis{std::move(phi), tree};
}

}  // namespace gems
