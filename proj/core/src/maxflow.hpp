#pragma once

#include <vector>

namespace gridscope::detail {

// Edmonds-Karp max-flow on a small integer-capacity graph.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

  int add_edge(int from, int to, int capacity);
  int run(int source, int sink);

  int flow(int edge) const { return edges_[edge].flow; }
  int to(int edge) const { return edges_[edge].to; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  // Outgoing forward edges of a node (reverse residual edges excluded).
  std::vector<int> out_edges(int node) const;

 private:
  struct Edge {
    int to;
    int capacity;
    int flow;
  };
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace gridscope::detail
