#include "maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace gridscope::detail {

int MaxFlow::add_edge(int from, int to, int capacity) {
  const int id = static_cast<int>(edges_.size());
  edges_.push_back({to, capacity, 0});
  edges_.push_back({from, 0, 0});
  adj_[from].push_back(id);
  adj_[to].push_back(id + 1);
  return id;
}

std::vector<int> MaxFlow::out_edges(int node) const {
  std::vector<int> out;
  for (int e : adj_[node])
    if (e % 2 == 0) out.push_back(e);
  return out;
}

int MaxFlow::run(int source, int sink) {
  int total = 0;
  std::vector<int> via(adj_.size());
  while (true) {
    std::fill(via.begin(), via.end(), -1);
    std::queue<int> q;
    q.push(source);
    via[source] = -2;
    while (!q.empty() && via[sink] == -1) {
      const int u = q.front();
      q.pop();
      for (int e : adj_[u]) {
        const Edge& ed = edges_[e];
        if (via[ed.to] == -1 && ed.capacity - ed.flow > 0) {
          via[ed.to] = e;
          q.push(ed.to);
        }
      }
    }
    if (via[sink] == -1) return total;

    int push = std::numeric_limits<int>::max();
    for (int v = sink; v != source; v = edges_[via[v] ^ 1].to)
      push = std::min(push, edges_[via[v]].capacity - edges_[via[v]].flow);
    for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
      edges_[via[v]].flow += push;
      edges_[via[v] ^ 1].flow -= push;
    }
    total += push;
  }
}

}  // namespace gridscope::detail
