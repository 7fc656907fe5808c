// Minimum-cost flow with small non-negative integer arc costs.
//
// Primal-dual: each phase computes shortest reduced distances with a bucket
// queue, raises the node potentials, and saturates the zero-reduced-cost
// subgraph with a blocking-flow max-flow. With arc costs in {0..C} every
// augmenting path costs at most C, so transportation problems finish in at
// most C+1 phases.
#pragma once

#include <cstdint>
#include <vector>

namespace ptower::transport {

template <class Flow>
class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes = 0) : nodes_(nodes) {}

  int add_node() { return nodes_++; }
  int node_count() const { return nodes_; }
  void reserve_arcs(std::size_t arcs);

  /// Returns the id of the forward arc.
  int add_arc(int from, int to, std::int32_t cost, Flow capacity);

  Flow flow(int arc) const { return cap_[static_cast<std::size_t>(arc) ^ 1U]; }
  int arc_from(int arc) const { return to_[static_cast<std::size_t>(arc) ^ 1U]; }
  int arc_to(int arc) const { return to_[static_cast<std::size_t>(arc)]; }
  std::int32_t arc_cost(int arc) const { return cost_[static_cast<std::size_t>(arc)]; }
  std::size_t arc_count() const { return to_.size(); }

  struct Result {
    Flow flow{};
    int phases = 0;
  };

  /// Sends as much flow as possible from s to t at minimum cost. Capacities at
  /// or below `eps` count as saturated.
  Result solve(int s, int t, Flow eps = Flow{});

  static Flow infinite();

 private:
  void build_adjacency();
  bool shortest_paths(int s, int t);
  bool levels(int s, int t, Flow eps);
  Flow blocking_flow(int s, int t, Flow eps);
  std::int64_t reduced(std::size_t arc) const {
    return cost_[arc] + potential_[static_cast<std::size_t>(to_[arc ^ 1U])] - potential_[static_cast<std::size_t>(to_[arc])];
  }

  int nodes_ = 0;
  std::vector<int> to_;
  std::vector<std::int32_t> cost_;
  std::vector<Flow> cap_;

  std::vector<std::size_t> adj_start_;
  std::vector<int> adj_;
  std::vector<std::int64_t> potential_;
  std::vector<std::int64_t> dist_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
  Flow eps_{};
};

extern template class MinCostFlow<std::int64_t>;
extern template class MinCostFlow<double>;

}  // namespace ptower::transport
