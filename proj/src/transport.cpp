#include "ptower/transport.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>
#include <type_traits>

namespace ptower::transport {

template <class Flow>
Flow MinCostFlow<Flow>::infinite() {
  if constexpr (std::is_floating_point_v<Flow>) {
    return std::numeric_limits<Flow>::infinity();
  } else {
    return std::numeric_limits<Flow>::max() / 4;
  }
}

template <class Flow>
void MinCostFlow<Flow>::reserve_arcs(std::size_t arcs) {
  to_.reserve(2 * arcs);
  cost_.reserve(2 * arcs);
  cap_.reserve(2 * arcs);
}

template <class Flow>
int MinCostFlow<Flow>::add_arc(int from, int to, std::int32_t cost, Flow capacity) {
  if (from < 0 || to < 0 || from >= nodes_ || to >= nodes_) throw std::out_of_range("MinCostFlow: bad node");
  if (cost < 0) throw std::invalid_argument("MinCostFlow: costs must be non-negative");
  const int id = static_cast<int>(to_.size());
  to_.push_back(to);
  cost_.push_back(cost);
  cap_.push_back(capacity);
  to_.push_back(from);
  cost_.push_back(-cost);
  cap_.push_back(Flow{});
  return id;
}

template <class Flow>
void MinCostFlow<Flow>::build_adjacency() {
  const auto n = static_cast<std::size_t>(nodes_);
  adj_start_.assign(n + 1, 0);
  for (std::size_t e = 0; e < to_.size(); ++e) ++adj_start_[static_cast<std::size_t>(to_[e ^ 1U]) + 1];
  for (std::size_t v = 0; v < n; ++v) adj_start_[v + 1] += adj_start_[v];
  adj_.assign(to_.size(), 0);
  std::vector<std::size_t> fill(adj_start_.begin(), adj_start_.end() - 1);
  for (std::size_t e = 0; e < to_.size(); ++e) adj_[fill[static_cast<std::size_t>(to_[e ^ 1U])]++] = static_cast<int>(e);
}

template <class Flow>
bool MinCostFlow<Flow>::shortest_paths(int s, int t) {
  constexpr auto kInf = std::numeric_limits<std::int64_t>::max();
  dist_.assign(static_cast<std::size_t>(nodes_), kInf);
  // Dial's algorithm: reduced costs are small non-negative integers.
  std::vector<std::vector<int>> buckets(1);
  dist_[static_cast<std::size_t>(s)] = 0;
  buckets[0].push_back(s);
  for (std::size_t d = 0; d < buckets.size(); ++d) {
    for (std::size_t i = 0; i < buckets[d].size(); ++i) {
      const int u = buckets[d][i];
      if (dist_[static_cast<std::size_t>(u)] != static_cast<std::int64_t>(d)) continue;
      for (std::size_t p = adj_start_[static_cast<std::size_t>(u)]; p < adj_start_[static_cast<std::size_t>(u) + 1]; ++p) {
        const auto e = static_cast<std::size_t>(adj_[p]);
        if (!(cap_[e] > eps_)) continue;
        const auto v = static_cast<std::size_t>(to_[e]);
        const std::int64_t nd = static_cast<std::int64_t>(d) + reduced(e);
        if (nd < dist_[v]) {
          dist_[v] = nd;
          const auto b = static_cast<std::size_t>(nd);
          if (b >= buckets.size()) buckets.resize(b + 1);
          buckets[b].push_back(static_cast<int>(v));
        }
      }
    }
    std::vector<int>().swap(buckets[d]);
  }
  const auto D = dist_[static_cast<std::size_t>(t)];
  if (D == kInf) return false;
  for (std::size_t v = 0; v < potential_.size(); ++v) potential_[v] += std::min(dist_[v], D);
  return true;
}

template <class Flow>
bool MinCostFlow<Flow>::levels(int s, int t, Flow eps) {
  level_.assign(static_cast<std::size_t>(nodes_), -1);
  std::deque<int> queue{s};
  level_[static_cast<std::size_t>(s)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (std::size_t p = adj_start_[static_cast<std::size_t>(u)]; p < adj_start_[static_cast<std::size_t>(u) + 1]; ++p) {
      const auto e = static_cast<std::size_t>(adj_[p]);
      const auto v = static_cast<std::size_t>(to_[e]);
      if (level_[v] >= 0 || !(cap_[e] > eps) || reduced(e) != 0) continue;
      level_[v] = level_[static_cast<std::size_t>(u)] + 1;
      queue.push_back(static_cast<int>(v));
    }
  }
  return level_[static_cast<std::size_t>(t)] >= 0;
}

template <class Flow>
Flow MinCostFlow<Flow>::blocking_flow(int s, int t, Flow eps) {
  cursor_.assign(adj_start_.begin(), adj_start_.end() - 1);
  std::vector<std::size_t> path;
  Flow pushed{};
  int u = s;
  while (true) {
    if (u == t) {
      Flow f = infinite();
      for (auto e : path) f = std::min(f, cap_[e]);
      for (auto e : path) {
        cap_[e] -= f;
        cap_[e ^ 1U] += f;
      }
      pushed += f;
      std::size_t keep = 0;
      while (keep < path.size() && cap_[path[keep]] > eps) ++keep;
      path.resize(keep);
      u = path.empty() ? s : to_[path.back()];
      continue;
    }
    const auto uu = static_cast<std::size_t>(u);
    bool advanced = false;
    for (; cursor_[uu] < adj_start_[uu + 1]; ++cursor_[uu]) {
      const auto e = static_cast<std::size_t>(adj_[cursor_[uu]]);
      const auto v = static_cast<std::size_t>(to_[e]);
      if (level_[v] == level_[uu] + 1 && cap_[e] > eps && reduced(e) == 0) {
        path.push_back(e);
        u = static_cast<int>(v);
        advanced = true;
        break;
      }
    }
    if (advanced) continue;
    level_[uu] = -1;
    if (path.empty()) break;
    const auto e = path.back();
    path.pop_back();
    u = to_[e ^ 1U];
  }
  return pushed;
}

template <class Flow>
typename MinCostFlow<Flow>::Result MinCostFlow<Flow>::solve(int s, int t, Flow eps) {
  eps_ = eps;
  build_adjacency();
  potential_.assign(static_cast<std::size_t>(nodes_), 0);
  Result result;
  while (shortest_paths(s, t)) {
    ++result.phases;
    while (levels(s, t, eps)) result.flow += blocking_flow(s, t, eps);
  }
  std::vector<int>().swap(level_);
  std::vector<std::int64_t>().swap(dist_);
  return result;
}

template class MinCostFlow<std::int64_t>;
template class MinCostFlow<double>;

}  // namespace ptower::transport
