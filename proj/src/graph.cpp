#include "dcm/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace dcm {

GraphKind graph_kind_from_string(const std::string& s) {
  if (s == "chain") return GraphKind::Chain;
  if (s == "triangle") return GraphKind::Triangle;
  if (s == "diamond") return GraphKind::Diamond;
  if (s == "y") return GraphKind::Y;
  if (s == "ladder") return GraphKind::Ladder;
  if (s == "random") return GraphKind::Random;
  throw Error("unknown graph kind: " + s);
}

std::string to_string(GraphKind k) {
  switch (k) {
    case GraphKind::Chain: return "chain";
    case GraphKind::Triangle: return "triangle";
    case GraphKind::Diamond: return "diamond";
    case GraphKind::Y: return "y";
    case GraphKind::Ladder: return "ladder";
    case GraphKind::Random: return "random";
  }
  return "?";
}

namespace {

// Min-index-first Kahn. On a cycle, walks backwards through leftover nodes to
// extract one concrete cycle for the error message.
std::vector<int> topo_sort_or_throw(int n, const std::vector<std::vector<int>>& parents) {
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int v = 0; v < n; ++v) {
    indegree[v] = static_cast<int>(parents[v].size());
    for (int u : parents[v]) children[u].push_back(v);
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : children[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  if (static_cast<int>(order.size()) == n) return order;

  std::vector<bool> leftover(n, false);
  for (int v = 0; v < n; ++v) leftover[v] = true;
  for (int v : order) leftover[v] = false;
  int cur = 0;
  while (!leftover[cur]) ++cur;
  std::vector<int> path;
  std::vector<int> pos(n, -1);
  while (pos[cur] < 0) {
    pos[cur] = static_cast<int>(path.size());
    path.push_back(cur);
    for (int u : parents[cur])
      if (leftover[u]) {
        cur = u;
        break;
      }
  }
  std::vector<int> cycle(path.begin() + pos[cur], path.end());
  std::sort(cycle.begin(), cycle.end());
  std::string msg = "graph has a cycle through nodes {";
  for (std::size_t i = 0; i < cycle.size(); ++i)
    msg += (i ? "," : "") + std::to_string(cycle[i] + 1);
  msg += "}";
  throw CycleError(msg, cycle);
}

}  // namespace

CausalGraph::CausalGraph(std::vector<int> node_dims, std::vector<std::vector<int>> parents,
                         std::vector<std::string> node_names)
    : num_nodes_(static_cast<int>(node_dims.size())),
      node_dims_(std::move(node_dims)),
      parents_(std::move(parents)),
      node_names_(std::move(node_names)) {
  require(num_nodes_ >= 1, "CausalGraph: need at least one node");
  require(static_cast<int>(parents_.size()) == num_nodes_,
          "CausalGraph: parent_sets length must equal node count");
  for (int i = 0; i < num_nodes_; ++i) {
    require(node_dims_[i] >= 1, "CausalGraph: node dims must be positive");
    std::set<int> seen;
    for (int p : parents_[i]) {
      require(p >= 0 && p < num_nodes_, "CausalGraph: parent index out of range");
      require(p != i, "CausalGraph: node " + std::to_string(i + 1) + " is its own parent");
      require(seen.insert(p).second, "CausalGraph: duplicate parent");
    }
    std::sort(parents_[i].begin(), parents_[i].end());
  }
  if (node_names_.empty()) {
    for (int i = 0; i < num_nodes_; ++i) node_names_.push_back("x" + std::to_string(i + 1));
  }
  require(static_cast<int>(node_names_.size()) == num_nodes_,
          "CausalGraph: node_names length must equal node count");

  children_.assign(num_nodes_, {});
  for (int v = 0; v < num_nodes_; ++v)
    for (int u : parents_[v]) children_[u].push_back(v);
  for (auto& c : children_) std::sort(c.begin(), c.end());

  topo_order_ = topo_sort_or_throw(num_nodes_, parents_);

  col_offsets_.resize(num_nodes_ + 1);
  col_offsets_[0] = 0;
  for (int i = 0; i < num_nodes_; ++i) col_offsets_[i + 1] = col_offsets_[i] + node_dims_[i];
}

std::vector<int> CausalGraph::roots() const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes_; ++i)
    if (is_root(i)) out.push_back(i);
  return out;
}

std::vector<int> CausalGraph::non_roots() const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes_; ++i)
    if (!is_root(i)) out.push_back(i);
  return out;
}

std::vector<int> CausalGraph::non_sinks() const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes_; ++i)
    if (!is_sink(i)) out.push_back(i);
  return out;
}

std::vector<int> CausalGraph::descendants(int node) const {
  require(node >= 0 && node < num_nodes_, "descendants: invalid node index");
  std::vector<bool> seen(num_nodes_, false);
  std::queue<int> frontier;
  frontier.push(node);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : children_[u])
      if (!seen[v]) {
        seen[v] = true;
        frontier.push(v);
      }
  }
  std::vector<int> out;
  for (int v = 0; v < num_nodes_; ++v)
    if (seen[v]) out.push_back(v);
  return out;
}

std::vector<int> CausalGraph::node_columns(int i) const {
  std::vector<int> cols(node_dims_[i]);
  for (int d = 0; d < node_dims_[i]; ++d) cols[d] = col_offsets_[i] + d;
  return cols;
}

std::vector<int> CausalGraph::columns_of(const std::vector<int>& nodes) const {
  std::vector<int> cols;
  for (int i : nodes)
    for (int d = 0; d < node_dims_[i]; ++d) cols.push_back(col_offsets_[i] + d);
  return cols;
}

nlohmann::json CausalGraph::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < num_nodes_; ++i)
    nodes.push_back({{"name", node_names_[i]}, {"dim", node_dims_[i]}});
  nlohmann::json edges = nlohmann::json::array();
  for (int v = 0; v < num_nodes_; ++v)
    for (int u : parents_[v]) edges.push_back({u + 1, v + 1});
  return {{"nodes", nodes}, {"edges", edges}};
}

CausalGraph CausalGraph::from_json(const nlohmann::json& j) {
  std::vector<int> dims;
  std::vector<std::string> names;
  for (const auto& n : j.at("nodes")) {
    dims.push_back(n.at("dim").get<int>());
    names.push_back(n.at("name").get<std::string>());
  }
  std::vector<std::vector<int>> parents(dims.size());
  for (const auto& e : j.at("edges")) {
    const int u = e.at(0).get<int>(), v = e.at(1).get<int>();
    require(u >= 1 && v >= 1 && u <= static_cast<int>(dims.size()) &&
                v <= static_cast<int>(dims.size()),
            "graph json: edge index out of range");
    parents[v - 1].push_back(u - 1);
  }
  return CausalGraph(std::move(dims), std::move(parents), std::move(names));
}

CausalGraph random_dag(int num_nodes, double edge_prob, Rng& rng, int node_dim) {
  require(num_nodes >= 2, "random_dag: need at least two nodes");
  require(edge_prob > 0.0 && edge_prob <= 1.0, "random_dag: edge_prob must be in (0, 1]");
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<int>> parents(num_nodes);
    for (int u = 0; u < num_nodes; ++u)
      for (int v = u + 1; v < num_nodes; ++v)
        if (rng.uniform() < edge_prob) parents[v].push_back(u);

    // connectivity of the undirected skeleton
    std::vector<std::vector<int>> adj(num_nodes);
    for (int v = 0; v < num_nodes; ++v)
      for (int u : parents[v]) {
        adj[u].push_back(v);
        adj[v].push_back(u);
      }
    std::vector<bool> seen(num_nodes, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          q.push(v);
        }
    }
    if (count == num_nodes)
      return CausalGraph(std::vector<int>(num_nodes, node_dim), std::move(parents));
  }
  throw Error("random_dag: no connected DAG found after 10000 attempts (num_nodes=" +
              std::to_string(num_nodes) + ", edge_prob=" + std::to_string(edge_prob) + ")");
}

CausalGraph named_graph(GraphKind kind, Rng* rng) {
  auto parents_of = [](int n, std::vector<std::pair<int, int>> edges) {
    std::vector<std::vector<int>> parents(n);
    for (auto [u, v] : edges) parents[v - 1].push_back(u - 1);
    return parents;
  };
  switch (kind) {
    case GraphKind::Chain:
      return CausalGraph({1, 1, 1}, parents_of(3, {{1, 2}, {2, 3}}));
    case GraphKind::Triangle:
      return CausalGraph({1, 1, 1}, parents_of(3, {{1, 2}, {1, 3}, {2, 3}}));
    case GraphKind::Diamond:
      return CausalGraph({1, 1, 1, 1}, parents_of(4, {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}}));
    case GraphKind::Y:
      return CausalGraph({1, 1, 1, 1}, parents_of(4, {{1, 3}, {2, 3}, {3, 4}}));
    case GraphKind::Ladder:
      return CausalGraph(std::vector<int>(10, 3),
                         parents_of(10, {{1, 2}, {1, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 6}, {5, 6},
                                         {5, 7}, {6, 8}, {7, 8}, {7, 9}, {8, 10}, {9, 10}}));
    case GraphKind::Random: {
      require(rng != nullptr, "named_graph: random kind needs an rng");
      return random_dag(10, 0.3, *rng, 3);
    }
  }
  throw Error("named_graph: unreachable");
}

}  // namespace dcm
