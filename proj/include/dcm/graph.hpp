#pragma once

#include <string>
#include <vector>

#include "dcm/common.hpp"
#include "dcm/rng.hpp"

#include <json.hpp>

namespace dcm {

enum class GraphKind { Chain, Triangle, Diamond, Y, Ladder, Random };

GraphKind graph_kind_from_string(const std::string& s);
std::string to_string(GraphKind k);

/// Immutable DAG over K nodes with per-node dimensions and parent sets.
/// Nodes are 0-based internally; files and user-facing text are 1-based.
class CausalGraph {
 public:
  CausalGraph(std::vector<int> node_dims, std::vector<std::vector<int>> parents,
              std::vector<std::string> node_names = {});

  int num_nodes() const { return num_nodes_; }
  int node_dim(int i) const { return node_dims_[i]; }
  const std::vector<int>& node_dims() const { return node_dims_; }
  const std::vector<int>& parents(int i) const { return parents_[i]; }
  const std::vector<int>& children(int i) const { return children_[i]; }
  const std::string& node_name(int i) const { return node_names_[i]; }

  bool is_root(int i) const { return parents_[i].empty(); }
  bool is_sink(int i) const { return children_[i].empty(); }
  std::vector<int> roots() const;
  std::vector<int> non_roots() const;
  std::vector<int> non_sinks() const;

  /// Kahn's algorithm, ties broken by ascending node index. Throws CycleError
  /// naming the nodes on a cycle if the graph is not acyclic.
  const std::vector<int>& topological_order() const { return topo_order_; }

  /// Transitive closure of children, excluding the node itself. Sorted.
  std::vector<int> descendants(int node) const;

  /// Sum of node dims; dataset rows have this many values.
  int total_dim() const { return col_offsets_.back(); }
  /// First dataset column of node i.
  int col_offset(int i) const { return col_offsets_[i]; }
  std::vector<int> node_columns(int i) const;
  std::vector<int> columns_of(const std::vector<int>& nodes) const;

  nlohmann::json to_json() const;  // 1-based indices in the file format
  static CausalGraph from_json(const nlohmann::json& j);

  bool same_structure(const CausalGraph& o) const {
    return node_dims_ == o.node_dims_ && parents_ == o.parents_;
  }

 private:
  int num_nodes_ = 0;
  std::vector<int> node_dims_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  std::vector<std::string> node_names_;
  std::vector<int> topo_order_;
  std::vector<int> col_offsets_;
};

/// Upper-triangular random DAG; resampled until the undirected skeleton is a
/// single connected component (at most 10,000 attempts).
CausalGraph random_dag(int num_nodes, double edge_prob, Rng& rng, int node_dim = 1);

/// The fixed benchmark topologies. Ladder and Random use 3-dimensional nodes.
CausalGraph named_graph(GraphKind kind, Rng* rng = nullptr);

}  // namespace dcm
