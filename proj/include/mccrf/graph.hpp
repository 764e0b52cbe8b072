#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace mccrf {

using NodeId = int;
using EdgeId = int;

/// Binary edge labeling indexed by edge id: 1 = cut, 0 = join.
using EdgeLabeling = std::vector<std::uint8_t>;

struct Edge {
   NodeId u;
   NodeId v;
   bool operator==(const Edge&) const = default;
};

struct Neighbor {
   NodeId node;
   EdgeId edge;
};

/// Undirected simple graph with dense, stable edge ids.
///
/// Edges are normalized to u < v and numbered in input order. Self-loops and
/// duplicate edges are rejected at construction. Immutable afterwards.
class Graph {
public:
   Graph() = default;
   Graph(int node_count, std::span<const std::pair<NodeId, NodeId>> edges);

   int node_count() const { return node_count_; }
   int edge_count() const { return static_cast<int>(edges_.size()); }
   const std::vector<Edge>& edges() const { return edges_; }
   const Edge& edge(EdgeId e) const { return edges_[e]; }

   /// Neighbors of a node sorted by node id.
   std::span<const Neighbor> neighbors(NodeId v) const { return adjacency_[v]; }

   /// Edge id joining u and v, or -1 when they are not adjacent.
   EdgeId find_edge(NodeId u, NodeId v) const;
   bool adjacent(NodeId u, NodeId v) const { return find_edge(u, v) >= 0; }

   /// True when every pair of distinct nodes is adjacent.
   bool is_complete() const;

private:
   int node_count_ = 0;
   std::vector<Edge> edges_;
   std::vector<std::vector<Neighbor>> adjacency_;
};

Graph complete_graph(int n);

/// Node partition with canonical component ids: ids are assigned in order of
/// first occurrence when scanning nodes 0..n-1, so equal partitions compare
/// equal.
class Decomposition {
public:
   Decomposition() = default;
   /// Canonicalizes arbitrary integer labels.
   explicit Decomposition(std::span<const int> labels);

   int node_count() const { return static_cast<int>(component_.size()); }
   int component_count() const { return component_count_; }
   int operator[](NodeId v) const { return component_[v]; }
   const std::vector<int>& component_ids() const { return component_; }

   bool operator==(const Decomposition&) const = default;

   static Decomposition singletons(int n);
   static Decomposition single_component(int n);

private:
   std::vector<int> component_;
   int component_count_ = 0;
};

/// Chordless cycles, each stored as sorted edge ids. `complete` is false when
/// the host graph contains a chordless cycle longer than the enumeration bound
/// (or the bounded search for one ran out of budget).
struct CycleSet {
   std::vector<std::vector<EdgeId>> cycles;
   int max_len = 3;
   bool complete = true;

   std::size_t size() const { return cycles.size(); }
   bool empty() const { return cycles.empty(); }
};

/// Enumerates all chordless cycles of length <= max_len. Incompleteness is
/// reported through CycleSet::complete rather than thrown.
CycleSet enumerate_chordless_cycles(const Graph& g, int max_len = 3,
                                    std::size_t search_budget = 2'000'000);

/// Maximum cardinality search test: chordal graphs have no chordless cycle
/// longer than 3.
bool is_chordal(const Graph& g);

bool is_feasible(const Graph& g, const EdgeLabeling& y, const CycleSet& cc);

EdgeLabeling labeling_from_decomposition(const Graph& g, const Decomposition& d);

/// Connected components of the join subgraph. Accepts infeasible labelings;
/// a cut edge inside a component is absorbed.
Decomposition decomposition_from_labeling(const Graph& g, const EdgeLabeling& y);

}  // namespace mccrf
