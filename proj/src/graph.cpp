#include "mccrf/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace mccrf {

Graph::Graph(int node_count, std::span<const std::pair<NodeId, NodeId>> edges)
   : node_count_(node_count), adjacency_(node_count < 0 ? 0 : node_count)
{
   if (node_count < 0) throw std::invalid_argument("graph: negative node count");
   edges_.reserve(edges.size());
   for (auto [a, b] : edges) {
      if (a < 0 || b < 0 || a >= node_count || b >= node_count)
         throw std::invalid_argument("graph: edge (" + std::to_string(a) + "," + std::to_string(b) +
                                     ") references a node outside 0.." + std::to_string(node_count - 1));
      if (a == b) throw std::invalid_argument("graph: self-loop at node " + std::to_string(a));
      const Edge e{std::min(a, b), std::max(a, b)};
      const EdgeId id = static_cast<EdgeId>(edges_.size());
      adjacency_[e.u].push_back({e.v, id});
      adjacency_[e.v].push_back({e.u, id});
      edges_.push_back(e);
   }
   for (auto& nbrs : adjacency_) {
      std::sort(nbrs.begin(), nbrs.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
      for (std::size_t i = 1; i < nbrs.size(); ++i)
         if (nbrs[i].node == nbrs[i - 1].node)
            throw std::invalid_argument("graph: duplicate edge (" +
                                        std::to_string(edges_[nbrs[i].edge].u) + "," +
                                        std::to_string(edges_[nbrs[i].edge].v) + ")");
   }
}

EdgeId Graph::find_edge(NodeId u, NodeId v) const
{
   if (u < 0 || v < 0 || u >= node_count_ || v >= node_count_) return -1;
   const auto& nbrs = adjacency_[u];
   auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v,
                              [](const Neighbor& n, NodeId x) { return n.node < x; });
   return (it != nbrs.end() && it->node == v) ? it->edge : -1;
}

bool Graph::is_complete() const
{
   const long long n = node_count_;
   return static_cast<long long>(edges_.size()) == n * (n - 1) / 2;
}

Graph complete_graph(int n)
{
   if (n < 1) throw std::invalid_argument("complete_graph: node count must be at least 1");
   std::vector<std::pair<NodeId, NodeId>> edges;
   edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
   for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.emplace_back(u, v);
   return Graph(n, edges);
}

// ---------------------------------------------------------------------------

Decomposition::Decomposition(std::span<const int> labels) : component_(labels.size())
{
   std::unordered_map<int, int> remap;
   for (std::size_t v = 0; v < labels.size(); ++v) {
      auto [it, inserted] = remap.try_emplace(labels[v], static_cast<int>(remap.size()));
      component_[v] = it->second;
   }
   component_count_ = static_cast<int>(remap.size());
}

Decomposition Decomposition::singletons(int n)
{
   std::vector<int> ids(n);
   std::iota(ids.begin(), ids.end(), 0);
   return Decomposition(ids);
}

Decomposition Decomposition::single_component(int n)
{
   return Decomposition(std::vector<int>(n, 0));
}

// ---------------------------------------------------------------------------

namespace {

class ChordlessSearch {
public:
   ChordlessSearch(const Graph& g, int max_len, std::size_t budget) : g_(g), max_len_(max_len), budget_(budget) {}

   // Collects every chordless cycle with at most max_len nodes.
   void enumerate(std::vector<std::vector<EdgeId>>& out)
   {
      out_ = &out;
      mode_ = Mode::collect;
      run();
   }

   // True if a chordless cycle longer than max_len exists or the budget ran out.
   bool longer_cycle_possible()
   {
      mode_ = Mode::find_longer;
      found_longer_ = false;
      exhausted_ = false;
      expansions_ = 0;
      run();
      return found_longer_ || exhausted_;
   }

private:
   enum class Mode { collect, find_longer };

   void run()
   {
      in_path_.assign(g_.node_count(), 0);
      for (NodeId start = 0; start < g_.node_count(); ++start) {
         path_.assign(1, start);
         in_path_[start] = 1;
         for (const Neighbor& nb : g_.neighbors(start)) {
            if (nb.node <= start) continue;
            path_.push_back(nb.node);
            in_path_[nb.node] = 1;
            extend();
            in_path_[nb.node] = 0;
            path_.pop_back();
            if (stop()) break;
         }
         in_path_[start] = 0;
         if (stop()) return;
      }
   }

   bool stop() const { return mode_ == Mode::find_longer && (found_longer_ || exhausted_); }

   void extend()
   {
      if (mode_ == Mode::find_longer && ++expansions_ > budget_) {
         exhausted_ = true;
         return;
      }
      const NodeId start = path_.front();
      const NodeId last = path_.back();
      for (const Neighbor& nb : g_.neighbors(last)) {
         const NodeId w = nb.node;
         if (w <= start || in_path_[w]) continue;
         bool chord = false;
         for (std::size_t i = 1; i + 1 < path_.size(); ++i)
            if (g_.adjacent(w, path_[i])) { chord = true; break; }
         if (chord) continue;

         const int len_with_w = static_cast<int>(path_.size()) + 1;
         if (g_.adjacent(w, start)) {
            if (path_[1] < w) close_cycle(w, len_with_w);
         } else if (mode_ == Mode::find_longer || len_with_w + 1 <= max_len_) {
            path_.push_back(w);
            in_path_[w] = 1;
            extend();
            in_path_[w] = 0;
            path_.pop_back();
         }
         if (stop()) return;
      }
   }

   void close_cycle(NodeId w, int len)
   {
      if (mode_ == Mode::find_longer) {
         if (len > max_len_) found_longer_ = true;
         return;
      }
      if (len > max_len_) return;
      std::vector<EdgeId> edges;
      edges.reserve(len);
      for (std::size_t i = 0; i + 1 < path_.size(); ++i) edges.push_back(g_.find_edge(path_[i], path_[i + 1]));
      edges.push_back(g_.find_edge(path_.back(), w));
      edges.push_back(g_.find_edge(w, path_.front()));
      std::sort(edges.begin(), edges.end());
      out_->push_back(std::move(edges));
   }

   const Graph& g_;
   int max_len_;
   std::size_t budget_;
   Mode mode_ = Mode::collect;
   std::vector<NodeId> path_;
   std::vector<char> in_path_;
   std::vector<std::vector<EdgeId>>* out_ = nullptr;
   std::size_t expansions_ = 0;
   bool found_longer_ = false;
   bool exhausted_ = false;
};

}  // namespace

bool is_chordal(const Graph& g)
{
   const int n = g.node_count();
   std::vector<int> weight(n, 0), visit_time(n, -1);
   std::vector<NodeId> order;
   order.reserve(n);
   for (int step = 0; step < n; ++step) {
      NodeId best = -1;
      for (NodeId v = 0; v < n; ++v)
         if (visit_time[v] < 0 && (best < 0 || weight[v] > weight[best])) best = v;
      visit_time[best] = step;
      order.push_back(best);
      for (const Neighbor& nb : g.neighbors(best))
         if (visit_time[nb.node] < 0) ++weight[nb.node];
   }
   // The reverse MCS order is a perfect elimination ordering iff g is chordal.
   for (NodeId v : order) {
      NodeId latest = -1;
      for (const Neighbor& nb : g.neighbors(v))
         if (visit_time[nb.node] < visit_time[v] && (latest < 0 || visit_time[nb.node] > visit_time[latest]))
            latest = nb.node;
      if (latest < 0) continue;
      for (const Neighbor& nb : g.neighbors(v))
         if (nb.node != latest && visit_time[nb.node] < visit_time[v] && !g.adjacent(nb.node, latest))
            return false;
   }
   return true;
}

CycleSet enumerate_chordless_cycles(const Graph& g, int max_len, std::size_t search_budget)
{
   if (max_len < 3) throw std::invalid_argument("enumerate_chordless_cycles: max_len must be at least 3");
   CycleSet result;
   result.max_len = max_len;
   ChordlessSearch search(g, max_len, search_budget);
   search.enumerate(result.cycles);
   std::sort(result.cycles.begin(), result.cycles.end());

   if (max_len >= g.node_count() || is_chordal(g))
      result.complete = true;
   else
      result.complete = !search.longer_cycle_possible();
   return result;
}

bool is_feasible(const Graph& g, const EdgeLabeling& y, const CycleSet& cc)
{
   if (static_cast<int>(y.size()) != g.edge_count())
      throw std::invalid_argument("is_feasible: labeling has " + std::to_string(y.size()) + " entries, graph has " +
                                  std::to_string(g.edge_count()) + " edges");
   for (const auto& cycle : cc.cycles) {
      int cut = 0;
      for (EdgeId e : cycle) cut += y[e] != 0;
      if (cut == 1) return false;
   }
   return true;
}

EdgeLabeling labeling_from_decomposition(const Graph& g, const Decomposition& d)
{
   if (d.node_count() != g.node_count())
      throw std::invalid_argument("labeling_from_decomposition: decomposition covers " +
                                  std::to_string(d.node_count()) + " nodes, graph has " +
                                  std::to_string(g.node_count()));
   EdgeLabeling y(g.edge_count());
   for (EdgeId e = 0; e < g.edge_count(); ++e) y[e] = d[g.edge(e).u] != d[g.edge(e).v] ? 1 : 0;
   return y;
}

namespace {

struct UnionFind {
   std::vector<int> parent;
   explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
   int find(int x)
   {
      while (parent[x] != x) {
         parent[x] = parent[parent[x]];
         x = parent[x];
      }
      return x;
   }
   void merge(int a, int b)
   {
      a = find(a);
      b = find(b);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
   }
};

}  // namespace

Decomposition decomposition_from_labeling(const Graph& g, const EdgeLabeling& y)
{
   if (static_cast<int>(y.size()) != g.edge_count())
      throw std::invalid_argument("decomposition_from_labeling: labeling length mismatch");
   UnionFind uf(g.node_count());
   for (EdgeId e = 0; e < g.edge_count(); ++e)
      if (y[e] == 0) uf.merge(g.edge(e).u, g.edge(e).v);
   std::vector<int> roots(g.node_count());
   for (NodeId v = 0; v < g.node_count(); ++v) roots[v] = uf.find(v);
   return Decomposition(roots);
}

}  // namespace mccrf
