#pragma once

// Test-only reference implementations. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "mccrf/graph.hpp"

namespace mccrf::oracle {

/// All chordless cycles by brute force: every node subset of size >= 3 whose
/// induced subgraph is a single cycle (2-regular and connected).
inline std::set<std::vector<EdgeId>> chordless_cycles(const Graph& g, int max_len)
{
   const int n = g.node_count();
   std::set<std::vector<EdgeId>> out;
   for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      const int size = __builtin_popcount(mask);
      if (size < 3 || size > max_len) continue;
      std::vector<EdgeId> induced;
      std::vector<int> degree(n, 0);
      for (EdgeId e = 0; e < g.edge_count(); ++e) {
         const auto [u, v] = g.edge(e);
         if ((mask >> u & 1) && (mask >> v & 1)) {
            induced.push_back(e);
            ++degree[u];
            ++degree[v];
         }
      }
      if (static_cast<int>(induced.size()) != size) continue;
      bool two_regular = true;
      for (int v = 0; v < n; ++v)
         if ((mask >> v & 1) && degree[v] != 2) two_regular = false;
      if (!two_regular) continue;
      // connected: walk from the lowest node
      int start = __builtin_ctz(mask), prev = -1, cur = start, steps = 0;
      do {
         int next = -1;
         for (const Neighbor& nb : g.neighbors(cur))
            if ((mask >> nb.node & 1) && nb.node != prev) {
               next = nb.node;
               break;
            }
         prev = cur;
         cur = next;
         ++steps;
      } while (cur != start && steps <= size);
      if (steps != size) continue;
      std::sort(induced.begin(), induced.end());
      out.insert(induced);
   }
   return out;
}

/// Every set partition of {0..n-1} as label vectors.
inline void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& fn)
{
   std::vector<int> labels(n, 0);
   std::function<void(int, int)> rec = [&](int v, int blocks) {
      if (v == n) {
         fn(labels);
         return;
      }
      for (int b = 0; b <= blocks; ++b) {
         labels[v] = b;
         rec(v + 1, std::max(blocks, b + 1));
      }
   };
   rec(0, 0);
}

/// Edge labeling of a partition, computed without the library.
inline EdgeLabeling partition_labeling(const Graph& g, const std::vector<int>& labels)
{
   EdgeLabeling y(g.edge_count());
   for (EdgeId e = 0; e < g.edge_count(); ++e) y[e] = labels[g.edge(e).u] != labels[g.edge(e).v];
   return y;
}

inline EdgeLabeling bits_to_labeling(std::uint64_t bits, int m)
{
   EdgeLabeling y(m);
   for (int e = 0; e < m; ++e) y[e] = (bits >> e) & 1;
   return y;
}

/// Random simple graph with edge probability p.
inline Graph random_graph(int n, double p, std::mt19937_64& rng)
{
   std::bernoulli_distribution coin(p);
   std::vector<std::pair<NodeId, NodeId>> edges;
   for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
         if (coin(rng)) edges.emplace_back(u, v);
   return Graph(n, edges);
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h = 1e-6)
{
   const double x0 = x[i];
   x[i] = x0 + h;
   const double fp = f(x);
   x[i] = x0 - h;
   const double fm = f(x);
   return (fp - fm) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
/// being judged on pure rounding noise.
inline double relative_error(double a, double b, double floor = 1e-6)
{
   return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// One-sided paired test: lower bound of the 95% confidence interval of the
/// mean difference (Student t).
inline double paired_lower_bound(const std::vector<double>& diffs)
{
   const std::size_t n = diffs.size();
   double mean = 0.0;
   for (double d : diffs) mean += d;
   mean /= static_cast<double>(n);
   double var = 0.0;
   for (double d : diffs) var += (d - mean) * (d - mean);
   var /= static_cast<double>(n - 1);
   // one-sided 95% quantiles of Student t for df = 1..30
   static const double t95[] = {6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812,
                                1.796, 1.782, 1.771, 1.761, 1.753, 1.746, 1.740, 1.734, 1.729, 1.725,
                                1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697};
   const std::size_t df = n - 1;
   // conservative: beyond the table use the quantile at the next smaller tabulated df
   const double t = df <= 30 ? t95[df - 1] : (df <= 60 ? 1.697 : (df <= 120 ? 1.671 : 1.658));
   return mean - t * std::sqrt(var / static_cast<double>(n));
}

}  // namespace mccrf::oracle
