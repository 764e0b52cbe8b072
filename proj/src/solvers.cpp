#include "mccrf/solvers.hpp"

#include "mccrf/crf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mccrf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
   return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_costs(const Graph& g, const CostVector& c, const char* where)
{
   if (static_cast<int>(c.size()) != g.edge_count())
      throw std::invalid_argument(std::string(where) + ": " + std::to_string(c.size()) + " costs for " +
                                  std::to_string(g.edge_count()) + " edges");
   for (double ce : c)
      if (!std::isfinite(ce)) throw std::invalid_argument(std::string(where) + ": non-finite cost");
}

double improvement_tolerance(const CostVector& c)
{
   double m = 0.0;
   for (double ce : c) m = std::max(m, std::abs(ce));
   return 1e-12 * (1.0 + m);
}

SolverResult finish(const Graph& g, const CostVector& c, std::span<const int> labels, const char* method,
                    Clock::time_point t0)
{
   const EdgeLabeling y = labeling_from_decomposition(g, Decomposition(labels));
   SolverResult r;
   r.decomposition = decomposition_from_labeling(g, y);
   r.objective = multicut_cost(c, y);
   r.method = method;
   r.elapsed_seconds = seconds_since(t0);
   return r;
}

class PartitionEnumerator {
public:
   PartitionEnumerator(const Graph& g, const CostVector& c) : n_(g.node_count()), lower_(n_), labels_(n_, 0)
   {
      for (EdgeId e = 0; e < g.edge_count(); ++e) lower_[g.edge(e).v].push_back({g.edge(e).u, c[e]});
      double total = 0.0;
      for (double ce : c) total += std::abs(ce);
      tolerance_ = 1e-12 * (1.0 + total);
   }

   std::vector<int> solve()
   {
      best_labels_.assign(n_, 0);
      if (n_ > 0) visit(0, 0.0, 0);
      return best_labels_;
   }

private:
   struct Lower {
      NodeId node;
      double cost;
   };

   void visit(int v, double partial, int blocks)
   {
      if (v == n_) {
         if (!found_ || partial < best_ - tolerance_) {
            found_ = true;
            best_ = partial;
            best_labels_ = labels_;
         }
         return;
      }
      for (int b = 0; b <= blocks; ++b) {
         double delta = 0.0;
         for (const auto& [u, cost] : lower_[v])
            if (labels_[u] != b) delta += cost;
         labels_[v] = b;
         visit(v + 1, partial + delta, std::max(blocks, b + 1));
      }
   }

   int n_;
   std::vector<std::vector<Lower>> lower_;
   std::vector<int> labels_;
   std::vector<int> best_labels_;
   double best_ = 0.0;
   double tolerance_ = 0.0;
   bool found_ = false;
};

}  // namespace

SolverResult exact_solve(const Graph& g, const CostVector& c)
{
   if (g.node_count() > kExactNodeLimit)
      throw std::length_error("exact_solve: " + std::to_string(g.node_count()) + " nodes exceeds the enumeration bound of " +
                              std::to_string(kExactNodeLimit));
   check_costs(g, c, "exact_solve");
   const auto t0 = Clock::now();
   PartitionEnumerator search(g, c);
   const auto labels = search.solve();
   return finish(g, c, labels, "exact", t0);
}

SolverResult greedy_join(const Graph& g, const CostVector& c)
{
   check_costs(g, c, "greedy_join");
   const auto t0 = Clock::now();
   const int n = g.node_count();
   // weight[a][b]: total cost of edges between components a and b, keyed by
   // the smallest node of each component.
   std::vector<std::map<int, double>> weight(n);
   for (EdgeId e = 0; e < g.edge_count(); ++e) {
      weight[g.edge(e).u][g.edge(e).v] += c[e];
      weight[g.edge(e).v][g.edge(e).u] += c[e];
   }
   std::vector<int> owner(n);
   for (int v = 0; v < n; ++v) owner[v] = v;
   std::vector<char> alive(n, 1);

   while (true) {
      double best = 0.0;
      int keep = -1, drop = -1;
      for (int a = 0; a < n; ++a) {
         if (!alive[a]) continue;
         for (const auto& [b, w] : weight[a])
            if (b > a && w > best) {
               best = w;
               keep = a;
               drop = b;
            }
      }
      if (keep < 0) break;

      for (const auto& [x, w] : weight[drop]) {
         if (x == keep) continue;
         weight[keep][x] += w;
         weight[x][keep] += w;
         weight[x].erase(drop);
      }
      weight[keep].erase(drop);
      weight[drop].clear();
      alive[drop] = 0;
      for (auto& o : owner)
         if (o == drop) o = keep;
   }
   return finish(g, c, owner, "greedy_join", t0);
}

namespace {

class LocalSearch {
public:
   LocalSearch(const Graph& g, const CostVector& c, const Decomposition& start)
      : g_(g), c_(c), labels_(start.component_ids()), tolerance_(improvement_tolerance(c))
   {
      canonicalize();
   }

   const std::vector<int>& labels() const { return labels_; }

   // Tries every relocation of v in canonical target order; applies the first
   // strictly improving one.
   bool relocate(NodeId v)
   {
      const int k = component_count_;
      weight_to_.assign(k, 0.0);
      touched_.assign(k, 0);
      std::vector<int> targets;
      for (const Neighbor& nb : g_.neighbors(v)) {
         const int comp = labels_[nb.node];
         weight_to_[comp] += c_[nb.edge];
         if (!touched_[comp]) {
            touched_[comp] = 1;
            targets.push_back(comp);
         }
      }
      std::sort(targets.begin(), targets.end());
      const int own = labels_[v];
      for (int comp : targets) {
         if (comp == own) continue;
         if (weight_to_[own] - weight_to_[comp] < -tolerance_) {
            labels_[v] = comp;
            canonicalize();
            return true;
         }
      }
      if (size_[own] > 1 && weight_to_[own] < -tolerance_) {
         labels_[v] = k;
         canonicalize();
         return true;
      }
      return false;
   }

   // Merges the first pair of adjacent components (in canonical order) whose
   // inter-component cost is positive.
   bool merge()
   {
      std::map<std::pair<int, int>, double> between;
      for (EdgeId e = 0; e < g_.edge_count(); ++e) {
         const int a = labels_[g_.edge(e).u], b = labels_[g_.edge(e).v];
         if (a != b) between[{std::min(a, b), std::max(a, b)}] += c_[e];
      }
      for (const auto& [pair, w] : between)
         if (w > tolerance_) {
            for (auto& l : labels_)
               if (l == pair.second) l = pair.first;
            canonicalize();
            return true;
         }
      return false;
   }

private:
   void canonicalize()
   {
      Decomposition d(labels_);
      labels_ = d.component_ids();
      component_count_ = d.component_count();
      size_.assign(component_count_, 0);
      for (int l : labels_) ++size_[l];
   }

   const Graph& g_;
   const CostVector& c_;
   std::vector<int> labels_;
   std::vector<int> size_;
   std::vector<double> weight_to_;
   std::vector<char> touched_;
   int component_count_ = 0;
   double tolerance_;
};

}  // namespace

SolverResult kl_refine(const Graph& g, const CostVector& c, const Decomposition& start, const KlConfig& cfg)
{
   check_costs(g, c, "kl_refine");
   if (start.node_count() != g.node_count()) throw std::invalid_argument("kl_refine: start covers a different node set");
   const auto t0 = Clock::now();
   const std::size_t budget = cfg.move_budget ? cfg.move_budget : 50 * static_cast<std::size_t>(g.node_count());
   const double start_objective = multicut_cost(c, labeling_from_decomposition(g, start));

   LocalSearch search(g, c, start);
   std::size_t moves = 0;
   bool improved = true;
   while (improved && moves < budget) {
      improved = false;
      for (NodeId v = 0; v < g.node_count() && moves < budget; ++v)
         if (search.relocate(v)) {
            improved = true;
            ++moves;
         }
      if (moves < budget && search.merge()) {
         improved = true;
         ++moves;
      }
   }

   SolverResult r = finish(g, c, search.labels(), "kl", t0);
   if (r.objective > start_objective) {
      // Accumulated rounding in the move deltas; never hand back a worse point.
      r.decomposition = decomposition_from_labeling(g, labeling_from_decomposition(g, start));
      r.objective = start_objective;
   }
   return r;
}

SolverResult round_and_repair(const Graph& g, std::span<const double> q, RepairCosts source,
                              const CostVector* original, const KlConfig& cfg)
{
   if (static_cast<int>(q.size()) != g.edge_count()) throw std::invalid_argument("round_and_repair: marginal length mismatch");
   const auto t0 = Clock::now();
   const Decomposition components = decomposition_from_labeling(g, threshold_marginals(q));
   CostVector costs;
   if (source == RepairCosts::original) {
      if (!original) throw std::invalid_argument("round_and_repair: original costs requested but not supplied");
      costs = *original;
   } else {
      costs = costs_from_probabilities(std::vector<double>(q.begin(), q.end()));
   }
   SolverResult r = kl_refine(g, costs, components, cfg);
   r.method = source == RepairCosts::original ? "repair+kl(original)" : "repair+kl(marginals)";
   r.elapsed_seconds = seconds_since(t0);
   return r;
}

}  // namespace mccrf
