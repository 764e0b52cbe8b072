#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "mccrf/graph.hpp"
#include "mccrf/objective.hpp"

namespace mccrf {

struct SolverResult {
   Decomposition decomposition;
   /// multicut_cost of the decomposition's labeling under the costs the solver used.
   double objective = 0.0;
   std::string method;
   double elapsed_seconds = 0.0;
};

/// Largest node count exact_solve accepts (Bell(12) ~ 4.2M partitions).
inline constexpr int kExactNodeLimit = 12;

/// Global optimum by enumerating every set partition in canonical
/// (restricted-growth) order; the first partition attaining the optimum wins.
/// Throws std::length_error above kExactNodeLimit nodes.
SolverResult exact_solve(const Graph& g, const CostVector& c);

/// Greedy additive edge contraction from singletons.
SolverResult greedy_join(const Graph& g, const CostVector& c);

struct KlConfig {
   /// Maximum number of accepted moves; 0 selects 50 * |V|.
   std::size_t move_budget = 0;
};

/// First-improvement local search over node relocations (to an adjacent
/// component or a new singleton) and merges of adjacent components.
SolverResult kl_refine(const Graph& g, const CostVector& c, const Decomposition& start, const KlConfig& cfg = {});

enum class RepairCosts { marginals, original };

/// Thresholds q at 0.5, takes connected components of the join edges and
/// refines them with kl_refine. `original` must hold per-edge costs when
/// source == RepairCosts::original.
SolverResult round_and_repair(const Graph& g, std::span<const double> q, RepairCosts source,
                              const CostVector* original = nullptr, const KlConfig& cfg = {});

}  // namespace mccrf
