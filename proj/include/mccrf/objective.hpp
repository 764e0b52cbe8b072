#pragma once

#include <cstddef>
#include <vector>

#include "mccrf/graph.hpp"

namespace mccrf {

/// Per-edge cut cost on the log-odds scale; a positive cost makes cutting the
/// edge expensive.
using CostVector = std::vector<double>;

/// Weight of one violated cycle inequality in the cubic objective.
struct PenaltyConstant {
   double value = 0.0;
};

/// Smallest "large enough" penalty for the given costs: sum of |c_e| plus one.
PenaltyConstant default_penalty(const CostVector& c);

double multicut_cost(const CostVector& c, const EdgeLabeling& y);

/// Number of (cycle, edge) pairs where the edge is the only cut edge of the
/// cycle. A cycle contributes at most one.
int violation_count(const EdgeLabeling& y, const CycleSet& cc);

double cubic_objective(const CostVector& c, const EdgeLabeling& y, PenaltyConstant penalty, const CycleSet& cc);

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Counts inputs that fell outside [eps, 1-eps] and were clamped.
struct ClampStats {
   std::size_t clamped = 0;
};

/// log((1-p)/p) with p clamped to [1e-7, 1-1e-7].
double cost_from_probability(double p, ClampStats* stats = nullptr);

CostVector costs_from_probabilities(const std::vector<double>& p, ClampStats* stats = nullptr);

}  // namespace mccrf
