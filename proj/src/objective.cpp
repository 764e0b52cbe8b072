#include "mccrf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mccrf {

PenaltyConstant default_penalty(const CostVector& c)
{
   double total = 0.0;
   for (double ce : c) total += std::abs(ce);
   return {total + 1.0};
}

double multicut_cost(const CostVector& c, const EdgeLabeling& y)
{
   if (c.size() != y.size())
      throw std::invalid_argument("multicut_cost: " + std::to_string(c.size()) + " costs vs " +
                                  std::to_string(y.size()) + " labels");
   double total = 0.0;
   for (std::size_t e = 0; e < c.size(); ++e)
      if (y[e]) total += c[e];
   return total;
}

int violation_count(const EdgeLabeling& y, const CycleSet& cc)
{
   int count = 0;
   for (const auto& cycle : cc.cycles) {
      int cut = 0;
      for (EdgeId e : cycle) cut += y.at(e) != 0;
      count += cut == 1;
   }
   return count;
}

double cubic_objective(const CostVector& c, const EdgeLabeling& y, PenaltyConstant penalty, const CycleSet& cc)
{
   if (penalty.value < 0.0) throw std::invalid_argument("cubic_objective: negative penalty constant");
   const int violations = violation_count(y, cc);
   const double base = multicut_cost(c, y);
   return violations == 0 ? base : base + penalty.value * violations;
}

double cost_from_probability(double p, ClampStats* stats)
{
   if (std::isnan(p)) throw std::domain_error("cost_from_probability: NaN probability");
   const double lo = kProbabilityEpsilon, hi = 1.0 - kProbabilityEpsilon;
   if (p < lo || p > hi) {
      if (stats) ++stats->clamped;
      p = std::clamp(p, lo, hi);
   }
   return std::log((1.0 - p) / p);
}

CostVector costs_from_probabilities(const std::vector<double>& p, ClampStats* stats)
{
   CostVector c(p.size());
   std::transform(p.begin(), p.end(), c.begin(), [stats](double pe) { return cost_from_probability(pe, stats); });
   return c;
}

}  // namespace mccrf
