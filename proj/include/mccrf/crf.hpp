#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mccrf/graph.hpp"

namespace mccrf {

/// Per-edge energies (psi(x=0), psi(x=1)).
struct UnaryPotentials {
   std::vector<std::array<double, 2>> psi;

   int size() const { return static_cast<int>(psi.size()); }
};

/// Pattern-based potential over 3-cliques. Patterns are permutation-invariant
/// classes keyed by the number of cut edges in the clique: 0-0-0, 1-1-0 and
/// 1-1-1 are recognized; the single-cut class 1-0-0 always costs gamma_max.
///
/// The same struct carries parameter gradients.
struct PatternPotentialTable {
   double gamma_000 = 0.0;
   double gamma_110 = 0.0;
   double gamma_111 = 0.0;
   double gamma_max = 0.0;

   /// Potential of a clique with the given number of cut edges (0..3).
   double by_cut_count(int cut) const
   {
      switch (cut) {
         case 0: return gamma_000;
         case 1: return gamma_max;
         case 2: return gamma_110;
         default: return gamma_111;
      }
   }
   double& by_cut_count(int cut)
   {
      switch (cut) {
         case 0: return gamma_000;
         case 1: return gamma_max;
         case 2: return gamma_110;
         default: return gamma_111;
      }
   }
   double max_valid() const;

   static PatternPotentialTable uniform(double g) { return {g, g, g, g}; }
   /// gamma_p = 0 for the recognized patterns, gamma_max = C: the cubic penalty.
   static PatternPotentialTable cubic_penalty(double c) { return {0.0, 0.0, 0.0, c}; }

   bool operator==(const PatternPotentialTable&) const = default;
};

/// For every edge, the two partner edges of each 3-clique that contains it.
class CliqueIndex {
public:
   CliqueIndex() = default;
   /// Throws std::invalid_argument for cycles whose length is not 3.
   CliqueIndex(const CycleSet& cc, int edge_count);

   int edge_count() const { return static_cast<int>(partners_.size()); }
   std::size_t clique_count() const { return clique_count_; }
   std::span<const std::array<EdgeId, 2>> partners(EdgeId e) const { return partners_[e]; }

private:
   std::vector<std::vector<std::array<EdgeId, 2>>> partners_;
   std::size_t clique_count_ = 0;
};

struct InferenceConfig {
   int iterations = 3;
};

/// Probability of label 1 (cut) per edge, one snapshot per iteration 0..T.
/// Q(0) is stored implicitly as 1 - q.
struct MarginalTrace {
   std::vector<std::vector<double>> snapshots;

   int iterations() const { return static_cast<int>(snapshots.size()) - 1; }
   const std::vector<double>& final() const { return snapshots.back(); }
   bool operator==(const MarginalTrace&) const = default;
};

/// Sum of unary and clique potentials of a hard labeling.
double energy(const EdgeLabeling& x, const UnaryPotentials& u, const PatternPotentialTable& pt, const CycleSet& cc);

/// Softmax over negative unary energies.
std::vector<double> init_marginals(const UnaryPotentials& u);

/// Expected clique potential seen by edge i under label l, summed over the
/// cliques containing i, with partner edges distributed per q.
double high_order_message(std::span<const double> q, const PatternPotentialTable& pt, const CliqueIndex& cliques,
                          EdgeId i, int label);

/// One synchronous update: every edge reads the previous snapshot.
std::vector<double> mean_field_step(std::span<const double> q, const UnaryPotentials& u,
                                    const PatternPotentialTable& pt, const CliqueIndex& cliques);

MarginalTrace run_inference(const UnaryPotentials& u, const PatternPotentialTable& pt, const CliqueIndex& cliques,
                            const InferenceConfig& cfg);

/// Cut decision used for every hard labeling derived from marginals.
inline constexpr double kHardThreshold = 0.5;

EdgeLabeling threshold_marginals(std::span<const double> q);

struct MarginalReport {
   /// Mean Q(join) over ground-truth join edges, per iteration.
   std::vector<double> mean_join;
   /// Same statistic restricted to edges carrying each tag.
   std::map<int, std::vector<double>> by_tag;
   int join_edges = 0;
};

MarginalReport marginal_statistics(const MarginalTrace& trace, const EdgeLabeling& gt,
                                   std::span<const int> edge_tags = {});

/// Fraction of cliques whose hard labeling has exactly one cut edge; absent
/// for an empty cycle set.
std::optional<double> invalid_cycle_ratio(const EdgeLabeling& y, const CycleSet& cc);
std::vector<std::optional<double>> invalid_cycle_ratio(const MarginalTrace& trace, const CycleSet& cc);

}  // namespace mccrf
