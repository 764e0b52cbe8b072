#include "mccrf/crf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mccrf {

namespace {

// Probability of label 1 given the energy gap d = E(0) - E(1); this is the
// two-label softmax over negative energies, evaluated without overflow.
double logistic(double d)
{
   if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
   const double z = std::exp(d);
   return z / (1.0 + z);
}

void check_unaries(const UnaryPotentials& u, int edge_count, const char* where)
{
   if (u.size() != edge_count)
      throw std::invalid_argument(std::string(where) + ": " + std::to_string(u.size()) + " unaries for " +
                                  std::to_string(edge_count) + " edges");
}

}  // namespace

double PatternPotentialTable::max_valid() const
{
   return std::max({gamma_000, gamma_110, gamma_111});
}

CliqueIndex::CliqueIndex(const CycleSet& cc, int edge_count) : partners_(edge_count), clique_count_(cc.size())
{
   for (const auto& c : cc.cycles) {
      if (c.size() != 3)
         throw std::invalid_argument("clique index: only 3-cycles are supported, got a cycle of length " +
                                     std::to_string(c.size()));
      for (EdgeId e : c)
         if (e < 0 || e >= edge_count) throw std::invalid_argument("clique index: edge id out of range");
      partners_[c[0]].push_back({c[1], c[2]});
      partners_[c[1]].push_back({c[0], c[2]});
      partners_[c[2]].push_back({c[0], c[1]});
   }
}

double energy(const EdgeLabeling& x, const UnaryPotentials& u, const PatternPotentialTable& pt, const CycleSet& cc)
{
   check_unaries(u, static_cast<int>(x.size()), "energy");
   double total = 0.0;
   for (std::size_t i = 0; i < x.size(); ++i) total += u.psi[i][x[i] ? 1 : 0];
   for (const auto& c : cc.cycles) {
      if (c.size() != 3) throw std::invalid_argument("energy: cycle of length " + std::to_string(c.size()));
      const int cut = (x[c[0]] != 0) + (x[c[1]] != 0) + (x[c[2]] != 0);
      total += pt.by_cut_count(cut);
   }
   return total;
}

std::vector<double> init_marginals(const UnaryPotentials& u)
{
   std::vector<double> q(u.psi.size());
   for (std::size_t i = 0; i < q.size(); ++i) q[i] = logistic(u.psi[i][0] - u.psi[i][1]);
   return q;
}

double high_order_message(std::span<const double> q, const PatternPotentialTable& pt, const CliqueIndex& cliques,
                          EdgeId i, int label)
{
   const double g[4] = {pt.by_cut_count(0), pt.by_cut_count(1), pt.by_cut_count(2), pt.by_cut_count(3)};
   double msg = 0.0;
   for (const auto& [j, k] : cliques.partners(i)) {
      const double pj[2] = {1.0 - q[j], q[j]};
      const double pk[2] = {1.0 - q[k], q[k]};
      double expected = 0.0;
      for (int a = 0; a < 2; ++a)
         for (int b = 0; b < 2; ++b) expected += pj[a] * pk[b] * g[label + a + b];
      msg += expected;
   }
   return msg;
}

std::vector<double> mean_field_step(std::span<const double> q, const UnaryPotentials& u,
                                    const PatternPotentialTable& pt, const CliqueIndex& cliques)
{
   check_unaries(u, cliques.edge_count(), "mean_field_step");
   if (static_cast<int>(q.size()) != cliques.edge_count())
      throw std::invalid_argument("mean_field_step: marginal length mismatch");
   std::vector<double> next(q.size());
   for (EdgeId i = 0; i < static_cast<EdgeId>(q.size()); ++i) {
      const double m0 = high_order_message(q, pt, cliques, i, 0);
      const double m1 = high_order_message(q, pt, cliques, i, 1);
      // Unary and message gaps are kept apart so that equal messages cancel exactly.
      next[i] = logistic((u.psi[i][0] - u.psi[i][1]) + (m0 - m1));
   }
   return next;
}

MarginalTrace run_inference(const UnaryPotentials& u, const PatternPotentialTable& pt, const CliqueIndex& cliques,
                            const InferenceConfig& cfg)
{
   if (cfg.iterations < 0) throw std::invalid_argument("run_inference: negative iteration count");
   check_unaries(u, cliques.edge_count(), "run_inference");
   MarginalTrace trace;
   trace.snapshots.reserve(cfg.iterations + 1);
   trace.snapshots.push_back(init_marginals(u));
   for (int t = 0; t < cfg.iterations; ++t)
      trace.snapshots.push_back(mean_field_step(trace.snapshots.back(), u, pt, cliques));
   return trace;
}

EdgeLabeling threshold_marginals(std::span<const double> q)
{
   EdgeLabeling y(q.size());
   for (std::size_t i = 0; i < q.size(); ++i) y[i] = q[i] > kHardThreshold ? 1 : 0;
   return y;
}

MarginalReport marginal_statistics(const MarginalTrace& trace, const EdgeLabeling& gt, std::span<const int> edge_tags)
{
   if (!edge_tags.empty() && edge_tags.size() != gt.size())
      throw std::invalid_argument("marginal_statistics: tag vector length mismatch");
   MarginalReport report;
   for (auto label : gt) report.join_edges += label == 0;
   for (const auto& q : trace.snapshots) {
      if (q.size() != gt.size()) throw std::invalid_argument("marginal_statistics: ground truth length mismatch");
      double sum = 0.0;
      std::map<int, std::pair<double, int>> tagged;
      for (std::size_t i = 0; i < q.size(); ++i) {
         if (gt[i] != 0) continue;
         sum += 1.0 - q[i];
         if (!edge_tags.empty()) {
            auto& [s, n] = tagged[edge_tags[i]];
            s += 1.0 - q[i];
            ++n;
         }
      }
      report.mean_join.push_back(report.join_edges > 0 ? sum / report.join_edges : 0.0);
      for (const auto& [tag, acc] : tagged) report.by_tag[tag].push_back(acc.first / acc.second);
   }
   return report;
}

std::optional<double> invalid_cycle_ratio(const EdgeLabeling& y, const CycleSet& cc)
{
   if (cc.empty()) return std::nullopt;
   std::size_t invalid = 0;
   for (const auto& c : cc.cycles) {
      int cut = 0;
      for (EdgeId e : c) cut += y.at(e) != 0;
      invalid += cut == 1;
   }
   return static_cast<double>(invalid) / static_cast<double>(cc.size());
}

std::vector<std::optional<double>> invalid_cycle_ratio(const MarginalTrace& trace, const CycleSet& cc)
{
   std::vector<std::optional<double>> ratios;
   ratios.reserve(trace.snapshots.size());
   for (const auto& q : trace.snapshots) ratios.push_back(invalid_cycle_ratio(threshold_marginals(q), cc));
   return ratios;
}

}  // namespace mccrf
