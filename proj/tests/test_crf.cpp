#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mccrf/crf.hpp"
#include "mccrf/objective.hpp"
#include "oracles.hpp"

using namespace mccrf;

namespace {

UnaryPotentials random_unaries(int m, std::mt19937_64& rng, double scale = 2.0)
{
   std::normal_distribution<double> normal(0.0, scale);
   UnaryPotentials u;
   u.psi.resize(m);
   for (auto& p : u.psi) p = {normal(rng), normal(rng)};
   return u;
}

PatternPotentialTable random_table(std::mt19937_64& rng)
{
   std::normal_distribution<double> normal(0.0, 1.0);
   return {normal(rng), normal(rng), normal(rng), normal(rng)};
}

// Literal expansion of the pattern-potential update for one clique: sum over
// the recognized patterns compatible with x_i = l, plus gamma_max times the
// remaining probability mass.
double clique_message_reference(double qj, double qk, const PatternPotentialTable& pt, int l)
{
   struct Pattern {
      int xi, xj, xk;
      double gamma;
   };
   const std::vector<Pattern> recognized{
      {0, 0, 0, pt.gamma_000}, {1, 1, 0, pt.gamma_110}, {1, 0, 1, pt.gamma_110},
      {0, 1, 1, pt.gamma_110}, {1, 1, 1, pt.gamma_111},
   };
   double expected = 0.0, mass = 0.0;
   for (const auto& p : recognized) {
      if (p.xi != l) continue;
      const double w = (p.xj ? qj : 1.0 - qj) * (p.xk ? qk : 1.0 - qk);
      expected += w * p.gamma;
      mass += w;
   }
   return expected + pt.gamma_max * (1.0 - mass);
}

}  // namespace

TEST(PatternTable, ClassesByCutCount)
{
   const PatternPotentialTable pt{1.0, 2.0, 3.0, 9.0};
   EXPECT_EQ(pt.by_cut_count(0), 1.0);
   EXPECT_EQ(pt.by_cut_count(1), 9.0);
   EXPECT_EQ(pt.by_cut_count(2), 2.0);
   EXPECT_EQ(pt.by_cut_count(3), 3.0);
   EXPECT_EQ(pt.max_valid(), 3.0);
}

TEST(CliqueIndexTest, RejectsLongCycles)
{
   CycleSet cc;
   cc.cycles = {{0, 1, 2, 3}};
   EXPECT_THROW(CliqueIndex(cc, 4), std::invalid_argument);
}

TEST(Energy, UnaryOnlyWhenPotentialsVanish)
{
   const Graph k4 = complete_graph(4);
   const auto cc = enumerate_chordless_cycles(k4, 3);
   std::mt19937_64 rng(3);
   const auto u = random_unaries(k4.edge_count(), rng);
   const EdgeLabeling x{1, 0, 1, 1, 0, 0};
   double unary = 0.0;
   for (int i = 0; i < 6; ++i) unary += u.psi[i][x[i]];
   EXPECT_DOUBLE_EQ(energy(x, u, PatternPotentialTable{}, cc), unary);
}

TEST(Energy, SingleInvalidCliqueCostsGammaMax)
{
   const Graph k3 = complete_graph(3);
   const auto cc = enumerate_chordless_cycles(k3, 3);
   UnaryPotentials zero;
   zero.psi.assign(3, {0.0, 0.0});
   EXPECT_EQ(energy({1, 0, 0}, zero, {0.1, 0.2, 0.3, 7.5}, cc), 7.5);
}

TEST(Energy, RejectsNonTriangles)
{
   CycleSet cc;
   cc.cycles = {{0, 1, 2, 3}};
   UnaryPotentials u;
   u.psi.assign(4, {0.0, 0.0});
   EXPECT_THROW(energy({0, 0, 0, 0}, u, {}, cc), std::invalid_argument);
}

TEST(Energy, CubicPenaltyCorrespondenceOnK4)
{
   const Graph k4 = complete_graph(4);
   const auto cc = enumerate_chordless_cycles(k4, 3);
   std::mt19937_64 rng(8);
   std::normal_distribution<double> normal;
   for (int trial = 0; trial < 20; ++trial) {
      UnaryPotentials u = random_unaries(k4.edge_count(), rng);
      const double C = 3.0 + trial;
      CostVector c(k4.edge_count());
      double constant = 0.0;
      for (int e = 0; e < k4.edge_count(); ++e) {
         c[e] = u.psi[e][1] - u.psi[e][0];
         constant += u.psi[e][0];
      }
      for (std::uint64_t bits = 0; bits < 64; ++bits) {
         const auto x = oracle::bits_to_labeling(bits, 6);
         double unary = 0.0;
         for (int i = 0; i < 6; ++i) unary += u.psi[i][x[i]];
         const double e = energy(x, u, PatternPotentialTable::cubic_penalty(C), cc);
         ASSERT_NEAR(e - unary, C * violation_count(x, cc), 1e-12);
         ASSERT_NEAR(e, cubic_objective(c, x, {C}, cc) + constant, 1e-12);
      }
   }
}

TEST(InitMarginals, Examples)
{
   UnaryPotentials u;
   u.psi = {{1.3, 1.3}, {0.0, std::log(9.0)}, {-800.0, 800.0}, {800.0, -800.0}};
   const auto q = init_marginals(u);
   EXPECT_DOUBLE_EQ(q[0], 0.5);
   EXPECT_NEAR(q[1], 0.1, 1e-15);
   EXPECT_EQ(q[2], 0.0);
   EXPECT_EQ(q[3], 1.0);
   for (double s : {-3.0, -0.4, 0.0, 2.5}) {
      UnaryPotentials one;
      one.psi = {{0.25, 0.25 + s}};
      EXPECT_NEAR(init_marginals(one)[0], 1.0 / (1.0 + std::exp(s)), 1e-15);
   }
}

TEST(HighOrderMessage, ConstantTableGivesCliqueCount)
{
   const Graph k5 = complete_graph(5);
   const CliqueIndex cliques(enumerate_chordless_cycles(k5, 3), k5.edge_count());
   std::mt19937_64 rng(1);
   std::uniform_real_distribution<double> uni;
   std::vector<double> q(k5.edge_count());
   for (auto& x : q) x = uni(rng);
   for (EdgeId i = 0; i < k5.edge_count(); ++i)
      for (int l : {0, 1}) EXPECT_NEAR(high_order_message(q, PatternPotentialTable::uniform(1.5), cliques, i, l), 1.5 * 3, 1e-12);
}

TEST(HighOrderMessage, DegenerateMarginalsSelectOnePattern)
{
   const Graph k3 = complete_graph(3);
   const CliqueIndex cliques(enumerate_chordless_cycles(k3, 3), 3);
   const PatternPotentialTable pt{0.3, 0.2, -0.5, 2.0};
   const std::vector<double> q{0.37, 1.0, 1.0};
   EXPECT_EQ(high_order_message(q, pt, cliques, 0, 0), 0.2);
   EXPECT_EQ(high_order_message(q, pt, cliques, 0, 1), -0.5);
}

TEST(HighOrderMessage, HandExpandedTriangle)
{
   const Graph k3 = complete_graph(3);
   const CliqueIndex cliques(enumerate_chordless_cycles(k3, 3), 3);
   const PatternPotentialTable pt{0.0, 0.2, -0.5, 2.0};
   const std::vector<double> q{0.5, 0.8, 0.6};
   // l = 0: 0.2*0.4*0 + 0.8*0.6*0.2 + 2.0*(1 - 0.08 - 0.48) = 0.976
   // l = 1: (0.8*0.4 + 0.2*0.6)*0.2 + 0.48*(-0.5) + 2.0*(1 - 0.92) = 0.008
   EXPECT_NEAR(clique_message_reference(0.8, 0.6, pt, 0), 0.976, 1e-12);
   EXPECT_NEAR(clique_message_reference(0.8, 0.6, pt, 1), 0.008, 1e-12);
   EXPECT_NEAR(high_order_message(q, pt, cliques, 0, 0), 0.976, 1e-12);
   EXPECT_NEAR(high_order_message(q, pt, cliques, 0, 1), 0.008, 1e-12);
}

TEST(HighOrderMessage, MatchesReferenceExpansionOnK6)
{
   const Graph k6 = complete_graph(6);
   const CliqueIndex cliques(enumerate_chordless_cycles(k6, 3), k6.edge_count());
   std::mt19937_64 rng(77);
   std::uniform_real_distribution<double> uni;
   for (int trial = 0; trial < 20; ++trial) {
      const auto pt = random_table(rng);
      std::vector<double> q(k6.edge_count());
      for (auto& x : q) x = uni(rng);
      for (EdgeId i = 0; i < k6.edge_count(); ++i)
         for (int l : {0, 1}) {
            double ref = 0.0;
            for (const auto& [j, k] : cliques.partners(i)) ref += clique_message_reference(q[j], q[k], pt, l);
            ASSERT_NEAR(high_order_message(q, pt, cliques, i, l), ref, 1e-12);
         }
   }
}

TEST(MeanFieldStep, UniformTableIsNeutral)
{
   const Graph k6 = complete_graph(6);
   const CliqueIndex cliques(enumerate_chordless_cycles(k6, 3), k6.edge_count());
   std::mt19937_64 rng(4);
   const auto u = random_unaries(k6.edge_count(), rng);
   const auto q0 = init_marginals(u);
   std::vector<double> perturbed(q0.size(), 0.3);
   EXPECT_EQ(mean_field_step(perturbed, u, PatternPotentialTable::uniform(-0.7), cliques), q0);
}

TEST(MeanFieldStep, LoneCutEdgeIsPulledToJoin)
{
   const Graph k3 = complete_graph(3);
   const CliqueIndex cliques(enumerate_chordless_cycles(k3, 3), 3);
   UnaryPotentials u;
   u.psi = {{0.0, -0.85}, {0.0, 6.0}, {0.0, 6.5}};  // edge 0 leans cut, the others join
   const PatternPotentialTable pt{0.0, 0.0, 0.0, 2.0};
   const auto trace = run_inference(u, pt, cliques, {6});

   // scalar fixed-point iteration written against the energy definition
   auto potential = [&](int cuts) { return cuts == 1 ? 2.0 : 0.0; };
   std::vector<double> q(3);
   for (int i = 0; i < 3; ++i) q[i] = 1.0 / (1.0 + std::exp(u.psi[i][1] - u.psi[i][0]));
   for (int t = 1; t <= 6; ++t) {
      std::vector<double> next(3);
      for (int i = 0; i < 3; ++i) {
         const int j = (i + 1) % 3, k = (i + 2) % 3;
         double e[2];
         for (int l = 0; l < 2; ++l) {
            e[l] = u.psi[i][l];
            for (int a = 0; a < 2; ++a)
               for (int b = 0; b < 2; ++b)
                  e[l] += (a ? q[j] : 1 - q[j]) * (b ? q[k] : 1 - q[k]) * potential(l + a + b);
         }
         next[i] = std::exp(-e[1]) / (std::exp(-e[0]) + std::exp(-e[1]));
      }
      q = next;
      for (int i = 0; i < 3; ++i) ASSERT_NEAR(trace.snapshots[t][i], q[i], 1e-12);
      // the isolated cut flips to join and stays there
      EXPECT_LT(trace.snapshots[t][0], 0.3);
   }
}

TEST(MeanFieldStep, SnapshotsStayNormalized)
{
   const Graph k6 = complete_graph(6);
   const CliqueIndex cliques(enumerate_chordless_cycles(k6, 3), k6.edge_count());
   std::mt19937_64 rng(9);
   for (int trial = 0; trial < 50; ++trial) {
      const auto u = random_unaries(k6.edge_count(), rng, 20.0);
      auto pt = random_table(rng);
      pt.gamma_max *= 30.0;
      const auto trace = run_inference(u, pt, cliques, {4});
      for (const auto& snap : trace.snapshots)
         for (double q : snap) {
            ASSERT_TRUE(q >= 0.0 && q <= 1.0);
            ASSERT_NEAR(q + (1.0 - q), 1.0, 1e-12);
         }
   }
}

TEST(RunInference, ZeroIterationsIsInit)
{
   const Graph k4 = complete_graph(4);
   const CliqueIndex cliques(enumerate_chordless_cycles(k4, 3), k4.edge_count());
   std::mt19937_64 rng(2);
   const auto u = random_unaries(6, rng);
   const auto trace = run_inference(u, {1, 2, 3, 4}, cliques, {0});
   ASSERT_EQ(trace.snapshots.size(), 1u);
   EXPECT_EQ(trace.final(), init_marginals(u));
   EXPECT_EQ(InferenceConfig{}.iterations, 3);
   EXPECT_THROW(run_inference(u, {}, cliques, {-1}), std::invalid_argument);
}

TEST(RunInference, Deterministic)
{
   const Graph k6 = complete_graph(6);
   const CliqueIndex cliques(enumerate_chordless_cycles(k6, 3), k6.edge_count());
   std::mt19937_64 rng(6);
   const auto u = random_unaries(k6.edge_count(), rng);
   const auto pt = random_table(rng);
   EXPECT_EQ(run_inference(u, pt, cliques, {3}), run_inference(u, pt, cliques, {3}));
}

TEST(RunInference, EquivariantUnderEdgeRelabeling)
{
   const int n = 6;
   const Graph g = complete_graph(n);
   std::vector<std::pair<NodeId, NodeId>> shuffled;
   for (const auto& e : g.edges()) shuffled.emplace_back(e.v, e.u);
   std::mt19937_64 rng(12);
   std::shuffle(shuffled.begin(), shuffled.end(), rng);
   const Graph h(n, shuffled);

   const auto u = random_unaries(g.edge_count(), rng);
   const auto pt = random_table(rng);
   UnaryPotentials uh;
   uh.psi.resize(h.edge_count());
   for (EdgeId e = 0; e < h.edge_count(); ++e) uh.psi[e] = u.psi[g.find_edge(h.edge(e).u, h.edge(e).v)];

   const auto tg = run_inference(u, pt, CliqueIndex(enumerate_chordless_cycles(g, 3), g.edge_count()), {3});
   const auto th = run_inference(uh, pt, CliqueIndex(enumerate_chordless_cycles(h, 3), h.edge_count()), {3});
   for (int t = 0; t <= 3; ++t)
      for (EdgeId e = 0; e < h.edge_count(); ++e)
         ASSERT_NEAR(th.snapshots[t][e], tg.snapshots[t][g.find_edge(h.edge(e).u, h.edge(e).v)], 1e-14);
}

TEST(MarginalStatistics, PerfectUnaries)
{
   MarginalTrace trace;
   trace.snapshots = {{0.0, 1.0, 0.0}, {0.2, 0.9, 0.4}};
   const auto report = marginal_statistics(trace, {0, 1, 0});
   EXPECT_EQ(report.join_edges, 2);
   EXPECT_EQ(report.mean_join[0], 1.0);
   EXPECT_NEAR(report.mean_join[1], 0.7, 1e-15);
}

TEST(MarginalStatistics, BucketsByTag)
{
   MarginalTrace trace;
   trace.snapshots = {{0.1, 0.3, 0.8, 0.5}};
   const std::vector<int> tags{0, 1, 1, 0};
   const auto report = marginal_statistics(trace, {0, 0, 1, 0}, tags);
   EXPECT_NEAR(report.by_tag.at(0)[0], (0.9 + 0.5) / 2, 1e-15);
   EXPECT_NEAR(report.by_tag.at(1)[0], 0.7, 1e-15);
   EXPECT_THROW(marginal_statistics(trace, {0, 0, 1, 0}, std::vector<int>{1}), std::invalid_argument);
}

TEST(InvalidCycleRatio, Examples)
{
   const Graph k3 = complete_graph(3);
   const auto cc = enumerate_chordless_cycles(k3, 3);
   EXPECT_EQ(invalid_cycle_ratio(EdgeLabeling{1, 1, 0}, cc), 0.0);
   MarginalTrace trace;
   trace.snapshots = {{0.9, 0.1, 0.1}, {0.9, 0.6, 0.1}};
   const auto r = invalid_cycle_ratio(trace, cc);
   EXPECT_EQ(r[0], 1.0);
   EXPECT_EQ(r[1], 0.0);
   EXPECT_FALSE(invalid_cycle_ratio(EdgeLabeling{}, CycleSet{}).has_value());
   // exactly 0.5 is not a cut
   EXPECT_EQ(threshold_marginals(std::vector<double>{0.5, 0.5000001}), (EdgeLabeling{0, 1}));
}
