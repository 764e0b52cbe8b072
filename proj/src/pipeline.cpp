#include "mccrf/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "mccrf/objective.hpp"

namespace mccrf {

using nlohmann::json;
namespace fs = std::filesystem;

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn)
{
   const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
   if (workers <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
   }
   std::atomic<std::size_t> next{0};
   std::exception_ptr error;
   std::mutex error_mutex;
   std::vector<std::thread> pool;
   pool.reserve(workers);
   for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
         for (std::size_t i = next++; i < count; i = next++) {
            try {
               fn(i);
            } catch (...) {
               std::lock_guard lock(error_mutex);
               if (!error) error = std::current_exception();
            }
         }
      });
   for (auto& t : pool) t.join();
   if (error) std::rethrow_exception(error);
}

std::vector<fs::path> list_instance_files(const fs::path& dir)
{
   std::vector<fs::path> files;
   for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
   std::sort(files.begin(), files.end());
   return files;
}

std::vector<fs::path> resolve_instances(const fs::path& path)
{
   if (fs::is_directory(path)) {
      auto files = list_instance_files(path);
      if (files.empty()) throw DataError(path.string() + ": directory contains no instance files");
      return files;
   }
   if (!fs::exists(path)) throw DataError(path.string() + ": no such file or directory");
   return {path};
}

std::string to_string(Heuristic h)
{
   switch (h) {
      case Heuristic::gaec: return "gaec";
      case Heuristic::kl: return "kl";
      default: return "repair";
   }
}

Heuristic parse_heuristic(const std::string& s)
{
   if (s == "gaec") return Heuristic::gaec;
   if (s == "kl") return Heuristic::kl;
   if (s == "repair") return Heuristic::repair;
   throw std::invalid_argument("unknown heuristic '" + s + "' (expected gaec, kl or repair)");
}

json to_json(const EvalOptions& opt)
{
   json heuristics = json::array();
   for (auto h : opt.heuristics) heuristics.push_back(to_string(h));
   json j = {{"iterations", opt.iterations},
             {"heuristics", heuristics},
             {"repair_costs", opt.repair_costs == RepairCosts::marginals ? "marginals" : "original"},
             {"exact", opt.exact}};
   j["penalty_c"] = opt.penalty ? json(*opt.penalty) : json(nullptr);
   return j;
}

json serialize(const SolverResult& r, const ClusteringInstance& inst, bool timings)
{
   json j = {{"method", r.method},
             {"objective", r.objective},
             {"components", r.decomposition.component_count()},
             {"assignment", r.decomposition.component_ids()}};
   if (inst.gt) {
      const auto m = clustering_metrics(inst.graph, r.decomposition, *inst.gt);
      j["metrics"] = {{"pairwise_accuracy", m.pairwise_accuracy}, {"edge_accuracy", m.edge_accuracy}};
   }
   if (timings) j["elapsed_seconds"] = r.elapsed_seconds;
   return j;
}

namespace {

CycleSet triangle_cycles(const ClusteringInstance& inst)
{
   auto cycles = enumerate_chordless_cycles(inst.graph, 3);
   if (!cycles.complete)
      throw DataError(inst.name + ": graph has chordless cycles longer than 3; the clique potentials cover triangles only");
   return cycles;
}

json run_solvers(const ClusteringInstance& inst, const CostVector& costs, std::span<const double> q,
                 const EvalOptions& opt)
{
   json solvers = json::array();
   for (Heuristic h : opt.heuristics) {
      switch (h) {
         case Heuristic::gaec: solvers.push_back(serialize(greedy_join(inst.graph, costs), inst, opt.timings)); break;
         case Heuristic::kl: {
            const auto start = greedy_join(inst.graph, costs);
            auto r = kl_refine(inst.graph, costs, start.decomposition);
            r.method = "gaec+kl";
            r.elapsed_seconds += start.elapsed_seconds;
            solvers.push_back(serialize(r, inst, opt.timings));
            break;
         }
         case Heuristic::repair: {
            if (q.empty()) break;
            if (opt.repair_costs == RepairCosts::original && !inst.costs)
               throw DataError(inst.name + ": repair with original costs needs per-edge `cost` fields");
            const auto r = round_and_repair(inst.graph, q, opt.repair_costs, inst.costs ? &*inst.costs : nullptr);
            solvers.push_back(serialize(r, inst, opt.timings));
            break;
         }
      }
   }
   if (opt.exact) solvers.push_back(serialize(exact_solve(inst.graph, costs), inst, opt.timings));
   return solvers;
}

}  // namespace

json evaluate_instance(const ClusteringInstance& inst, const UnaryModel& model, const PatternPotentialTable& gammas,
                       const EvalOptions& opt)
{
   if (opt.exact && inst.graph.node_count() > kExactNodeLimit)
      throw std::length_error(inst.name + ": exact solver refuses " + std::to_string(inst.graph.node_count()) +
                              " nodes (bound " + std::to_string(kExactNodeLimit) + ")");
   const CycleSet cycles = triangle_cycles(inst);
   const CliqueIndex cliques(cycles, inst.graph.edge_count());
   const auto u = model.forward(inst.edge_features);
   const auto trace = run_inference(u, gammas, cliques, {opt.iterations});
   for (const auto& snap : trace.snapshots)
      for (double q : snap)
         if (!std::isfinite(q)) throw NumericError(inst.name + ": non-finite marginal");

   json out = {{"name", inst.name},
               {"nodes", inst.graph.node_count()},
               {"edges", inst.graph.edge_count()},
               {"cliques", cycles.size()},
               {"labeled", inst.labeled()}};

   json ratios = json::array();
   for (const auto& r : invalid_cycle_ratio(trace, cycles)) ratios.push_back(r ? json(*r) : json(nullptr));
   out["invalid_cycle_ratio"] = ratios;
   if (inst.labeled()) {
      out["marginal_join_mean"] = marginal_statistics(trace, *inst.gt_labels).mean_join;
      json acc = json::array();
      for (const auto& snap : trace.snapshots) acc.push_back(labeling_accuracy(threshold_marginals(snap), *inst.gt_labels));
      out["edge_accuracy"] = acc;
   }

   ClampStats clamp;
   const CostVector costs = costs_from_probabilities(trace.final(), &clamp);
   const EdgeLabeling hard = threshold_marginals(trace.final());
   const PenaltyConstant penalty = opt.penalty ? PenaltyConstant{*opt.penalty} : default_penalty(costs);
   out["thresholded"] = {{"multicut_cost", multicut_cost(costs, hard)},
                         {"violations", violation_count(hard, cycles)},
                         {"cubic_objective", cubic_objective(costs, hard, penalty, cycles)},
                         {"penalty_c", penalty.value}};
   out["clamped_probabilities"] = clamp.clamped;
   out["solvers"] = run_solvers(inst, costs, trace.final(), opt);
   return out;
}

json solve_instance(const ClusteringInstance& inst, const CostVector& costs, const EvalOptions& opt)
{
   if (opt.exact && inst.graph.node_count() > kExactNodeLimit)
      throw std::length_error(inst.name + ": exact solver refuses " + std::to_string(inst.graph.node_count()) +
                              " nodes (bound " + std::to_string(kExactNodeLimit) + ")");
   json out = {{"name", inst.name}, {"nodes", inst.graph.node_count()}, {"edges", inst.graph.edge_count()}};
   EvalOptions local = opt;
   std::erase(local.heuristics, Heuristic::repair);
   out["solvers"] = run_solvers(inst, costs, {}, local);
   return out;
}

json summarize(const std::vector<json>& instances)
{
   std::vector<double> join_sum, ratio_sum;
   std::vector<int> join_n, ratio_n;
   struct MethodAcc {
      double objective = 0.0, pairwise = 0.0, edge = 0.0;
      int n = 0, labeled = 0;
   };
   std::map<std::string, MethodAcc> methods;
   std::vector<std::string> method_order;

   auto accumulate = [](std::vector<double>& sum, std::vector<int>& cnt, std::size_t i, double v) {
      if (sum.size() <= i) {
         sum.resize(i + 1, 0.0);
         cnt.resize(i + 1, 0);
      }
      sum[i] += v;
      ++cnt[i];
   };
   for (const auto& inst : instances) {
      if (auto it = inst.find("marginal_join_mean"); it != inst.end())
         for (std::size_t t = 0; t < it->size(); ++t) accumulate(join_sum, join_n, t, (*it)[t].get<double>());
      if (auto it = inst.find("invalid_cycle_ratio"); it != inst.end())
         for (std::size_t t = 0; t < it->size(); ++t)
            if (!(*it)[t].is_null()) accumulate(ratio_sum, ratio_n, t, (*it)[t].get<double>());
      for (const auto& s : inst.value("solvers", json::array())) {
         const std::string name = s.at("method");
         if (!methods.count(name)) method_order.push_back(name);
         auto& acc = methods[name];
         acc.objective += s.at("objective").get<double>();
         ++acc.n;
         if (s.contains("metrics")) {
            acc.pairwise += s["metrics"]["pairwise_accuracy"].get<double>();
            acc.edge += s["metrics"]["edge_accuracy"].get<double>();
            ++acc.labeled;
         }
      }
   }
   auto means = [](const std::vector<double>& sum, const std::vector<int>& cnt) {
      json arr = json::array();
      for (std::size_t i = 0; i < sum.size(); ++i) arr.push_back(sum[i] / cnt[i]);
      return arr;
   };
   json solvers = json::array();
   for (const auto& name : method_order) {
      const auto& a = methods[name];
      json row = {{"method", name}, {"instances", a.n}, {"objective", a.objective / a.n}};
      if (a.labeled > 0) {
         row["pairwise_accuracy"] = a.pairwise / a.labeled;
         row["edge_accuracy"] = a.edge / a.labeled;
      }
      solvers.push_back(std::move(row));
   }
   return {{"instances", instances.size()},
           {"marginal_join_mean", means(join_sum, join_n)},
           {"invalid_cycle_ratio", means(ratio_sum, ratio_n)},
           {"solvers", solvers}};
}

namespace {

std::string number(const json& v)
{
   return v.is_null() ? std::string() : v.dump();
}

std::string per_iteration_csv(const json& report, const char* key, const char* column)
{
   std::ostringstream out;
   out << "instance,iteration," << column << '\n';
   for (const auto& inst : report.value("instances", json::array())) {
      if (!inst.contains(key)) continue;
      const auto& values = inst[key];
      for (std::size_t t = 0; t < values.size(); ++t)
         out << inst.at("name").get<std::string>() << ',' << t << ',' << number(values[t]) << '\n';
   }
   if (report.contains("mean") && report["mean"].contains(key)) {
      const auto& values = report["mean"][key];
      for (std::size_t t = 0; t < values.size(); ++t) out << "mean," << t << ',' << number(values[t]) << '\n';
   }
   return out.str();
}

}  // namespace

std::string marginal_table_csv(const json& report)
{
   return per_iteration_csv(report, "marginal_join_mean", "mean_join_marginal");
}

std::string invalid_cycle_table_csv(const json& report)
{
   return per_iteration_csv(report, "invalid_cycle_ratio", "invalid_cycle_ratio");
}

std::string trace_csv(const MarginalTrace& trace)
{
   std::ostringstream out;
   out << "iteration,edge_id,q\n";
   for (std::size_t t = 0; t < trace.snapshots.size(); ++t)
      for (std::size_t e = 0; e < trace.snapshots[t].size(); ++e)
         out << t << ',' << e << ',' << json(trace.snapshots[t][e]).dump() << '\n';
   return out.str();
}

void write_text_file(const fs::path& path, const std::string& text)
{
   if (path.has_parent_path()) fs::create_directories(path.parent_path());
   std::ofstream out(path, std::ios::binary);
   if (!out) throw DataError(path.string() + ": cannot open for writing");
   out << text;
   if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace mccrf
