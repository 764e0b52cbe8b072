#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mccrf/crf.hpp"
#include "mccrf/data.hpp"
#include "mccrf/learn.hpp"
#include "mccrf/solvers.hpp"

namespace mccrf {

inline constexpr const char* kReportFormat = "mccrf-report/1";

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to per-index slots; the first exception is rethrown after join.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

/// Instance files (*.json) of a directory in lexicographic order.
std::vector<std::filesystem::path> list_instance_files(const std::filesystem::path& dir);

/// Either a single instance file or every instance file of a directory.
std::vector<std::filesystem::path> resolve_instances(const std::filesystem::path& path);

enum class Heuristic { gaec, kl, repair };

std::string to_string(Heuristic h);
Heuristic parse_heuristic(const std::string& s);

struct EvalOptions {
   int iterations = 3;
   std::vector<Heuristic> heuristics{Heuristic::gaec, Heuristic::kl, Heuristic::repair};
   RepairCosts repair_costs = RepairCosts::marginals;
   bool exact = false;
   /// Penalty for the cubic objective of the thresholded labeling; unset
   /// selects sum |c_e| + 1.
   std::optional<double> penalty;
   bool timings = false;
};

nlohmann::json to_json(const EvalOptions& opt);

/// Per-instance section of a run report. Costs for the solvers come from the
/// final marginals; `instance.costs`-style external costs are not used here.
nlohmann::json evaluate_instance(const ClusteringInstance& inst, const UnaryModel& model,
                                 const PatternPotentialTable& gammas, const EvalOptions& opt);

/// Solver section for explicit costs (no model involved).
nlohmann::json solve_instance(const ClusteringInstance& inst, const CostVector& costs, const EvalOptions& opt);

nlohmann::json serialize(const SolverResult& r, const ClusteringInstance& inst, bool timings);

/// Mean rows over the per-instance sections, in instance order.
nlohmann::json summarize(const std::vector<nlohmann::json>& instances);

/// Flat CSV twins of the two per-iteration tables: one row per instance and
/// iteration plus `mean` rows.
std::string marginal_table_csv(const nlohmann::json& report);
std::string invalid_cycle_table_csv(const nlohmann::json& report);

/// iteration,edge_id,q
std::string trace_csv(const MarginalTrace& trace);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mccrf
