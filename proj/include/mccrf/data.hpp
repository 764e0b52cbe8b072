#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mccrf/graph.hpp"

namespace mccrf {

/// Malformed input data. The message starts with the offending field path.
class DataError : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

/// Dense row-major matrix, one row per edge.
struct FeatureMatrix {
   int rows = 0;
   int cols = 0;
   std::vector<double> values;

   FeatureMatrix() = default;
   FeatureMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}

   std::span<double> row(int i) { return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
   std::span<const double> row(int i) const
   {
      return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
   }
   bool operator==(const FeatureMatrix&) const = default;
};

struct ClusteringInstance {
   std::string name;
   Graph graph;
   std::vector<std::vector<double>> node_features;
   FeatureMatrix edge_features;
   std::optional<Decomposition> gt;
   std::optional<EdgeLabeling> gt_labels;
   /// Optional per-edge multicut costs carried by the document.
   std::optional<std::vector<double>> costs;
   /// Generator settings echoed into the saved document, if any.
   nlohmann::json provenance;

   bool labeled() const { return gt_labels.has_value(); }
};

struct GeneratorConfig {
   int clusters = 3;
   int per_cluster = 5;
   int dim = 2;
   double center_scale = 1.0;
   double sigma = 0.13;
   std::uint64_t seed = 0;

   void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& cfg);

/// Complete graph over k*m nodes in shuffled cluster order; node features are
/// cluster centers (uniform in [-scale, scale]^d) plus isotropic Gaussian noise.
ClusteringInstance generate_planted(const GeneratorConfig& cfg);

/// f_e = (|f_u - f_v| elementwise, ||f_u - f_v||), dimension d + 1.
FeatureMatrix edge_features(const Graph& g, const std::vector<std::vector<double>>& node_features);

inline constexpr const char* kInstanceFormat = "mccrf-instance/1";

nlohmann::json save_instance(const ClusteringInstance& inst);
ClusteringInstance load_instance(const nlohmann::json& doc);

ClusteringInstance read_instance_file(const std::filesystem::path& path);
void write_instance_file(const ClusteringInstance& inst, const std::filesystem::path& path);

/// CSV point cloud with a header row: id, feature columns, and an optional
/// trailing `label` column (any token; equal tokens share a cluster).
/// Produces a complete-graph instance.
ClusteringInstance load_point_cloud_csv(std::istream& in, const std::string& name = "points");

struct ClusteringMetrics {
   /// Rand index over all node pairs.
   double pairwise_accuracy = 1.0;
   /// Fraction of graph edges with matching cut labels.
   double edge_accuracy = 1.0;
};

ClusteringMetrics clustering_metrics(const Graph& g, const Decomposition& predicted, const Decomposition& gt);

/// Fraction of positions where two labelings agree (1.0 when empty).
double labeling_accuracy(const EdgeLabeling& predicted, const EdgeLabeling& gt);

}  // namespace mccrf
