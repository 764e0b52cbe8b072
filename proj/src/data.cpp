#include "mccrf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>

namespace mccrf {

using nlohmann::json;

void GeneratorConfig::validate() const
{
   if (clusters < 1) throw std::invalid_argument("generator: cluster count must be positive");
   if (per_cluster < 1) throw std::invalid_argument("generator: nodes per cluster must be positive");
   if (dim < 1) throw std::invalid_argument("generator: feature dimension must be positive");
   if (!(center_scale > 0.0)) throw std::invalid_argument("generator: center scale must be positive");
   if (!(sigma >= 0.0)) throw std::invalid_argument("generator: sigma must be non-negative");
}

json to_json(const GeneratorConfig& cfg)
{
   return {{"clusters", cfg.clusters},         {"per_cluster", cfg.per_cluster}, {"dim", cfg.dim},
           {"center_scale", cfg.center_scale}, {"sigma", cfg.sigma},             {"seed", cfg.seed}};
}

ClusteringInstance generate_planted(const GeneratorConfig& cfg)
{
   cfg.validate();
   std::mt19937_64 rng(cfg.seed);
   std::uniform_real_distribution<double> uniform(-1.0, 1.0);
   std::normal_distribution<double> noise(0.0, 1.0);

   std::vector<std::vector<double>> centers(cfg.clusters, std::vector<double>(cfg.dim));
   for (auto& c : centers)
      for (auto& x : c) x = cfg.center_scale * uniform(rng);

   const int n = cfg.clusters * cfg.per_cluster;
   std::vector<int> cluster_of(n);
   for (int v = 0; v < n; ++v) cluster_of[v] = v / cfg.per_cluster;
   std::shuffle(cluster_of.begin(), cluster_of.end(), rng);

   ClusteringInstance inst;
   inst.name = "planted-" + std::to_string(cfg.seed);
   inst.graph = complete_graph(n);
   inst.node_features.resize(n);
   for (int v = 0; v < n; ++v) {
      inst.node_features[v] = centers[cluster_of[v]];
      for (auto& x : inst.node_features[v]) x += cfg.sigma * noise(rng);
   }
   inst.edge_features = edge_features(inst.graph, inst.node_features);
   inst.gt = Decomposition(cluster_of);
   inst.gt_labels = labeling_from_decomposition(inst.graph, *inst.gt);
   inst.provenance = {{"generator", to_json(cfg)}};
   return inst;
}

FeatureMatrix edge_features(const Graph& g, const std::vector<std::vector<double>>& node_features)
{
   if (static_cast<int>(node_features.size()) != g.node_count())
      throw std::invalid_argument("edge_features: one feature vector per node required");
   const int d = node_features.empty() ? 0 : static_cast<int>(node_features[0].size());
   FeatureMatrix f(g.edge_count(), d + 1);
   for (EdgeId e = 0; e < g.edge_count(); ++e) {
      const auto& fu = node_features[g.edge(e).u];
      const auto& fv = node_features[g.edge(e).v];
      auto row = f.row(e);
      double sq = 0.0;
      for (int k = 0; k < d; ++k) {
         const double diff = std::abs(fu[k] - fv[k]);
         row[k] = diff;
         sq += diff * diff;
      }
      row[d] = std::sqrt(sq);
   }
   return f;
}

// ---------------------------------------------------------------------------
// Instance documents

json save_instance(const ClusteringInstance& inst)
{
   json nodes = json::array();
   for (int v = 0; v < inst.graph.node_count(); ++v) {
      json node = {{"id", v}, {"feature", inst.node_features[v]}};
      if (inst.gt) node["gt_cluster"] = (*inst.gt)[v];
      nodes.push_back(std::move(node));
   }
   json edges = json::array();
   for (EdgeId e = 0; e < inst.graph.edge_count(); ++e) {
      const auto row = inst.edge_features.row(e);
      json edge = {{"u", inst.graph.edge(e).u},
                   {"v", inst.graph.edge(e).v},
                   {"feature", std::vector<double>(row.begin(), row.end())}};
      if (inst.gt_labels) edge["gt_label"] = static_cast<int>((*inst.gt_labels)[e]);
      if (inst.costs) edge["cost"] = (*inst.costs)[e];
      edges.push_back(std::move(edge));
   }
   json doc = {{"format", kInstanceFormat}, {"name", inst.name}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
   if (!inst.provenance.is_null()) doc["provenance"] = inst.provenance;
   return doc;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what)
{
   throw DataError(path + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path)
{
   auto it = obj.find(key);
   if (it == obj.end()) fail(path + "." + key, "missing required field");
   return *it;
}

int read_int(const json& v, const std::string& path)
{
   if (!v.is_number_integer()) fail(path, "expected an integer");
   return v.get<int>();
}

std::vector<double> read_reals(const json& v, const std::string& path)
{
   if (!v.is_array()) fail(path, "expected an array of numbers");
   std::vector<double> out;
   out.reserve(v.size());
   for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
      if (!std::isfinite(out.back())) fail(path + "[" + std::to_string(i) + "]", "non-finite value");
   }
   return out;
}

}  // namespace

ClusteringInstance load_instance(const json& doc)
{
   if (!doc.is_object()) fail("$", "instance document must be an object");
   if (auto it = doc.find("format"); it != doc.end() && *it != kInstanceFormat)
      fail("$.format", "unsupported format tag " + it->dump());

   ClusteringInstance inst;
   inst.name = doc.value("name", std::string("instance"));
   if (auto it = doc.find("provenance"); it != doc.end()) inst.provenance = *it;

   const json& nodes = require(doc, "nodes", "$");
   if (!nodes.is_array() || nodes.empty()) fail("$.nodes", "expected a non-empty array");
   const int n = static_cast<int>(nodes.size());
   inst.node_features.assign(n, {});
   std::vector<char> seen(n, 0);
   std::vector<int> gt_cluster(n, 0);
   int with_cluster = 0;
   int dim = -1;
   for (int i = 0; i < n; ++i) {
      const std::string path = "$.nodes[" + std::to_string(i) + "]";
      const json& node = nodes[i];
      if (!node.is_object()) fail(path, "expected an object");
      const int id = read_int(require(node, "id", path), path + ".id");
      if (id < 0 || id >= n) fail(path + ".id", "node ids must be 0.." + std::to_string(n - 1));
      if (seen[id]) fail(path + ".id", "duplicate node id " + std::to_string(id));
      seen[id] = 1;
      auto feature = read_reals(require(node, "feature", path), path + ".feature");
      if (dim < 0) dim = static_cast<int>(feature.size());
      if (static_cast<int>(feature.size()) != dim) fail(path + ".feature", "feature dimension differs from node 0");
      inst.node_features[id] = std::move(feature);
      if (auto it = node.find("gt_cluster"); it != node.end()) {
         gt_cluster[id] = read_int(*it, path + ".gt_cluster");
         ++with_cluster;
      }
   }
   if (with_cluster != 0 && with_cluster != n) fail("$.nodes", "gt_cluster must be given for all nodes or none");

   const bool complete = doc.value("complete", false);
   auto edges_it = doc.find("edges");
   if (complete && edges_it != doc.end()) fail("$.edges", "must be absent when \"complete\" is true");
   if (!complete && edges_it == doc.end()) fail("$.edges", "missing required field (or set \"complete\": true)");

   std::optional<EdgeLabeling> edge_labels;
   if (complete) {
      inst.graph = complete_graph(n);
      inst.edge_features = edge_features(inst.graph, inst.node_features);
   } else {
      const json& edges = *edges_it;
      if (!edges.is_array()) fail("$.edges", "expected an array");
      std::vector<std::pair<NodeId, NodeId>> pairs;
      std::vector<std::vector<double>> features;
      EdgeLabeling labels;
      std::vector<double> costs;
      int with_feature = 0, with_label = 0, with_cost = 0;
      for (std::size_t i = 0; i < edges.size(); ++i) {
         const std::string path = "$.edges[" + std::to_string(i) + "]";
         const json& edge = edges[i];
         if (!edge.is_object()) fail(path, "expected an object");
         pairs.emplace_back(read_int(require(edge, "u", path), path + ".u"),
                            read_int(require(edge, "v", path), path + ".v"));
         if (auto it = edge.find("feature"); it != edge.end()) {
            features.push_back(read_reals(*it, path + ".feature"));
            ++with_feature;
         }
         if (auto it = edge.find("gt_label"); it != edge.end()) {
            const int label = read_int(*it, path + ".gt_label");
            if (label != 0 && label != 1) fail(path + ".gt_label", "expected 0 or 1");
            labels.push_back(static_cast<std::uint8_t>(label));
            ++with_label;
         }
         if (auto it = edge.find("cost"); it != edge.end()) {
            if (!it->is_number() || !std::isfinite(it->get<double>())) fail(path + ".cost", "expected a finite number");
            costs.push_back(it->get<double>());
            ++with_cost;
         }
      }
      try {
         inst.graph = Graph(n, pairs);
      } catch (const std::invalid_argument& e) {
         fail("$.edges", e.what());
      }
      const int m = static_cast<int>(edges.size());
      if (with_feature != 0 && with_feature != m) fail("$.edges", "feature must be given for all edges or none");
      if (with_label != 0 && with_label != m) fail("$.edges", "gt_label must be given for all edges or none");
      if (with_cost != 0 && with_cost != m) fail("$.edges", "cost must be given for all edges or none");
      if (with_cost == m && m > 0) inst.costs = std::move(costs);
      if (with_feature == 0) {
         inst.edge_features = edge_features(inst.graph, inst.node_features);
      } else {
         const int cols = static_cast<int>(features[0].size());
         inst.edge_features = FeatureMatrix(m, cols);
         for (int e = 0; e < m; ++e) {
            if (static_cast<int>(features[e].size()) != cols)
               fail("$.edges[" + std::to_string(e) + "].feature", "feature dimension differs from edge 0");
            std::copy(features[e].begin(), features[e].end(), inst.edge_features.row(e).begin());
         }
      }
      if (with_label == m && m > 0) edge_labels = std::move(labels);
   }

   if (with_cluster == n) {
      inst.gt = Decomposition(gt_cluster);
      const EdgeLabeling derived = labeling_from_decomposition(inst.graph, *inst.gt);
      if (edge_labels && *edge_labels != derived) fail("$.edges", "gt_label disagrees with node gt_cluster");
      inst.gt_labels = derived;
   } else if (edge_labels) {
      inst.gt_labels = std::move(edge_labels);
      inst.gt = decomposition_from_labeling(inst.graph, *inst.gt_labels);
      if (labeling_from_decomposition(inst.graph, *inst.gt) != *inst.gt_labels)
         fail("$.edges", "gt_label is not a feasible multicut");
   }
   return inst;
}

ClusteringInstance read_instance_file(const std::filesystem::path& path)
{
   std::ifstream in(path);
   if (!in) throw DataError(path.string() + ": cannot open instance file");
   json doc;
   try {
      in >> doc;
   } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
   }
   try {
      auto inst = load_instance(doc);
      return inst;
   } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
   }
}

void write_instance_file(const ClusteringInstance& inst, const std::filesystem::path& path)
{
   std::ofstream out(path);
   if (!out) throw DataError(path.string() + ": cannot write instance file");
   out << save_instance(inst).dump(1) << '\n';
}

ClusteringInstance load_point_cloud_csv(std::istream& in, const std::string& name)
{
   auto split = [](const std::string& line) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
         const auto b = cell.find_first_not_of(" \t\r");
         const auto e = cell.find_last_not_of(" \t\r");
         cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
      }
      return cells;
   };

   std::string line;
   if (!std::getline(in, line)) throw DataError("csv: empty input");
   const auto header = split(line);
   if (header.size() < 2 || header[0] != "id") throw DataError("csv header: first column must be `id`");
   const bool has_label = header.back() == "label";
   const std::size_t feature_cols = header.size() - 1 - (has_label ? 1 : 0);
   if (feature_cols == 0) throw DataError("csv header: no feature columns");

   std::map<int, std::pair<std::vector<double>, int>> rows;
   std::map<std::string, int> label_ids;
   int line_no = 1;
   while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split(line);
      const std::string where = "csv line " + std::to_string(line_no);
      if (cells.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " columns");
      try {
         std::size_t pos = 0;
         const int id = std::stoi(cells[0], &pos);
         if (pos != cells[0].size()) throw std::invalid_argument("id");
         std::vector<double> f(feature_cols);
         for (std::size_t k = 0; k < feature_cols; ++k) {
            f[k] = std::stod(cells[1 + k], &pos);
            if (pos != cells[1 + k].size() || !std::isfinite(f[k])) throw std::invalid_argument("feature");
         }
         int label = 0;
         if (has_label) {
            if (cells.back().empty()) throw DataError(where + ": empty label");
            label = label_ids.emplace(cells.back(), static_cast<int>(label_ids.size())).first->second;
         }
         if (!rows.emplace(id, std::make_pair(std::move(f), label)).second) throw DataError(where + ": duplicate id");
      } catch (const std::logic_error&) {
         throw DataError(where + ": malformed number");
      }
   }
   if (rows.empty()) throw DataError("csv: no data rows");
   const int n = static_cast<int>(rows.size());
   if (rows.begin()->first != 0 || rows.rbegin()->first != n - 1) throw DataError("csv: ids must be 0..n-1");

   ClusteringInstance inst;
   inst.name = name;
   inst.graph = complete_graph(n);
   std::vector<int> labels;
   for (auto& [id, row] : rows) {
      inst.node_features.push_back(std::move(row.first));
      labels.push_back(row.second);
   }
   inst.edge_features = edge_features(inst.graph, inst.node_features);
   if (has_label) {
      inst.gt = Decomposition(labels);
      inst.gt_labels = labeling_from_decomposition(inst.graph, *inst.gt);
   }
   return inst;
}

// ---------------------------------------------------------------------------

ClusteringMetrics clustering_metrics(const Graph& g, const Decomposition& predicted, const Decomposition& gt)
{
   if (predicted.node_count() != gt.node_count() || gt.node_count() != g.node_count())
      throw std::invalid_argument("clustering_metrics: node sets differ");
   const int n = g.node_count();
   ClusteringMetrics m;
   long long agree = 0, pairs = 0;
   for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
         agree += (predicted[u] == predicted[v]) == (gt[u] == gt[v]);
         ++pairs;
      }
   m.pairwise_accuracy = pairs > 0 ? static_cast<double>(agree) / static_cast<double>(pairs) : 1.0;
   m.edge_accuracy = labeling_accuracy(labeling_from_decomposition(g, predicted), labeling_from_decomposition(g, gt));
   return m;
}

double labeling_accuracy(const EdgeLabeling& predicted, const EdgeLabeling& gt)
{
   if (predicted.size() != gt.size()) throw std::invalid_argument("labeling_accuracy: length mismatch");
   if (gt.empty()) return 1.0;
   std::size_t agree = 0;
   for (std::size_t i = 0; i < gt.size(); ++i) agree += (predicted[i] != 0) == (gt[i] != 0);
   return static_cast<double>(agree) / static_cast<double>(gt.size());
}

}  // namespace mccrf
