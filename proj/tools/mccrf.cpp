// Command-line front end: generate data, train, run inference and solvers.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mccrf/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mccrf;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class UsageError : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

fs::path default_out_dir()
{
   if (const char* env = std::getenv("MCCRF_OUT_DIR"); env && *env) return env;
   return "mccrf_out";
}

json read_json(const fs::path& path)
{
   std::ifstream in(path);
   if (!in) throw DataError(path.string() + ": cannot open");
   try {
      return json::parse(in);
   } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
   }
}

void write_json(const fs::path& path, const json& doc)
{
   write_text_file(path, doc.dump(1) + "\n");
}

std::vector<ClusteringInstance> load_all(const fs::path& data)
{
   std::vector<ClusteringInstance> out;
   for (const auto& f : resolve_instances(data)) {
      if (f.extension() == ".csv") {
         std::ifstream in(f);
         if (!in) throw DataError(f.string() + ": cannot open");
         out.push_back(load_point_cloud_csv(in, f.stem().string()));
      } else {
         out.push_back(read_instance_file(f));
         if (out.back().name.empty() || out.back().name == "instance") out.back().name = f.stem().string();
      }
   }
   return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
   GeneratorConfig cfg;
   int count = 10;
   fs::path out;
   bool force = false;
};

int run_gen(const GenArgs& a)
{
   try {
      a.cfg.validate();
   } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
   }
   if (a.count < 1) throw UsageError("--count must be positive");
   const fs::path out = a.out.empty() ? default_out_dir() / "data" : a.out;
   if (fs::exists(out) && !fs::is_empty(out) && !a.force)
      throw DataError(out.string() + ": exists and is not empty (use --force to overwrite)");
   fs::create_directories(out);
   for (int i = 0; i < a.count; ++i) {
      GeneratorConfig cfg = a.cfg;
      cfg.seed = a.cfg.seed + static_cast<std::uint64_t>(i);
      auto inst = generate_planted(cfg);
      char name[32];
      std::snprintf(name, sizeof name, "instance_%04d", i);
      inst.name = name;
      write_instance_file(inst, out / (std::string(name) + ".json"));
   }
   std::cerr << "wrote " << a.count << " instances to " << out.string() << "\n";
   return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
   fs::path data;
   std::string stage = "unary";
   fs::path model_in;
   fs::path model_out;
   fs::path curve;
   TrainConfig cfg;
   int epochs = -1;
   double lr = -1.0;
};

std::string curve_csv(const std::vector<EpochMetrics>& curve)
{
   std::ostringstream out;
   out << "epoch,train_loss,validation_loss,validation_accuracy,validation_invalid_ratio\n";
   for (const auto& m : curve)
      out << m.epoch << ',' << json(m.train_loss).dump() << ',' << json(m.validation_loss).dump() << ','
          << json(m.validation_accuracy).dump() << ',' << json(m.validation_invalid_ratio).dump() << '\n';
   return out.str();
}

int run_train(TrainArgs a)
{
   if (a.stage != "unary" && a.stage != "end2end") throw UsageError("--stage must be unary or end2end");
   if (a.stage == "end2end" && a.model_in.empty())
      throw UsageError("--stage end2end needs a pretrained unary model (--model-in)");
   if (a.epochs >= 0) (a.stage == "unary" ? a.cfg.unary_epochs : a.cfg.e2e_epochs) = a.epochs;
   if (a.lr > 0.0) (a.stage == "unary" ? a.cfg.unary_lr : a.cfg.e2e_lr) = a.lr;
   try {
      a.cfg.validate();
   } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
   }

   const auto instances = load_all(a.data);
   std::vector<TrainingExample> examples;
   examples.reserve(instances.size());
   for (const auto& inst : instances) examples.push_back(make_training_example(inst));
   if (examples.empty()) throw DataError(a.data.string() + ": no instances");
   const int dim = examples.front().features.cols;

   UnaryModel model;
   PatternPotentialTable gammas;
   if (!a.model_in.empty()) {
      auto loaded = load_model(read_json(a.model_in));
      model = std::move(loaded.model);
      gammas = loaded.gammas;
   } else {
      model = UnaryModel::random(dim, a.cfg.hidden, a.cfg.seed);
   }

   const TrainResult r =
      a.stage == "unary" ? train_unary(examples, model, a.cfg) : train_end_to_end(examples, model, gammas, a.cfg);
   // the unary stage leaves pattern potentials neutral
   const PatternPotentialTable out_gammas = a.stage == "unary" ? PatternPotentialTable{} : r.gammas;

   json training = to_json(a.cfg);
   training["instances"] = examples.size();
   training["best_epoch"] = r.best_epoch;
   const fs::path model_out = a.model_out.empty() ? default_out_dir() / ("model_" + a.stage + ".json") : a.model_out;
   write_json(model_out, save_model(r.model, out_gammas, a.stage, training));
   if (!a.curve.empty()) write_text_file(a.curve, curve_csv(r.curve));

   const auto& best = r.curve[r.best_epoch];
   std::cerr << a.stage << ": best epoch " << r.best_epoch << ", validation loss " << best.validation_loss
             << ", validation accuracy " << best.validation_accuracy << "\n";
   return kOk;
}

// ---------------------------------------------------------------------------
// infer / solve / eval

struct RunArgs {
   fs::path data;
   fs::path model;
   fs::path report;
   fs::path trace_dir;
   int iterations = 3;
   std::vector<std::string> heuristics;
   std::string repair_costs = "marginals";
   bool exact = false;
   std::optional<double> penalty;
   int jobs = 1;
   bool timings = false;
};

EvalOptions options_from(const RunArgs& a, std::vector<Heuristic> fallback)
{
   if (a.iterations < 0) throw UsageError("--iterations must be non-negative");
   if (a.jobs < 1) throw UsageError("--jobs must be positive");
   EvalOptions opt;
   opt.iterations = a.iterations;
   opt.heuristics.clear();
   try {
      for (const auto& h : a.heuristics) opt.heuristics.push_back(parse_heuristic(h));
   } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
   }
   if (a.heuristics.empty()) opt.heuristics = std::move(fallback);
   if (a.repair_costs != "marginals" && a.repair_costs != "original")
      throw UsageError("--repair-costs must be marginals or original");
   opt.repair_costs = a.repair_costs == "marginals" ? RepairCosts::marginals : RepairCosts::original;
   opt.exact = a.exact;
   opt.penalty = a.penalty;
   if (opt.penalty && !(*opt.penalty >= 0.0)) throw UsageError("--penalty-c must be non-negative");
   opt.timings = a.timings;
   return opt;
}

void write_report(const fs::path& path, const json& report, bool tables)
{
   write_json(path, report);
   if (!tables) return;
   fs::path stem = path;
   stem.replace_extension();
   write_text_file(stem.string() + ".marginals.csv", marginal_table_csv(report));
   write_text_file(stem.string() + ".invalid_cycles.csv", invalid_cycle_table_csv(report));
}

int run_model_command(const RunArgs& a, const std::string& command)
{
   const bool infer_only = command == "infer";
   const EvalOptions opt = options_from(a, infer_only ? std::vector<Heuristic>{}
                                                     : std::vector<Heuristic>{Heuristic::gaec, Heuristic::kl,
                                                                              Heuristic::repair});
   const auto loaded = load_model(read_json(a.model));
   const auto instances = load_all(a.data);
   for (const auto& inst : instances)
      if (inst.edge_features.cols != loaded.model.input_dim())
         throw DataError(inst.name + ": edge feature dimension " + std::to_string(inst.edge_features.cols) +
                         " does not match the model input " + std::to_string(loaded.model.input_dim()));

   std::vector<json> sections(instances.size());
   parallel_for(instances.size(), a.jobs, [&](std::size_t i) {
      sections[i] = evaluate_instance(instances[i], loaded.model, loaded.gammas, opt);
   });

   if (!a.trace_dir.empty())
      for (const auto& inst : instances) {
         const auto cycles = enumerate_chordless_cycles(inst.graph, 3);
         const auto trace = run_inference(loaded.model.forward(inst.edge_features), loaded.gammas,
                                          CliqueIndex(cycles, inst.graph.edge_count()), {opt.iterations});
         write_text_file(a.trace_dir / (inst.name + ".trace.csv"), trace_csv(trace));
      }

   json report = {{"format", kReportFormat},
                  {"command", command},
                  {"options", to_json(opt)},
                  {"model",
                   {{"stage", loaded.stage},
                    {"gammas",
                     {{"gamma_000", loaded.gammas.gamma_000},
                      {"gamma_110", loaded.gammas.gamma_110},
                      {"gamma_111", loaded.gammas.gamma_111},
                      {"gamma_max", loaded.gammas.gamma_max}}}}},
                  {"instances", sections},
                  {"mean", summarize(sections)}};
   const fs::path out = a.report.empty() ? default_out_dir() / (command + "_report.json") : a.report;
   write_report(out, report, true);
   const auto& mean = report["mean"];
   if (!mean["marginal_join_mean"].empty())
      std::cerr << "mean join marginal (last iteration): " << mean["marginal_join_mean"].back() << "\n";
   for (const auto& row : mean["solvers"]) std::cerr << row.dump() << "\n";
   return kOk;
}

int run_solve(const RunArgs& a)
{
   if (!a.model.empty()) return run_model_command(a, "solve");
   const EvalOptions opt = options_from(a, {Heuristic::gaec, Heuristic::kl});
   const auto instances = load_all(a.data);
   std::vector<json> sections(instances.size());
   parallel_for(instances.size(), a.jobs, [&](std::size_t i) {
      if (!instances[i].costs)
         throw DataError(instances[i].name + ": no per-edge `cost` fields and no --model to derive costs from");
      sections[i] = solve_instance(instances[i], *instances[i].costs, opt);
   });
   json report = {{"format", kReportFormat},
                  {"command", "solve"},
                  {"options", to_json(opt)},
                  {"instances", sections},
                  {"mean", summarize(sections)}};
   const fs::path out = a.report.empty() ? default_out_dir() / "solve_report.json" : a.report;
   write_report(out, report, false);
   for (const auto& row : report["mean"]["solvers"]) std::cerr << row.dump() << "\n";
   return kOk;
}

void add_run_options(CLI::App* cmd, RunArgs& a, bool model_required)
{
   cmd->add_option("--data", a.data, "Instance file, CSV point cloud or directory of instances")->required();
   auto* model = cmd->add_option("--model", a.model, "Trained model document");
   if (model_required) model->required();
   cmd->add_option("--report", a.report, "Report path (default: $MCCRF_OUT_DIR/<command>_report.json)");
   cmd->add_option("--iterations", a.iterations, "Mean-field iterations")->capture_default_str();
   cmd->add_option("--heuristic", a.heuristics, "gaec, kl or repair (repeatable)");
   cmd->add_option("--repair-costs", a.repair_costs, "Costs used to repair thresholded marginals: marginals|original")
      ->capture_default_str();
   cmd->add_flag("--exact", a.exact, "Also run the exact solver (at most 12 nodes)");
   cmd->add_option("--penalty-c", a.penalty, "Penalty constant of the cubic objective");
   cmd->add_option("--jobs", a.jobs, "Worker threads")->capture_default_str();
   cmd->add_flag("--timings", a.timings, "Record solver wall-clock times in the report");
}

}  // namespace

int main(int argc, char** argv)
{
   CLI::App app{"Learned min-cost multicut: data generation, training, inference and solvers"};
   app.require_subcommand(1);

   GenArgs gen;
   auto* gen_cmd = app.add_subcommand("gen", "Generate planted-partition instances");
   gen_cmd->add_option("--clusters,--k,-k", gen.cfg.clusters, "Clusters per instance")->capture_default_str();
   gen_cmd->add_option("--per-cluster", gen.cfg.per_cluster, "Nodes per cluster")->capture_default_str();
   gen_cmd->add_option("--dim", gen.cfg.dim, "Node feature dimension")->capture_default_str();
   gen_cmd->add_option("--sigma", gen.cfg.sigma, "Within-cluster noise")->capture_default_str();
   gen_cmd->add_option("--center-scale", gen.cfg.center_scale, "Cluster centers lie in [-s, s]^d")
      ->capture_default_str();
   gen_cmd->add_option("--count", gen.count, "Number of instances")->capture_default_str();
   gen_cmd->add_option("--seed", gen.cfg.seed, "Seed of the first instance")->capture_default_str();
   gen_cmd->add_option("--out", gen.out, "Output directory (default: $MCCRF_OUT_DIR/data)");
   gen_cmd->add_flag("--force", gen.force, "Write into a non-empty directory");

   TrainArgs train;
   auto* train_cmd = app.add_subcommand("train", "Train the unary network or the full model");
   train_cmd->add_option("--data", train.data, "Directory of labeled instances")->required();
   train_cmd->add_option("--stage", train.stage, "unary or end2end")->capture_default_str();
   train_cmd->add_option("--model-in", train.model_in, "Starting model (required for end2end)");
   train_cmd->add_option("--model-out", train.model_out, "Output model document");
   train_cmd->add_option("--curve", train.curve, "Write the per-epoch learning curve as CSV");
   train_cmd->add_option("--epochs", train.epochs, "Epochs of the selected stage");
   train_cmd->add_option("--lr", train.lr, "Learning rate of the network weights in the selected stage");
   train_cmd->add_option("--gamma-lr", train.cfg.gamma_lr, "Learning rate of the pattern potentials")
      ->capture_default_str();
   train_cmd->add_option("--hidden", train.cfg.hidden, "Hidden units (0: logistic baseline)")->capture_default_str();
   train_cmd->add_option("--iterations", train.cfg.iterations, "Unrolled mean-field iterations")
      ->capture_default_str();
   train_cmd->add_option("--batch-size", train.cfg.batch_size, "Minibatch size")->capture_default_str();
   train_cmd->add_option("--validation-fraction", train.cfg.validation_fraction, "Held-out share of the data")
      ->capture_default_str();
   train_cmd->add_option("--seed", train.cfg.seed, "Initialization and shuffling seed")->capture_default_str();

   RunArgs infer, solve, eval;
   auto* infer_cmd = app.add_subcommand("infer", "Run mean-field inference and report marginal statistics");
   add_run_options(infer_cmd, infer, true);
   infer_cmd->add_option("--trace", infer.trace_dir, "Directory for per-instance marginal traces (CSV)");
   auto* solve_cmd = app.add_subcommand("solve", "Solve with costs from the model or from the instance files");
   add_run_options(solve_cmd, solve, false);
   auto* eval_cmd = app.add_subcommand("eval", "Inference, solvers and metrics against ground truth");
   add_run_options(eval_cmd, eval, true);
   eval_cmd->add_option("--trace", eval.trace_dir, "Directory for per-instance marginal traces (CSV)");

   try {
      app.parse(argc, argv);
   } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
   } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
   } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kUsage;
   }

   try {
      if (*gen_cmd) return run_gen(gen);
      if (*train_cmd) return run_train(train);
      if (*infer_cmd) return run_model_command(infer, "infer");
      if (*solve_cmd) return run_solve(solve);
      if (*eval_cmd) return run_model_command(eval, "eval");
   } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUsage;
   } catch (const NumericError& e) {
      std::cerr << "numeric error: " << e.what() << "\n";
      return kNumeric;
   } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kData;
   } catch (const std::length_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kData;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kData;
   }
   return kUsage;
}
