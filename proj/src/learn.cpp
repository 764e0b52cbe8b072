#include "mccrf/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mccrf/objective.hpp"

namespace mccrf {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Unary network

UnaryModel::UnaryModel(int input_dim, int hidden) : input_dim_(input_dim), hidden_(hidden)
{
   if (input_dim < 1) throw std::invalid_argument("unary model: input dimension must be positive");
   if (hidden < 0) throw std::invalid_argument("unary model: hidden width must be non-negative");
   const std::size_t d = input_dim, h = hidden;
   params_.assign(h > 0 ? (d + 1) * h + (h + 1) * 2 : (d + 1) * 2, 0.0);
}

UnaryModel UnaryModel::random(int input_dim, int hidden, std::uint64_t seed)
{
   UnaryModel m(input_dim, hidden);
   std::mt19937_64 rng(seed);
   std::normal_distribution<double> normal(0.0, 1.0);
   if (hidden == 0) {
      const double scale = std::sqrt(1.0 / input_dim);
      for (std::size_t i = 0; i < 2 * static_cast<std::size_t>(input_dim); ++i) m.params_[i] = scale * normal(rng);
      return m;
   }
   const double s1 = std::sqrt(2.0 / input_dim);
   for (std::size_t i = m.w1(); i < m.b1(); ++i) m.params_[i] = s1 * normal(rng);
   const double s2 = std::sqrt(1.0 / hidden);
   for (std::size_t i = m.w2(); i < m.b2(); ++i) m.params_[i] = s2 * normal(rng);
   return m;
}

UnaryPotentials UnaryModel::forward(const FeatureMatrix& features, Cache* cache) const
{
   if (features.cols != input_dim_)
      throw std::invalid_argument("unary model: expected " + std::to_string(input_dim_) + " features per edge, got " +
                                  std::to_string(features.cols));
   const int n = features.rows, d = input_dim_, h = hidden_;
   UnaryPotentials u;
   u.psi.resize(n);
   if (h == 0) {
      const double* w = params_.data();
      const double* b = w + 2 * d;
      for (int e = 0; e < n; ++e) {
         const auto f = features.row(e);
         for (int l = 0; l < 2; ++l) {
            double s = b[l];
            for (int k = 0; k < d; ++k) s += w[l * d + k] * f[k];
            u.psi[e][l] = s;
         }
      }
      return u;
   }

   std::vector<double> local;
   std::vector<double>& pre = cache ? cache->hidden_pre : local;
   pre.assign(static_cast<std::size_t>(n) * h, 0.0);
   const double* W1 = params_.data() + w1();
   const double* B1 = params_.data() + b1();
   const double* W2 = params_.data() + w2();
   const double* B2 = params_.data() + b2();
   for (int e = 0; e < n; ++e) {
      const auto f = features.row(e);
      double* z = pre.data() + static_cast<std::size_t>(e) * h;
      for (int j = 0; j < h; ++j) {
         double s = B1[j];
         for (int k = 0; k < d; ++k) s += W1[j * d + k] * f[k];
         z[j] = s;
      }
      for (int l = 0; l < 2; ++l) {
         double s = B2[l];
         for (int j = 0; j < h; ++j) s += W2[l * h + j] * std::max(z[j], 0.0);
         u.psi[e][l] = s;
      }
   }
   return u;
}

std::vector<double> UnaryModel::backward(const FeatureMatrix& features, const Cache& cache,
                                         const UnaryPotentials& grad) const
{
   const int n = features.rows, d = input_dim_, h = hidden_;
   if (grad.size() != n) throw std::invalid_argument("unary model backward: gradient length mismatch");
   std::vector<double> g(params_.size(), 0.0);
   if (h == 0) {
      for (int e = 0; e < n; ++e) {
         const auto f = features.row(e);
         for (int l = 0; l < 2; ++l) {
            const double gl = grad.psi[e][l];
            for (int k = 0; k < d; ++k) g[l * d + k] += gl * f[k];
            g[2 * d + l] += gl;
         }
      }
      return g;
   }
   if (cache.hidden_pre.size() != static_cast<std::size_t>(n) * h)
      throw std::invalid_argument("unary model backward: forward cache does not match the features");

   const double* W2 = params_.data() + w2();
   std::vector<double> dz(h);
   for (int e = 0; e < n; ++e) {
      const auto f = features.row(e);
      const double* z = cache.hidden_pre.data() + static_cast<std::size_t>(e) * h;
      std::fill(dz.begin(), dz.end(), 0.0);
      for (int l = 0; l < 2; ++l) {
         const double gl = grad.psi[e][l];
         g[b2() + l] += gl;
         for (int j = 0; j < h; ++j) {
            g[w2() + l * h + j] += gl * std::max(z[j], 0.0);
            dz[j] += gl * W2[l * h + j];
         }
      }
      for (int j = 0; j < h; ++j) {
         if (z[j] <= 0.0) continue;
         g[b1() + j] += dz[j];
         for (int k = 0; k < d; ++k) g[w1() + j * d + k] += dz[j] * f[k];
      }
   }
   return g;
}

std::vector<double> backward_unary_model(const UnaryModel& m, const FeatureMatrix& features,
                                         const UnaryModel::Cache& cache, const UnaryPotentials& grad_unaries)
{
   return m.backward(features, cache, grad_unaries);
}

// ---------------------------------------------------------------------------
// Loss and mean-field backward pass

LossResult cross_entropy_loss(std::span<const double> q, const EdgeLabeling& gt)
{
   if (q.size() != gt.size()) throw std::invalid_argument("cross_entropy_loss: length mismatch");
   LossResult r;
   r.grad.assign(q.size(), 0.0);
   if (q.empty()) return r;
   const double inv_n = 1.0 / static_cast<double>(q.size());
   const double lo = kProbabilityEpsilon, hi = 1.0 - kProbabilityEpsilon;
   for (std::size_t i = 0; i < q.size(); ++i) {
      double p = q[i];
      if (p < lo || p > hi) {
         ++r.clamped;
         p = std::clamp(p, lo, hi);
      }
      // The gradient is taken at the clamped point so saturated edges still
      // receive a signal in the right direction.
      if (gt[i]) {
         r.loss -= std::log(p);
         r.grad[i] = -inv_n / p;
      } else {
         r.loss -= std::log1p(-p);
         r.grad[i] = inv_n / (1.0 - p);
      }
   }
   r.loss *= inv_n;
   return r;
}

MeanFieldGradients backward_mean_field(const MarginalTrace& trace, const UnaryPotentials& u,
                                       const PatternPotentialTable& pt, const CliqueIndex& cliques,
                                       std::span<const double> grad_final)
{
   const int n = cliques.edge_count();
   if (trace.snapshots.empty()) throw std::invalid_argument("backward_mean_field: empty trace");
   if (u.size() != n || static_cast<int>(grad_final.size()) != n)
      throw std::invalid_argument("backward_mean_field: unary/gradient length does not match the clique index");
   for (const auto& snap : trace.snapshots)
      if (static_cast<int>(snap.size()) != n)
         throw std::invalid_argument("backward_mean_field: trace was produced for a different graph");

   MeanFieldGradients out;
   out.unaries.psi.assign(n, {0.0, 0.0});
   // Message gap m(0) - m(1) depends on gamma only through these differences.
   double delta[3];
   for (int k = 0; k < 3; ++k) delta[k] = pt.by_cut_count(k) - pt.by_cut_count(k + 1);

   std::vector<double> g(grad_final.begin(), grad_final.end());
   std::vector<double> g_prev(n);
   for (int t = trace.iterations(); t >= 1; --t) {
      const auto& q = trace.snapshots[t];
      const auto& q_prev = trace.snapshots[t - 1];
      std::fill(g_prev.begin(), g_prev.end(), 0.0);
      for (EdgeId i = 0; i < n; ++i) {
         const double ds = g[i] * q[i] * (1.0 - q[i]);
         out.unaries.psi[i][0] += ds;
         out.unaries.psi[i][1] -= ds;
         if (ds == 0.0) continue;
         for (const auto& [j, k] : cliques.partners(i)) {
            const double pj[2] = {1.0 - q_prev[j], q_prev[j]};
            const double pk[2] = {1.0 - q_prev[k], q_prev[k]};
            for (int a = 0; a < 2; ++a)
               for (int b = 0; b < 2; ++b) {
                  const double w = ds * pj[a] * pk[b];
                  out.gammas.by_cut_count(a + b) += w;
                  out.gammas.by_cut_count(a + b + 1) -= w;
               }
            const double dpj0 = pk[0] * delta[0] + pk[1] * delta[1];
            const double dpj1 = pk[0] * delta[1] + pk[1] * delta[2];
            const double dpk0 = pj[0] * delta[0] + pj[1] * delta[1];
            const double dpk1 = pj[0] * delta[1] + pj[1] * delta[2];
            g_prev[j] += ds * (dpj1 - dpj0);
            g_prev[k] += ds * (dpk1 - dpk0);
         }
      }
      std::swap(g, g_prev);
   }
   const auto& q0 = trace.snapshots[0];
   for (EdgeId i = 0; i < n; ++i) {
      const double ds = g[i] * q0[i] * (1.0 - q0[i]);
      out.unaries.psi[i][0] += ds;
      out.unaries.psi[i][1] -= ds;
   }
   return out;
}

// ---------------------------------------------------------------------------
// Training

TrainingExample make_training_example(const ClusteringInstance& inst)
{
   if (!inst.labeled())
      throw DataError(inst.name + ": instance has no ground-truth labels; training requires labeled instances");
   TrainingExample ex;
   ex.features = inst.edge_features;
   ex.cycles = enumerate_chordless_cycles(inst.graph, 3);
   if (!ex.cycles.complete)
      throw DataError(inst.name + ": graph has chordless cycles longer than 3; the clique potentials cover triangles only");
   ex.cliques = CliqueIndex(ex.cycles, inst.graph.edge_count());
   ex.gt = *inst.gt_labels;
   return ex;
}

void TrainConfig::validate() const
{
   if (!(unary_lr > 0.0) || !(e2e_lr > 0.0) || !(gamma_lr > 0.0))
      throw std::invalid_argument("train config: learning rates must be positive");
   if (unary_epochs < 1 || e2e_epochs < 1) throw std::invalid_argument("train config: epochs must be positive");
   if (batch_size < 1) throw std::invalid_argument("train config: batch size must be positive");
   if (hidden < 0) throw std::invalid_argument("train config: hidden width must be non-negative");
   if (iterations < 0) throw std::invalid_argument("train config: iterations must be non-negative");
   if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw std::invalid_argument("train config: validation fraction must be in [0, 1)");
}

json to_json(const TrainConfig& cfg)
{
   return {{"unary_lr", cfg.unary_lr},       {"e2e_lr", cfg.e2e_lr},         {"gamma_lr", cfg.gamma_lr},
           {"unary_epochs", cfg.unary_epochs}, {"e2e_epochs", cfg.e2e_epochs}, {"batch_size", cfg.batch_size},
           {"hidden", cfg.hidden},             {"iterations", cfg.iterations}, {"validation_fraction", cfg.validation_fraction},
           {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j)
{
   TrainConfig cfg;
   cfg.unary_lr = j.value("unary_lr", cfg.unary_lr);
   cfg.e2e_lr = j.value("e2e_lr", cfg.e2e_lr);
   cfg.gamma_lr = j.value("gamma_lr", cfg.gamma_lr);
   cfg.unary_epochs = j.value("unary_epochs", cfg.unary_epochs);
   cfg.e2e_epochs = j.value("e2e_epochs", cfg.e2e_epochs);
   cfg.batch_size = j.value("batch_size", cfg.batch_size);
   cfg.hidden = j.value("hidden", cfg.hidden);
   cfg.iterations = j.value("iterations", cfg.iterations);
   cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
   cfg.seed = j.value("seed", cfg.seed);
   return cfg;
}

ExampleEvaluation evaluate_example(const UnaryModel& m, const PatternPotentialTable& pt, const TrainingExample& ex,
                                   int iterations)
{
   const auto u = m.forward(ex.features);
   const auto trace = run_inference(u, pt, ex.cliques, {iterations});
   ExampleEvaluation ev;
   ev.loss = cross_entropy_loss(trace.final(), ex.gt).loss;
   const auto hard = threshold_marginals(trace.final());
   ev.accuracy = labeling_accuracy(hard, ex.gt);
   ev.invalid_ratio = invalid_cycle_ratio(hard, ex.cycles).value_or(0.0);
   return ev;
}

ExampleGradient example_gradient(const UnaryModel& m, const PatternPotentialTable& pt, const TrainingExample& ex,
                                 int iterations)
{
   UnaryModel::Cache cache;
   const auto u = m.forward(ex.features, &cache);
   const auto trace = run_inference(u, pt, ex.cliques, {iterations});
   const auto loss = cross_entropy_loss(trace.final(), ex.gt);
   const auto mf = backward_mean_field(trace, u, pt, ex.cliques, loss.grad);
   ExampleGradient out;
   out.loss = loss.loss;
   out.model = m.backward(ex.features, cache, mf.unaries);
   out.gammas = mf.gammas;
   return out;
}

namespace {

struct Split {
   std::vector<std::size_t> train;
   std::vector<std::size_t> validation;
};

Split split_dataset(std::size_t n, double fraction, std::uint64_t seed)
{
   std::vector<std::size_t> order(n);
   std::iota(order.begin(), order.end(), 0);
   std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
   std::shuffle(order.begin(), order.end(), rng);
   std::size_t n_val = fraction > 0.0 && n >= 2 ? std::max<std::size_t>(1, std::lround(fraction * n)) : 0;
   n_val = std::min(n_val, n - 1);
   Split s;
   s.validation.assign(order.begin(), order.begin() + n_val);
   s.train.assign(order.begin() + n_val, order.end());
   std::sort(s.validation.begin(), s.validation.end());
   return s;
}

bool all_finite(const std::vector<double>& v)
{
   return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct StageSettings {
   double model_lr;
   double gamma_lr;
   int epochs;
   int iterations;
   bool learn_gammas;
   const char* name;
};

EpochMetrics measure(std::span<const TrainingExample> data, const Split& split, const UnaryModel& m,
                     const PatternPotentialTable& pt, int iterations, int epoch)
{
   EpochMetrics em;
   em.epoch = epoch;
   for (std::size_t i : split.train) em.train_loss += evaluate_example(m, pt, data[i], iterations).loss;
   em.train_loss /= static_cast<double>(split.train.size());
   const auto& val = split.validation.empty() ? split.train : split.validation;
   for (std::size_t i : val) {
      const auto ev = evaluate_example(m, pt, data[i], iterations);
      em.validation_loss += ev.loss;
      em.validation_accuracy += ev.accuracy;
      em.validation_invalid_ratio += ev.invalid_ratio;
   }
   const double nv = static_cast<double>(val.size());
   em.validation_loss /= nv;
   em.validation_accuracy /= nv;
   em.validation_invalid_ratio /= nv;
   if (!std::isfinite(em.train_loss) || !std::isfinite(em.validation_loss))
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
   return em;
}

TrainResult run_stage(std::span<const TrainingExample> data, UnaryModel m, PatternPotentialTable pt,
                      const TrainConfig& cfg, const StageSettings& stage)
{
   cfg.validate();
   if (data.empty()) throw DataError(std::string(stage.name) + ": empty training set");
   for (const auto& ex : data)
      if (ex.features.cols != m.input_dim())
         throw DataError(std::string(stage.name) + ": feature dimension " + std::to_string(ex.features.cols) +
                         " does not match the model input " + std::to_string(m.input_dim()));

   const Split split = split_dataset(data.size(), cfg.validation_fraction, cfg.seed);
   std::mt19937_64 rng(cfg.seed);

   TrainResult result;
   result.curve.push_back(measure(data, split, m, pt, stage.iterations, 0));
   result.model = m;
   result.gammas = pt;
   double best = result.curve.back().validation_loss;

   std::vector<std::size_t> order = split.train;
   std::vector<double> grad_model(m.parameter_count());
   for (int epoch = 1; epoch <= stage.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
         const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
         std::fill(grad_model.begin(), grad_model.end(), 0.0);
         PatternPotentialTable grad_gamma;
         for (std::size_t b = start; b < stop; ++b) {
            const auto eg = example_gradient(m, pt, data[order[b]], stage.iterations);
            for (std::size_t p = 0; p < grad_model.size(); ++p) grad_model[p] += eg.model[p];
            for (int c = 0; c < 4; ++c) grad_gamma.by_cut_count(c) += eg.gammas.by_cut_count(c);
         }
         const double scale = 1.0 / static_cast<double>(stop - start);
         if (!all_finite(grad_model) || !std::isfinite(grad_gamma.gamma_000 + grad_gamma.gamma_110 +
                                                       grad_gamma.gamma_111 + grad_gamma.gamma_max))
            throw NumericError(std::string(stage.name) + ": non-finite gradient at epoch " + std::to_string(epoch));
         auto& params = m.params();
         for (std::size_t p = 0; p < params.size(); ++p) params[p] -= stage.model_lr * scale * grad_model[p];
         if (stage.learn_gammas)
            for (int c = 0; c < 4; ++c) pt.by_cut_count(c) -= stage.gamma_lr * scale * grad_gamma.by_cut_count(c);
      }
      result.curve.push_back(measure(data, split, m, pt, stage.iterations, epoch));
      if (result.curve.back().validation_loss < best) {
         best = result.curve.back().validation_loss;
         result.model = m;
         result.gammas = pt;
         result.best_epoch = epoch;
      }
   }
   return result;
}

}  // namespace

TrainResult train_unary(std::span<const TrainingExample> data, UnaryModel m, const TrainConfig& cfg)
{
   return run_stage(data, std::move(m), PatternPotentialTable{}, cfg,
                    {cfg.unary_lr, 0.0, cfg.unary_epochs, 0, false, "train_unary"});
}

TrainResult train_end_to_end(std::span<const TrainingExample> data, UnaryModel m, PatternPotentialTable pt,
                             const TrainConfig& cfg)
{
   return run_stage(data, std::move(m), pt, cfg,
                    {cfg.e2e_lr, cfg.gamma_lr, cfg.e2e_epochs, cfg.iterations, true, "train_end_to_end"});
}

// ---------------------------------------------------------------------------
// Model documents

json save_model(const UnaryModel& m, const PatternPotentialTable& pt, const std::string& stage, const json& training)
{
   return {{"format", kModelFormat},
           {"stage", stage},
           {"input_dim", m.input_dim()},
           {"hidden", m.hidden()},
           {"params", m.params()},
           {"gammas",
            {{"gamma_000", pt.gamma_000},
             {"gamma_110", pt.gamma_110},
             {"gamma_111", pt.gamma_111},
             {"gamma_max", pt.gamma_max}}},
           {"training", training}};
}

LoadedModel load_model(const json& doc)
{
   auto field = [&](const char* key) -> const json& {
      auto it = doc.find(key);
      if (it == doc.end()) throw DataError(std::string("$.") + key + ": missing required field");
      return *it;
   };
   if (!doc.is_object()) throw DataError("$: model document must be an object");
   if (doc.value("format", std::string()) != kModelFormat) throw DataError("$.format: expected " + std::string(kModelFormat));
   LoadedModel out;
   try {
      out.stage = field("stage").get<std::string>();
      out.model = UnaryModel(field("input_dim").get<int>(), field("hidden").get<int>());
      auto params = field("params").get<std::vector<double>>();
      if (params.size() != out.model.parameter_count())
         throw DataError("$.params: expected " + std::to_string(out.model.parameter_count()) + " values, got " +
                         std::to_string(params.size()));
      out.model.params() = std::move(params);
      const json& g = field("gammas");
      out.gammas = {g.at("gamma_000").get<double>(), g.at("gamma_110").get<double>(), g.at("gamma_111").get<double>(),
                    g.at("gamma_max").get<double>()};
   } catch (const json::exception& e) {
      throw DataError(std::string("model document: ") + e.what());
   } catch (const std::invalid_argument& e) {
      throw DataError(std::string("model document: ") + e.what());
   }
   out.training = doc.value("training", json::object());
   return out;
}

}  // namespace mccrf
