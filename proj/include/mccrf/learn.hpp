#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "mccrf/crf.hpp"
#include "mccrf/data.hpp"

namespace mccrf {

/// Raised when training or inference produces a non-finite value.
class NumericError : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

/// Two affine layers with a rectifier between them mapping an edge feature to
/// (psi(0), psi(1)). hidden == 0 degenerates to a single affine map, i.e. the
/// logistic baseline.
///
/// Parameters live in one flat vector:
///   hidden > 0: W1 (hidden x in), b1 (hidden), W2 (2 x hidden), b2 (2)
///   hidden = 0: W (2 x in), b (2)
class UnaryModel {
public:
   UnaryModel() = default;
   UnaryModel(int input_dim, int hidden);
   /// He-style Gaussian initialization from the seed; biases start at zero.
   static UnaryModel random(int input_dim, int hidden, std::uint64_t seed);

   int input_dim() const { return input_dim_; }
   int hidden() const { return hidden_; }
   std::size_t parameter_count() const { return params_.size(); }
   std::vector<double>& params() { return params_; }
   const std::vector<double>& params() const { return params_; }

   struct Cache {
      /// Pre-activation of the hidden layer, one row per edge.
      std::vector<double> hidden_pre;
   };

   UnaryPotentials forward(const FeatureMatrix& features, Cache* cache = nullptr) const;

   /// Gradient of the loss w.r.t. the flat parameter vector, given the
   /// gradient w.r.t. the produced unaries and the forward cache.
   std::vector<double> backward(const FeatureMatrix& features, const Cache& cache,
                                const UnaryPotentials& grad_unaries) const;

   bool operator==(const UnaryModel&) const = default;

private:
   std::size_t w1() const { return 0; }
   std::size_t b1() const { return static_cast<std::size_t>(hidden_) * input_dim_; }
   std::size_t w2() const { return b1() + hidden_; }
   std::size_t b2() const { return w2() + 2 * static_cast<std::size_t>(hidden_); }

   int input_dim_ = 0;
   int hidden_ = 0;
   std::vector<double> params_;
};

std::vector<double> backward_unary_model(const UnaryModel& m, const FeatureMatrix& features,
                                         const UnaryModel::Cache& cache, const UnaryPotentials& grad_unaries);

struct LossResult {
   double loss = 0.0;
   std::vector<double> grad;   // dL/dq per edge
   std::size_t clamped = 0;    // entries moved into [eps, 1-eps]
};

/// Mean binary cross-entropy of the cut probabilities against ground truth.
LossResult cross_entropy_loss(std::span<const double> q, const EdgeLabeling& gt);

struct MeanFieldGradients {
   UnaryPotentials unaries;            // dL/dpsi
   PatternPotentialTable gammas;       // dL/dgamma per pattern class
};

/// Reverse-mode pass through every unrolled step of run_inference and the
/// softmax initialization.
MeanFieldGradients backward_mean_field(const MarginalTrace& trace, const UnaryPotentials& u,
                                       const PatternPotentialTable& pt, const CliqueIndex& cliques,
                                       std::span<const double> grad_final);

/// Everything a training step needs from one labeled instance.
struct TrainingExample {
   FeatureMatrix features;
   CycleSet cycles;
   CliqueIndex cliques;
   EdgeLabeling gt;
};

/// Throws DataError for unlabeled instances or cycle sets that are not
/// complete 3-cycle sets.
TrainingExample make_training_example(const ClusteringInstance& inst);

struct TrainConfig {
   double unary_lr = 0.05;
   double e2e_lr = 0.01;
   double gamma_lr = 0.005;
   int unary_epochs = 150;
   int e2e_epochs = 40;
   int batch_size = 8;
   int hidden = 16;
   int iterations = 3;
   double validation_fraction = 0.1;
   std::uint64_t seed = 1;

   void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
   int epoch = 0;
   double train_loss = 0.0;
   double validation_loss = 0.0;
   double validation_accuracy = 0.0;
   double validation_invalid_ratio = 0.0;
};

struct TrainResult {
   UnaryModel model;
   PatternPotentialTable gammas;
   std::vector<EpochMetrics> curve;
   int best_epoch = 0;
};

struct ExampleEvaluation {
   double loss = 0.0;
   double accuracy = 0.0;        // thresholded final marginals vs gt labels
   double invalid_ratio = 0.0;   // 0 when the instance has no cliques
};

ExampleEvaluation evaluate_example(const UnaryModel& m, const PatternPotentialTable& pt, const TrainingExample& ex,
                                   int iterations);

/// Loss and full parameter gradient for one example. The gamma gradient is
/// left zero when iterations == 0.
struct ExampleGradient {
   double loss = 0.0;
   std::vector<double> model;
   PatternPotentialTable gammas;
};

ExampleGradient example_gradient(const UnaryModel& m, const PatternPotentialTable& pt, const TrainingExample& ex,
                                 int iterations);

/// Stage one: the unary network alone, loss on the softmax-initialized
/// marginals. Returns the parameters with the best validation loss.
TrainResult train_unary(std::span<const TrainingExample> data, UnaryModel m, const TrainConfig& cfg);

/// Stage two: joint descent on unary weights and pattern potentials through
/// cfg.iterations mean-field steps.
TrainResult train_end_to_end(std::span<const TrainingExample> data, UnaryModel m, PatternPotentialTable pt,
                             const TrainConfig& cfg);

inline constexpr const char* kModelFormat = "mccrf-model/1";

/// `stage` is "unary" or "end2end"; `training` echoes the config used.
nlohmann::json save_model(const UnaryModel& m, const PatternPotentialTable& pt, const std::string& stage,
                          const nlohmann::json& training);

struct LoadedModel {
   UnaryModel model;
   PatternPotentialTable gammas;
   std::string stage;
   nlohmann::json training;
};

LoadedModel load_model(const nlohmann::json& doc);

}  // namespace mccrf
