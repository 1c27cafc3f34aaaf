#pragma once

// Adam with gradient accumulation, global-norm clipping, early stopping on
// validation perplexity and per-epoch redraws of the observation masks.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shem/corpus.h"
#include "shem/evaluation.h"
#include "shem/model.h"

namespace shem {

enum class StopMetric { kCombined, kBase, kCompression };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t grad_accumulation = 8;
  std::size_t patience = 10;
  double grad_clip_norm = 5.0;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 1;
  bool contrastive_enabled = false;
  double contrastive_weight = 0.1;
  double contrastive_temperature = 0.1;
  double predicate_dropout = 0.7;
  bool freeze_masks = false;
  StopMetric stop_metric = StopMetric::kCombined;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Stop after this many optimizer steps (0: no limit).
  std::size_t max_steps = 0;

  void validate() const;
};

std::string to_string(StopMetric m);

struct TrainState {
  std::size_t epoch = 0;
  std::size_t global_step = 0;
  double best_val_ppl = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  std::mt19937_64 mask_rng;
  std::mt19937_64 base_gumbel_rng;
  std::mt19937_64 comp_gumbel_rng;
  std::mt19937_64 ontology_rng;
  std::mt19937_64 shuffle_rng;
  std::mt19937_64 dropout_rng;

  explicit TrainState(std::uint64_t seed);

  // Records one validation score; returns true when it is a new best.
  bool record_validation(double ppl);
  bool should_stop(std::size_t patience) const { return epochs_since_best >= patience; }
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

// Scales all gradients by max_norm / g when their global L2 norm g exceeds
// max_norm. Returns g.
double clip_gradients(std::span<Parameter* const> params, double max_norm);
double gradient_norm(std::span<Parameter* const> params);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps);
  // Updates every parameter from its gradient, then rounds values to float32.
  void step(std::span<Parameter* const> params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Which parameter sets a configuration builds and which are shared.
struct ModelPlan {
  ModelConfig config;
  bool compression_layer = true;
  bool shared_encoder = false;
  bool shared_decoder = false;
  bool shared_frame_embedding = false;
  bool comp_input_projection = false;
  CombineMode combine = CombineMode::kNone;
};

ModelPlan apply_ablation(const ModelConfig& cfg);
std::unique_ptr<ShemModel> build_model(const ModelPlan& plan, std::size_t lexical_vocab,
                                       std::size_t frame_vocab, const FrameGraph* graph);

// One effective batch of documents with observations drawn.
struct PreparedDocument {
  const EventSequence* seq = nullptr;
  std::vector<int> tokens;
  std::vector<Observation> observed;
};

// Gradient of the batch loss accumulated into the parameters (not zeroed
// first). Normalizers come from the whole batch, so splitting it into
// micro-batches and calling this per part yields the full-batch gradient.
LossSums accumulate_gradients(ShemModel& model, std::span<const PreparedDocument> part,
                              const LossSums& batch_norms, ForwardRngs rngs);

// Normalizers (token, step and observation counts) of a batch.
LossSums batch_normalizers(const ShemModel& model, std::span<const PreparedDocument> batch);

struct ContrastiveStats {
  double loss_sum = 0.0;
  std::size_t anchors = 0;
};

// In-batch contrastive objective: positives share the anchor's gold frame,
// negatives are the remaining events. Accumulates weight * mean loss
// gradients; `anchor_total` is the number of anchors in the full batch.
ContrastiveStats accumulate_contrastive(ShemModel& model, const Vocab& vocab,
                                        std::span<const PreparedDocument> part,
                                        const TrainConfig& cfg, double anchor_total,
                                        std::mt19937_64& dropout_rng);
std::size_t count_contrastive_anchors(std::span<const PreparedDocument> part);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBundle loss;
  double contrastive = 0.0;
  PerplexityReport val;
};

// "epoch=1 step=4 L_r1=... val_ppl_total=..."
std::string format_log_row(const TrainLogRow& row);

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::vector<LossBundle> step_losses;
  double best_val_ppl = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t steps_run = 0;
  std::string stop_reason;
};

struct TrainCallbacks {
  std::function<void(const TrainLogRow&)> on_epoch;
  // Called after a new best validation score, model holds the new best.
  std::function<void(const ShemModel&, const TrainState&)> on_improvement;
};

// Trains in place; on return the model holds the best-validation parameters.
// Throws NumericalError when a loss term or the gradient goes non-finite.
TrainResult train(ShemModel& model, const Corpus& train_data, const Corpus& val_data,
                  const Vocab& vocab, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

double stop_metric_value(const PerplexityReport& r, StopMetric m);

}  // namespace shem
