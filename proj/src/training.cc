#include "shem/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace shem {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be nonnegative");
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (grad_accumulation == 0) throw ArgumentError("grad_accumulation must be positive");
  if (patience == 0) throw ArgumentError("patience must be positive");
  if (!(grad_clip_norm > 0.0)) throw ArgumentError("grad_clip_norm must be positive");
  if (max_epochs == 0) throw ArgumentError("max_epochs must be positive");
  if (!(contrastive_weight >= 0.0)) throw ArgumentError("contrastive_weight must be nonnegative");
  if (!(contrastive_temperature > 0.0)) throw ArgumentError("contrastive_temperature must be positive");
  if (!(predicate_dropout >= 0.0 && predicate_dropout <= 1.0)) {
    throw ArgumentError("predicate_dropout must lie in [0, 1]");
  }
}

std::string to_string(StopMetric m) {
  switch (m) {
    case StopMetric::kBase: return "base";
    case StopMetric::kCompression: return "compression";
    case StopMetric::kCombined: break;
  }
  return "combined";
}

TrainState::TrainState(std::uint64_t seed)
    : mask_rng(seed * 6 + 1),
      base_gumbel_rng(seed * 6 + 2),
      comp_gumbel_rng(seed * 6 + 3),
      ontology_rng(seed * 6 + 4),
      shuffle_rng(seed * 6 + 5),
      dropout_rng(seed * 6 + 6) {}

bool TrainState::record_validation(double ppl) {
  if (ppl < best_val_ppl) {
    best_val_ppl = ppl;
    epochs_since_best = 0;
    return true;
  }
  ++epochs_since_best;
  return false;
}

double gradient_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(std::span<Parameter* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw ArgumentError("clip norm must be positive");
  const double g = gradient_norm(params);
  if (g > max_norm) {
    const double s = max_norm / g;
    for (Parameter* p : params) {
      for (double& x : p->grad) x *= s;
    }
  }
  return g;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ArgumentError("Adam: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    round_to_float(p);
  }
}

ModelPlan apply_ablation(const ModelConfig& cfg) {
  cfg.validate();
  ModelPlan plan;
  plan.config = cfg;
  plan.compression_layer = cfg.compression_enabled;
  plan.shared_encoder = cfg.compression_enabled && cfg.share_encdec;
  plan.shared_decoder = cfg.compression_enabled && cfg.share_encdec;
  plan.shared_frame_embedding = cfg.compression_enabled && cfg.share_frame_emb;
  plan.comp_input_projection = plan.shared_encoder &&
                               cfg.comp_input == CompInputMode::kInferredFrames &&
                               cfg.frame_emb_dim != cfg.word_emb_dim;
  plan.combine = cfg.compression_enabled ? cfg.combine : CombineMode::kNone;
  return plan;
}

std::unique_ptr<ShemModel> build_model(const ModelPlan& plan, std::size_t lexical_vocab,
                                       std::size_t frame_vocab, const FrameGraph* graph) {
  if (plan.shared_encoder != plan.shared_decoder) {
    throw ArgumentError("encoder and decoder sharing must agree");
  }
  ModelConfig cfg = plan.config;
  cfg.compression_enabled = plan.compression_layer;
  cfg.share_encdec = plan.shared_encoder;
  cfg.share_frame_emb = plan.shared_frame_embedding;
  cfg.combine = plan.combine;
  return std::make_unique<ShemModel>(cfg, lexical_vocab, frame_vocab, graph);
}

LossSums batch_normalizers(const ShemModel& model, std::span<const PreparedDocument> batch) {
  const auto& cfg = model.config();
  LossSums n;
  for (const auto& d : batch) {
    n.tokens += static_cast<double>(d.tokens.size() - 1);
    n.base_steps += static_cast<double>(cfg.n_base_latents);
    if (cfg.compression_enabled) n.comp_steps += static_cast<double>(cfg.n_comp_latents);
    n.observed += static_cast<double>(d.observed.size());
  }
  return n;
}

LossSums accumulate_gradients(ShemModel& model, std::span<const PreparedDocument> part,
                              const LossSums& norms, ForwardRngs rngs) {
  const auto& w = model.config().weights;
  auto coef = [](double weight, double norm) { return norm > 0.0 ? weight / norm : 0.0; };
  const double c_r1 = coef(w.alpha1, norms.tokens);
  const double c_r2 = coef(w.alpha2, norms.tokens);
  const double c_kl1 = coef(w.beta1, norms.base_steps);
  const double c_kl2 = coef(w.beta2, norms.comp_steps);
  const double c_cls = coef(w.gamma, norms.observed);

  ad::Tape tape;
  LossSums sums;
  for (const auto& d : part) {
    tape.clear();
    ForwardInput in;
    in.input_tokens = d.tokens;
    in.input_events = d.seq->events;
    in.target_tokens = d.tokens;
    in.observed = d.observed;
    const ForwardResult r = model.forward(tape, in, ForwardMode::kTrain, rngs);
    ad::Var total = tape.sum({tape.scale(r.recon_base, c_r1), tape.scale(r.recon_comp, c_r2),
                              tape.scale(r.kl_base, c_kl1), tape.scale(r.kl_comp, c_kl2),
                              tape.scale(r.frame_cls, c_cls)});
    tape.backward(total);
    sums += r.sums;
  }
  return sums;
}

namespace {

struct EventRef {
  const EventTuple* event;
  FrameId frame;
};

std::vector<EventRef> contrastive_events(std::span<const PreparedDocument> part) {
  std::vector<EventRef> out;
  for (const auto& d : part) {
    for (std::size_t i = 0; i < d.seq->size(); ++i) {
      out.push_back({&d.seq->events[i], d.seq->gold_frames[i]});
    }
  }
  return out;
}

bool is_anchor(const std::vector<EventRef>& events, std::size_t a) {
  if (is_reserved_frame(events[a].frame) || events[a].frame == kNoFrame) return false;
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (k == a) continue;
    (events[k].frame == events[a].frame ? pos : neg) = true;
  }
  return pos && neg;
}

}  // namespace

std::size_t count_contrastive_anchors(std::span<const PreparedDocument> part) {
  const auto events = contrastive_events(part);
  std::size_t n = 0;
  for (std::size_t a = 0; a < events.size(); ++a) n += is_anchor(events, a) ? 1 : 0;
  return n;
}

ContrastiveStats accumulate_contrastive(ShemModel& model, const Vocab& vocab,
                                        std::span<const PreparedDocument> part,
                                        const TrainConfig& cfg, double anchor_total,
                                        std::mt19937_64& dropout_rng) {
  ContrastiveStats stats;
  const auto events = contrastive_events(part);
  if (events.size() < 2 || anchor_total <= 0.0) return stats;
  ad::Tape tape;
  std::bernoulli_distribution drop(cfg.predicate_dropout);
  std::vector<ad::Var> reps;
  reps.reserve(events.size());
  for (const auto& e : events) {
    std::vector<std::size_t> dropped;
    if (drop(dropout_rng)) dropped.push_back(event_token_offset(0));
    reps.push_back(event_representation(tape, model, *e.event, vocab, dropped));
  }
  std::vector<ad::Var> losses;
  for (std::size_t a = 0; a < events.size(); ++a) {
    if (!is_anchor(events, a)) continue;
    std::vector<ad::Var> pos, neg;
    for (std::size_t k = 0; k < events.size(); ++k) {
      if (k == a) continue;
      (events[k].frame == events[a].frame ? pos : neg).push_back(reps[k]);
    }
    losses.push_back(contrastive_loss(tape, reps[a], pos, neg, cfg.contrastive_temperature));
  }
  if (losses.empty()) return stats;
  ad::Var total = tape.sum(losses);
  stats.loss_sum = tape.scalar_value(total);
  stats.anchors = losses.size();
  tape.backward(total, cfg.contrastive_weight / anchor_total);
  return stats;
}

std::string format_log_row(const TrainLogRow& row) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch=" << row.epoch << " step=" << row.step << " L_r1=" << row.loss.recon_base
     << " L_r2=" << row.loss.recon_comp << " L_KL1=" << row.loss.kl_base
     << " L_KL2=" << row.loss.kl_comp << " L_c=" << row.loss.frame_cls
     << " total=" << row.loss.total << " contrastive=" << row.contrastive
     << " val_ppl_base=" << row.val.base << " val_ppl_comp=" << row.val.compression
     << " val_ppl_total=" << row.val.combined;
  return os.str();
}

double stop_metric_value(const PerplexityReport& r, StopMetric m) {
  switch (m) {
    case StopMetric::kBase: return r.base;
    case StopMetric::kCompression: return r.has_compression ? r.compression : r.base;
    case StopMetric::kCombined: break;
  }
  return r.combined;
}

namespace {

void check_finite(const LossBundle& b) {
  const std::pair<const char*, double> terms[] = {
      {"L_r1", b.recon_base}, {"L_r2", b.recon_comp}, {"L_KL1", b.kl_base},
      {"L_KL2", b.kl_comp},   {"L_c", b.frame_cls},   {"total", b.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NumericalError(name, std::string("non-finite loss term ") + name);
    }
  }
}

}  // namespace

TrainResult train(ShemModel& model, const Corpus& train_data, const Corpus& val_data,
                  const Vocab& vocab, const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  cfg.validate();
  if (train_data.empty()) throw ArgumentError("empty training set");
  if (val_data.empty()) throw ArgumentError("empty validation set");

  TrainState st(cfg.seed);
  Adam adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const auto params = model.parameters();
  const auto& mcfg = model.config();

  std::vector<PreparedDocument> docs(train_data.size());
  for (std::size_t i = 0; i < train_data.size(); ++i) {
    docs[i].seq = &train_data[i];
    docs[i].tokens = tokenize_sequence(train_data[i], vocab);
  }

  std::vector<std::vector<double>> best(params.size());
  auto snapshot = [&] {
    for (std::size_t k = 0; k < params.size(); ++k) best[k] = params[k]->value;
  };
  snapshot();

  TrainResult result;
  const std::size_t effective = cfg.batch_size * cfg.grad_accumulation;
  std::vector<std::size_t> order(docs.size());
  bool step_limit = false;

  for (st.epoch = 1; st.epoch <= cfg.max_epochs; ++st.epoch) {
    if (!cfg.freeze_masks || st.epoch == 1) {
      for (auto& d : docs) {
        const ObservationMask mask = apply_observation_mask(*d.seq, mcfg.epsilon, st.mask_rng);
        d.observed = observations_from_mask(*d.seq, mask, mcfg.n_base_latents);
      }
    }
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), st.shuffle_rng);

    LossSums epoch_sums;
    double epoch_contrastive = 0.0;
    std::size_t epoch_anchors = 0;
    for (std::size_t start = 0; start < order.size(); start += effective) {
      const std::size_t end = std::min(order.size(), start + effective);
      std::vector<PreparedDocument> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(docs[order[i]]);
      const LossSums norms = batch_normalizers(model, batch);
      double anchors = 0.0;
      if (cfg.contrastive_enabled) {
        for (std::size_t s = 0; s < batch.size(); s += cfg.batch_size) {
          anchors += static_cast<double>(count_contrastive_anchors(
              std::span<const PreparedDocument>(batch).subspan(
                  s, std::min(cfg.batch_size, batch.size() - s))));
        }
      }

      model.zero_grad();
      LossSums sums;
      ContrastiveStats cstats;
      for (std::size_t s = 0; s < batch.size(); s += cfg.batch_size) {
        const auto part = std::span<const PreparedDocument>(batch).subspan(
            s, std::min(cfg.batch_size, batch.size() - s));
        sums += accumulate_gradients(
            model, part, norms, {&st.base_gumbel_rng, &st.comp_gumbel_rng, &st.ontology_rng});
        if (cfg.contrastive_enabled) {
          const auto c = accumulate_contrastive(model, vocab, part, cfg, anchors, st.dropout_rng);
          cstats.loss_sum += c.loss_sum;
          cstats.anchors += c.anchors;
        }
      }
      const LossBundle loss = compute_losses(sums, mcfg.weights);
      check_finite(loss);
      if (cfg.contrastive_enabled && !std::isfinite(cstats.loss_sum)) {
        throw NumericalError("contrastive", "non-finite loss term contrastive");
      }
      const double gnorm = clip_gradients(params, cfg.grad_clip_norm);
      if (!std::isfinite(gnorm)) throw NumericalError("gradient", "non-finite gradient norm");
      adam.step(params);

      result.step_losses.push_back(loss);
      epoch_sums += sums;
      epoch_contrastive += cstats.loss_sum;
      epoch_anchors += cstats.anchors;
      ++st.global_step;
      if (cfg.max_steps && st.global_step >= cfg.max_steps) {
        step_limit = true;
        break;
      }
    }

    TrainLogRow row;
    row.epoch = st.epoch;
    row.step = st.global_step;
    row.loss = compute_losses(epoch_sums, mcfg.weights);
    row.contrastive = epoch_anchors ? epoch_contrastive / static_cast<double>(epoch_anchors) : 0.0;
    row.val = perplexity(model, val_data, vocab);
    const double metric = stop_metric_value(row.val, cfg.stop_metric);
    if (!std::isfinite(metric)) throw NumericalError("val_ppl", "non-finite validation perplexity");
    result.log.push_back(row);
    if (callbacks.on_epoch) callbacks.on_epoch(row);
    result.epochs_run = st.epoch;

    if (st.record_validation(metric)) {
      snapshot();
      result.best_epoch = st.epoch;
      if (callbacks.on_improvement) callbacks.on_improvement(model, st);
    }
    if (step_limit) {
      result.stop_reason = "max_steps";
      break;
    }
    if (st.should_stop(cfg.patience)) {
      result.stop_reason = "patience";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max_epochs";

  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  result.best_val_ppl = st.best_val_ppl;
  result.steps_run = st.global_step;
  return result;
}

}  // namespace shem
