#pragma once

// The two-layer SHEM network. The base layer encodes the token sequence,
// samples an ancestral chain of frame latents with observed-frame injection
// and reconstructs the sequence; the compression layer does the same over a
// shorter chain guided by ontology parents of the base predictions.

#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shem/autograd.h"
#include "shem/config.h"
#include "shem/corpus.h"
#include "shem/layers.h"
#include "shem/ontology.h"

namespace shem {

struct ChainParams {
  Parameter* frame_emb = nullptr;  // frames x d_f
  Parameter* bos = nullptr;        // d_f
  Parameter* query_w = nullptr;    // h x d_f
  Parameter* query_b = nullptr;
  Parameter* step_b = nullptr;     // n_latents x h, per-step query offset
  Parameter* score_w = nullptr;    // frames x 2h
  Parameter* score_b = nullptr;
  Parameter* prior_w = nullptr;    // frames x d_f
  Parameter* prior_b = nullptr;
};

struct ChainOptions {
  double tau = 0.5;
  std::size_t samples = 1;
  double lambda = 100.0;
  bool straight_through = false;
};

// An injection of `frame` into step `index`. Several may target one step.
struct Observation {
  std::size_t index = 0;
  FrameId frame = kNoFrame;
};

struct LatentChain {
  std::vector<std::vector<double>> logits;   // before injection
  std::vector<std::vector<double>> relaxed;  // simplex samples
  std::vector<FrameId> hard;                 // argmax of relaxed
  std::vector<std::vector<double>> q;        // softmax(logits)

  std::vector<ad::Var> logit_vars;
  std::vector<ad::Var> prior_vars;      // prior logits given hard[i-1]
  std::vector<ad::Var> embedding_vars;  // latent frame embeddings

  std::size_t size() const { return hard.size(); }
};

// Ancestral Gumbel-Softmax chain over `enc`. A null rng gives the noise-free
// evaluation path (softmax(logits / tau)). Throws ArgumentError when an
// observation index is out of range or n_latents is zero.
LatentChain sample_frame_chain(ad::Tape& tape, const EncoderOutput& enc,
                               std::span<const Observation> observed,
                               std::size_t n_latents, const ChainParams& params,
                               const ChainOptions& opts, std::mt19937_64* rng);

// Base span [first, last) guiding compression step j.
std::pair<std::size_t, std::size_t> guidance_span(std::size_t j, std::size_t n_base,
                                                  std::size_t n_comp);

struct CompressionGuidance {
  std::vector<FrameId> abstract;           // sampled parent per base step
  std::vector<FrameId> injected_abstract;  // per compression step, ABSTAIN if none
  std::vector<Observation> injections;     // abstract and base frame per step
};

CompressionGuidance compression_guidance(std::span<const FrameId> base_hard,
                                         const FrameGraph& graph,
                                         const RelationFilter& filter,
                                         std::size_t n_comp, std::mt19937_64& rng);

struct LossBundle {
  double recon_base = 0.0;
  double recon_comp = 0.0;
  double kl_base = 0.0;
  double kl_comp = 0.0;
  double frame_cls = 0.0;
  double total = 0.0;
};

// Raw per-batch sums and their normalizers.
struct LossSums {
  double recon_base = 0.0;
  double recon_comp = 0.0;
  double kl_base = 0.0;
  double kl_comp = 0.0;
  double frame_cls = 0.0;
  double tokens = 0.0;      // predicted tokens
  double base_steps = 0.0;  // chain steps over all documents
  double comp_steps = 0.0;
  double observed = 0.0;    // observed frames

  LossSums& operator+=(const LossSums& o);
};

// Per-token recon, per-step KL, per-observation classification.
LossBundle compute_losses(const LossSums& sums, const LossWeights& w);
double weighted_total(const LossBundle& b, const LossWeights& w);

struct Memories {
  std::vector<ad::Var> base;
  std::vector<ad::Var> comp;
};

// Decoder conditioning sets under the combination mode. `sum` adds each
// compression latent onto the base positions of its guidance span.
Memories combine_encodings(ad::Tape& tape, std::span<const ad::Var> base,
                           std::span<const ad::Var> comp, CombineMode mode);

enum class ForwardMode { kTrain, kEval };

struct ForwardRngs {
  std::mt19937_64* base_gumbel = nullptr;
  std::mt19937_64* comp_gumbel = nullptr;
  std::mt19937_64* ontology = nullptr;
};

struct ForwardInput {
  std::span<const int> input_tokens;          // encoder side
  std::span<const EventTuple> input_events;   // for lexical compression input
  std::span<const int> target_tokens;         // decoder side
  std::span<const Observation> observed;      // base-layer injections
  std::span<const std::size_t> dropped;       // encoder positions zeroed
};

struct ForwardResult {
  LatentChain base;
  std::optional<LatentChain> comp;
  CompressionGuidance guidance;
  std::vector<ad::Var> base_logits;
  std::vector<ad::Var> comp_logits;
  ad::Var base_final_hidden;

  // Scalar sums over this document.
  ad::Var recon_base;
  ad::Var recon_comp;
  ad::Var kl_base;
  ad::Var kl_comp;
  ad::Var frame_cls;
  LossSums sums;
};

struct ManifestEntry {
  std::string name;
  Parameter* param = nullptr;
};

class ShemModel {
 public:
  ShemModel(ModelConfig cfg, std::size_t lexical_vocab, std::size_t frame_vocab,
            const FrameGraph* graph);

  ShemModel(const ShemModel&) = delete;
  ShemModel& operator=(const ShemModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  std::size_t lexical_vocab() const { return lexical_vocab_; }
  std::size_t frame_vocab() const { return frame_vocab_; }
  const FrameGraph* graph() const { return graph_; }
  void set_graph(const FrameGraph* g) { graph_ = g; }

  // Every name, including aliases of shared parameters.
  const std::vector<ManifestEntry>& manifest() const { return manifest_; }
  // Distinct storage, in creation order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  void zero_grad();

  Parameter& word_embeddings() { return *word_emb_; }
  const EncoderParams& encoder(bool comp) const { return comp ? comp_enc_ : base_enc_; }
  const DecoderParams& decoder(bool comp) const { return comp ? comp_dec_ : base_dec_; }
  const ChainParams& chain(bool comp) const { return comp ? comp_chain_ : base_chain_; }
  ChainOptions chain_options(bool comp) const;
  // Rows of each decoder's slot table.
  std::size_t memory_slots() const;

  ForwardResult forward(ad::Tape& tape, const ForwardInput& in, ForwardMode mode,
                        const ForwardRngs& rngs);

  // Mean of word embeddings over each event's four slots.
  std::vector<ad::Var> pooled_event_embeddings(ad::Tape& tape, std::span<const int> tokens,
                                               std::size_t n_events);

 private:
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols);
  void alias(const std::string& name, Parameter& target);
  void init_parameter(Parameter& p, double bound);
  EncoderParams build_encoder(const std::string& prefix, std::size_t input_dim);
  DecoderParams build_decoder(const std::string& prefix);
  ChainParams build_chain(const std::string& prefix, Parameter* shared_emb,
                          std::size_t n_latents);
  GruParams build_gru(const std::string& prefix, std::size_t input_dim, std::size_t hidden);

  ModelConfig cfg_;
  std::size_t lexical_vocab_;
  std::size_t frame_vocab_;
  const FrameGraph* graph_;

  std::deque<Parameter> storage_;
  std::vector<ManifestEntry> manifest_;

  Parameter* word_emb_ = nullptr;
  EncoderParams base_enc_, comp_enc_;
  DecoderParams base_dec_, comp_dec_;
  ChainParams base_chain_, comp_chain_;
  Parameter* comp_input_proj_ = nullptr;
};

// Observations of the gold frames selected by `mask`, clipped to n_latents.
std::vector<Observation> observations_from_mask(const EventSequence& seq,
                                                const ObservationMask& mask,
                                                std::size_t n_latents);

// Rounds every value to the nearest float32.
void round_to_float(Parameter& p);

}  // namespace shem
