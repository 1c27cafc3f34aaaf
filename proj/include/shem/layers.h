#pragma once

// Building blocks of both layers: GRU stacks, scaled dot-product attention,
// Gumbel-Softmax relaxation, observed-frame injection and the
// attention-conditioned decoder.

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "shem/autograd.h"
#include "shem/ontology.h"

namespace shem {

struct GruParams {
  Parameter* w = nullptr;   // 3h x in
  Parameter* u = nullptr;   // 3h x h
  Parameter* bw = nullptr;  // 3h
  Parameter* bu = nullptr;  // 3h

  std::size_t hidden() const { return u->cols; }
};

// One GRU step (r, z, n gate order).
ad::Var gru_step(ad::Tape& tape, const GruParams& p, ad::Var x, ad::Var h);

struct EncoderParams {
  std::vector<GruParams> forward;   // per layer
  std::vector<GruParams> backward;  // per layer
};

struct EncoderOutput {
  std::vector<ad::Var> states;  // one per input position
  ad::Var matrix;               // states stacked as rows
  std::size_t dim = 0;
};

// Multi-layer bidirectional GRU over input vectors; each state concatenates
// the two directions of the top layer.
EncoderOutput encode_vectors(ad::Tape& tape, const EncoderParams& params,
                             std::span<const ad::Var> inputs);

// Word-embedding lookup followed by encode_vectors(). Throws ArgumentError on
// empty input.
EncoderOutput encode(ad::Tape& tape, const EncoderParams& params,
                     Parameter& word_embeddings, std::span<const int> tokens);

struct Attention {
  ad::Var context;
  ad::Var weights;
};

// weights = softmax(states q / sqrt(d)); context = weights^T states.
Attention attend(ad::Tape& tape, ad::Var query, ad::Var states);

// softmax((logits + g) / tau), g ~ Gumbel(0, 1). Throws ArgumentError on tau <= 0.
std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau,
                                          std::mt19937_64& rng);
std::vector<double> draw_gumbel(std::size_t n, std::mt19937_64& rng);

// Differentiable variant with caller-supplied noise (empty noise: none).
ad::Var gumbel_softmax(ad::Tape& tape, ad::Var logits, double tau,
                       std::span<const double> noise);

// logits + lambda * onehot(observed).
std::vector<double> inject_observed(std::span<const double> logits,
                                    std::optional<FrameId> observed, double lambda);

std::size_t argmax(std::span<const double> v);

struct DecoderParams {
  std::vector<GruParams> layers;
  Parameter* init_w = nullptr;  // h x mem_in
  Parameter* init_b = nullptr;
  Parameter* mem_w = nullptr;   // h x mem_in
  Parameter* slot_b = nullptr;  // slots x h, per-position key offset
  Parameter* comb_w = nullptr;  // h x 2h
  Parameter* comb_b = nullptr;
  Parameter* out_w = nullptr;   // vocab x h
  Parameter* out_b = nullptr;

  std::size_t hidden() const { return layers.front().hidden(); }
};

struct DecoderRun {
  std::vector<ad::Var> logits;  // one per consumed input
  ad::Var final_hidden;         // top layer after the last input
};

// Teacher-forced left-to-right decoding. Consumes inputs[0..n) and attends
// over `memory` (latent frame embeddings) at every step.
DecoderRun decode_inputs(ad::Tape& tape, const DecoderParams& params,
                         Parameter& word_embeddings, std::span<const int> inputs,
                         std::span<const ad::Var> memory);

// Logits for positions 1..T-1 of `target` (length T, starting with BOS).
std::vector<ad::Var> decode(ad::Tape& tape, const DecoderParams& params,
                            Parameter& word_embeddings, std::span<const int> target,
                            std::span<const ad::Var> memory);

}  // namespace shem
