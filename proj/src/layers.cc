#include "shem/layers.h"

#include <cmath>
#include <limits>

#include "shem/corpus.h"

namespace shem {

ad::Var gru_step(ad::Tape& tape, const GruParams& p, ad::Var x, ad::Var h) {
  const std::size_t n = p.hidden();
  ad::Var gx = tape.add(tape.matvec(tape.param(*p.w), x), tape.param(*p.bw));
  ad::Var gh = tape.add(tape.matvec(tape.param(*p.u), h), tape.param(*p.bu));
  ad::Var r = tape.sigmoid(tape.add(tape.slice(gx, 0, n), tape.slice(gh, 0, n)));
  ad::Var z = tape.sigmoid(tape.add(tape.slice(gx, n, n), tape.slice(gh, n, n)));
  ad::Var cand = tape.tanh(
      tape.add(tape.slice(gx, 2 * n, n), tape.mul(r, tape.slice(gh, 2 * n, n))));
  // h' = (1 - z) * cand + z * h
  return tape.add(cand, tape.mul(z, tape.sub(h, cand)));
}

EncoderOutput encode_vectors(ad::Tape& tape, const EncoderParams& params,
                             std::span<const ad::Var> inputs) {
  if (inputs.empty()) throw ArgumentError("encode: empty input");
  std::vector<ad::Var> layer_in(inputs.begin(), inputs.end());
  const std::size_t T = layer_in.size();
  for (std::size_t l = 0; l < params.forward.size(); ++l) {
    const auto& fw = params.forward[l];
    const auto& bw = params.backward[l];
    std::vector<ad::Var> fwd(T), bwd(T);
    ad::Var h = tape.zeros(fw.hidden());
    for (std::size_t t = 0; t < T; ++t) fwd[t] = h = gru_step(tape, fw, layer_in[t], h);
    h = tape.zeros(bw.hidden());
    for (std::size_t t = T; t-- > 0;) bwd[t] = h = gru_step(tape, bw, layer_in[t], h);
    for (std::size_t t = 0; t < T; ++t) layer_in[t] = tape.concat({fwd[t], bwd[t]});
  }
  EncoderOutput out;
  out.states = std::move(layer_in);
  out.matrix = tape.stack(out.states);
  out.dim = tape.size(out.states.front());
  return out;
}

EncoderOutput encode(ad::Tape& tape, const EncoderParams& params,
                     Parameter& word_embeddings, std::span<const int> tokens) {
  if (tokens.empty()) throw ArgumentError("encode: empty token list");
  std::vector<ad::Var> inputs;
  inputs.reserve(tokens.size());
  for (int t : tokens) inputs.push_back(tape.row(word_embeddings, static_cast<std::size_t>(t)));
  return encode_vectors(tape, params, inputs);
}

Attention attend(ad::Tape& tape, ad::Var query, ad::Var states) {
  if (tape.cols(states) != tape.size(query)) {
    throw ArgumentError("attend: query and state dimensions differ");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tape.size(query)));
  ad::Var scores = tape.scale(tape.matvec(states, query), inv_sqrt_d);
  ad::Var weights = tape.softmax(scores);
  return {tape.matvec_t(states, weights), weights};
}

std::vector<double> draw_gumbel(std::size_t n, std::mt19937_64& rng) {
  // Open interval keeps -log(-log(u)) finite.
  std::uniform_real_distribution<double> unit(std::numeric_limits<double>::min(), 1.0);
  std::vector<double> g(n);
  for (auto& x : g) {
    double u = unit(rng);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    x = -std::log(-std::log(u));
  }
  return g;
}

std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau,
                                          std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw ArgumentError("Gumbel-Softmax temperature must be positive");
  const auto g = draw_gumbel(logits.size(), rng);
  std::vector<double> y(logits.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = (logits[i] + g[i]) / tau;
    m = std::max(m, y[i]);
  }
  double s = 0.0;
  for (auto& v : y) s += (v = std::exp(v - m));
  for (auto& v : y) v /= s;
  return y;
}

ad::Var gumbel_softmax(ad::Tape& tape, ad::Var logits, double tau,
                       std::span<const double> noise) {
  if (!(tau > 0.0)) throw ArgumentError("Gumbel-Softmax temperature must be positive");
  ad::Var x = logits;
  if (!noise.empty()) x = tape.add(x, tape.constant(noise));
  return tape.softmax(tape.scale(x, 1.0 / tau));
}

std::vector<double> inject_observed(std::span<const double> logits,
                                    std::optional<FrameId> observed, double lambda) {
  std::vector<double> out(logits.begin(), logits.end());
  if (observed) {
    if (*observed < 0 || static_cast<std::size_t>(*observed) >= out.size()) {
      throw ArgumentError("observed frame outside the logit dimension");
    }
    out[*observed] += lambda;
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

DecoderRun decode_inputs(ad::Tape& tape, const DecoderParams& params,
                         Parameter& word_embeddings, std::span<const int> inputs,
                         std::span<const ad::Var> memory) {
  if (memory.empty()) throw ArgumentError("decode: empty latent memory");
  std::vector<ad::Var> keys;
  keys.reserve(memory.size());
  ad::Var mem_w = tape.param(*params.mem_w);
  if (params.slot_b && params.slot_b->rows < memory.size()) {
    throw ArgumentError("decode: more latents than memory slots");
  }
  for (std::size_t i = 0; i < memory.size(); ++i) {
    ad::Var k = tape.matvec(mem_w, memory[i]);
    if (params.slot_b) k = tape.add(k, tape.row(*params.slot_b, i));
    keys.push_back(k);
  }
  ad::Var key_matrix = tape.stack(keys);

  ad::Var h0 = tape.tanh(tape.add(tape.matvec(tape.param(*params.init_w), tape.mean(memory)),
                                  tape.param(*params.init_b)));
  std::vector<ad::Var> h(params.layers.size(), h0);

  ad::Var comb_w = tape.param(*params.comb_w);
  ad::Var comb_b = tape.param(*params.comb_b);
  ad::Var out_w = tape.param(*params.out_w);
  ad::Var out_b = tape.param(*params.out_b);

  DecoderRun run;
  run.logits.reserve(inputs.size());
  for (int tok : inputs) {
    ad::Var x = tape.row(word_embeddings, static_cast<std::size_t>(tok));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      h[l] = gru_step(tape, params.layers[l], x, h[l]);
      x = h[l];
    }
    const Attention att = attend(tape, x, key_matrix);
    ad::Var mixed = tape.tanh(tape.add(tape.matvec(comb_w, tape.concat({x, att.context})), comb_b));
    run.logits.push_back(tape.add(tape.matvec(out_w, mixed), out_b));
  }
  run.final_hidden = h.back();
  return run;
}

std::vector<ad::Var> decode(ad::Tape& tape, const DecoderParams& params,
                            Parameter& word_embeddings, std::span<const int> target,
                            std::span<const ad::Var> memory) {
  if (target.empty() || target.front() != Vocab::kBos) {
    throw ArgumentError("decode: target must begin with BOS");
  }
  return decode_inputs(tape, params, word_embeddings, target.first(target.size() - 1), memory)
      .logits;
}

}  // namespace shem
