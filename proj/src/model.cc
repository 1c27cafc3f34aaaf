#include "shem/model.h"

#include <cmath>

namespace shem {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ad::Var sum_or_zero(ad::Tape& tape, const std::vector<ad::Var>& items) {
  return items.empty() ? tape.scalar(0.0) : tape.sum(items);
}

}  // namespace

void round_to_float(Parameter& p) {
  for (auto& v : p.value) v = static_cast<double>(static_cast<float>(v));
}

LatentChain sample_frame_chain(ad::Tape& tape, const EncoderOutput& enc,
                               std::span<const Observation> observed,
                               std::size_t n_latents, const ChainParams& params,
                               const ChainOptions& opts, std::mt19937_64* rng) {
  if (n_latents == 0) throw ArgumentError("frame chain needs at least one latent");
  const std::size_t n_frames = params.frame_emb->rows;
  for (const auto& o : observed) {
    if (o.index >= n_latents) throw ArgumentError("observation index beyond the latent chain");
    if (o.frame < 0 || static_cast<std::size_t>(o.frame) >= n_frames) {
      throw ArgumentError("observed frame outside the frame vocabulary");
    }
  }
  if (!(opts.tau > 0.0)) throw ArgumentError("Gumbel-Softmax temperature must be positive");
  if (params.step_b && params.step_b->rows < n_latents) {
    throw ArgumentError("chain longer than its step table");
  }

  ad::Var emb = tape.param(*params.frame_emb);
  ad::Var query_w = tape.param(*params.query_w);
  ad::Var query_b = tape.param(*params.query_b);
  ad::Var score_w = tape.param(*params.score_w);
  ad::Var score_b = tape.param(*params.score_b);
  ad::Var prior_w = tape.param(*params.prior_w);
  ad::Var prior_b = tape.param(*params.prior_b);

  LatentChain chain;
  std::vector<double> offsets(n_frames);
  const std::size_t samples = rng ? std::max<std::size_t>(opts.samples, 1) : 1;
  for (std::size_t i = 0; i < n_latents; ++i) {
    ad::Var prev = i == 0 ? tape.param(*params.bos)
                          : tape.row(*params.frame_emb, static_cast<std::size_t>(chain.hard[i - 1]));
    ad::Var pre = tape.add(tape.matvec(query_w, prev), query_b);
    if (params.step_b) pre = tape.add(pre, tape.row(*params.step_b, i));
    ad::Var query = tape.tanh(pre);
    const Attention att = attend(tape, query, enc.matrix);
    ad::Var logits = tape.add(tape.matvec(score_w, tape.concat({query, att.context})), score_b);
    ad::Var prior = tape.add(tape.matvec(prior_w, prev), prior_b);

    std::fill(offsets.begin(), offsets.end(), 0.0);
    for (const auto& o : observed) {
      if (o.index == i) offsets[o.frame] += opts.lambda;
    }
    std::vector<ad::Var> draws;
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<double> shift = offsets;
      if (rng) {
        const auto g = draw_gumbel(n_frames, *rng);
        for (std::size_t k = 0; k < n_frames; ++k) shift[k] += g[k];
      }
      draws.push_back(tape.softmax(tape.scale(tape.add(logits, tape.constant(shift)), 1.0 / opts.tau)));
    }
    ad::Var relaxed = draws.size() == 1 ? draws.front() : tape.mean(draws);
    const auto rv = tape.value(relaxed);
    const auto hard = static_cast<FrameId>(argmax(rv));

    ad::Var z = tape.matvec_t(emb, relaxed);
    if (opts.straight_through) {
      const auto zv = tape.value(z);
      const std::vector<double> frozen(zv.begin(), zv.end());
      z = tape.add(tape.row(*params.frame_emb, static_cast<std::size_t>(hard)),
                   tape.sub(z, tape.constant(frozen)));
    }

    const auto lv = tape.value(logits);
    chain.logits.emplace_back(lv.begin(), lv.end());
    chain.relaxed.emplace_back(rv.begin(), rv.end());
    chain.hard.push_back(hard);
    {
      std::vector<double> q(lv.begin(), lv.end());
      const double m = *std::max_element(q.begin(), q.end());
      double s = 0.0;
      for (auto& v : q) s += (v = std::exp(v - m));
      for (auto& v : q) v /= s;
      chain.q.push_back(std::move(q));
    }
    chain.logit_vars.push_back(logits);
    chain.prior_vars.push_back(prior);
    chain.embedding_vars.push_back(z);
  }
  return chain;
}

std::pair<std::size_t, std::size_t> guidance_span(std::size_t j, std::size_t n_base,
                                                  std::size_t n_comp) {
  return {j * n_base / n_comp, (j + 1) * n_base / n_comp};
}

CompressionGuidance compression_guidance(std::span<const FrameId> base_hard,
                                         const FrameGraph& graph,
                                         const RelationFilter& filter,
                                         std::size_t n_comp, std::mt19937_64& rng) {
  CompressionGuidance g;
  g.abstract.reserve(base_hard.size());
  for (FrameId f : base_hard) {
    g.abstract.push_back(is_reserved_frame(f) ? kAbstain
                                              : sample_abstract_frame(graph, f, filter, rng));
  }
  g.injected_abstract.assign(n_comp, kAbstain);
  for (std::size_t j = 0; j < n_comp; ++j) {
    const auto [first, last] = guidance_span(j, base_hard.size(), n_comp);
    for (std::size_t i = first; i < last; ++i) {
      if (g.abstract[i] == kAbstain) continue;
      g.injected_abstract[j] = g.abstract[i];
      g.injections.push_back({j, g.abstract[i]});
      if (base_hard[i] != g.abstract[i]) g.injections.push_back({j, base_hard[i]});
      break;
    }
  }
  return g;
}

LossSums& LossSums::operator+=(const LossSums& o) {
  recon_base += o.recon_base;
  recon_comp += o.recon_comp;
  kl_base += o.kl_base;
  kl_comp += o.kl_comp;
  frame_cls += o.frame_cls;
  tokens += o.tokens;
  base_steps += o.base_steps;
  comp_steps += o.comp_steps;
  observed += o.observed;
  return *this;
}

double weighted_total(const LossBundle& b, const LossWeights& w) {
  return w.alpha1 * b.recon_base + w.alpha2 * b.recon_comp + w.beta1 * b.kl_base +
         w.beta2 * b.kl_comp + w.gamma * b.frame_cls;
}

LossBundle compute_losses(const LossSums& s, const LossWeights& w) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  LossBundle b;
  b.recon_base = ratio(s.recon_base, s.tokens);
  b.recon_comp = ratio(s.recon_comp, s.tokens);
  b.kl_base = ratio(s.kl_base, s.base_steps);
  b.kl_comp = ratio(s.kl_comp, s.comp_steps);
  b.frame_cls = ratio(s.frame_cls, s.observed);
  b.total = weighted_total(b, w);
  return b;
}

Memories combine_encodings(ad::Tape& tape, std::span<const ad::Var> base,
                           std::span<const ad::Var> comp, CombineMode mode) {
  Memories m;
  switch (mode) {
    case CombineMode::kNone:
      m.base.assign(base.begin(), base.end());
      m.comp.assign(comp.begin(), comp.end());
      return m;
    case CombineMode::kCat:
      m.base.assign(base.begin(), base.end());
      m.base.insert(m.base.end(), comp.begin(), comp.end());
      m.comp = m.base;
      return m;
    case CombineMode::kSum: {
      if (comp.empty()) throw ArgumentError("sum combination needs compression latents");
      for (std::size_t j = 0; j < comp.size(); ++j) {
        const auto [first, last] = guidance_span(j, base.size(), comp.size());
        for (std::size_t i = first; i < last; ++i) {
          if (tape.size(base[i]) != tape.size(comp[j])) {
            throw ArgumentError("sum combination: latent dimensions differ");
          }
        }
      }
      m.base.reserve(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) {
        std::size_t j = 0;
        while (guidance_span(j, base.size(), comp.size()).second <= i) ++j;
        m.base.push_back(tape.add(base[i], comp[j]));
      }
      m.comp = m.base;
      return m;
    }
  }
  return m;
}

std::vector<Observation> observations_from_mask(const EventSequence& seq,
                                                const ObservationMask& mask,
                                                std::size_t n_latents) {
  std::vector<Observation> out;
  for (std::size_t i = 0; i < seq.size() && i < n_latents && i < mask.observed.size(); ++i) {
    if (mask.observed[i] && seq.gold_frames[i] != kNoFrame) out.push_back({i, seq.gold_frames[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------

ShemModel::ShemModel(ModelConfig cfg, std::size_t lexical_vocab, std::size_t frame_vocab,
                     const FrameGraph* graph)
    : cfg_(std::move(cfg)), lexical_vocab_(lexical_vocab), frame_vocab_(frame_vocab),
      graph_(graph) {
  cfg_.validate();
  if (lexical_vocab_ <= static_cast<std::size_t>(Vocab::kSpecialCount - 1)) {
    throw ArgumentError("lexical vocabulary too small");
  }
  if (frame_vocab_ <= static_cast<std::size_t>(kFirstRealFrame)) {
    throw ArgumentError("frame vocabulary has no real frames");
  }

  word_emb_ = &add("word_emb", lexical_vocab_, cfg_.word_emb_dim);
  init_parameter(*word_emb_, cfg_.init_scale);

  base_enc_ = build_encoder("base.enc", cfg_.word_emb_dim);
  base_chain_ = build_chain("base.chain", nullptr, cfg_.n_base_latents);
  base_dec_ = build_decoder("base.dec");

  if (!cfg_.compression_enabled) return;

  const std::size_t comp_in = cfg_.comp_input == CompInputMode::kLexical
                                  ? cfg_.word_emb_dim
                                  : cfg_.frame_emb_dim;
  if (cfg_.share_encdec) {
    for (const auto& e : std::vector<ManifestEntry>(manifest_)) {
      if (e.name.rfind("base.enc.", 0) == 0) alias("comp.enc." + e.name.substr(9), *e.param);
      if (e.name.rfind("base.dec.", 0) == 0) alias("comp.dec." + e.name.substr(9), *e.param);
    }
    comp_enc_ = base_enc_;
    comp_dec_ = base_dec_;
    if (comp_in != cfg_.word_emb_dim) {
      comp_input_proj_ = &add("comp.input_proj", cfg_.word_emb_dim, comp_in);
      init_parameter(*comp_input_proj_, 1.0 / std::sqrt(static_cast<double>(comp_in)));
    }
  } else {
    comp_enc_ = build_encoder("comp.enc", comp_in);
  }
  comp_chain_ = build_chain("comp.chain", cfg_.share_frame_emb ? base_chain_.frame_emb : nullptr,
                            cfg_.n_comp_latents);
  if (!cfg_.share_encdec) comp_dec_ = build_decoder("comp.dec");
}

Parameter& ShemModel::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (find(name)) throw ArgumentError("duplicate parameter name: " + name);
  storage_.emplace_back(name, rows, cols);
  manifest_.push_back({name, &storage_.back()});
  return storage_.back();
}

void ShemModel::alias(const std::string& name, Parameter& target) {
  if (find(name)) throw ArgumentError("duplicate parameter name: " + name);
  manifest_.push_back({name, &target});
}

void ShemModel::init_parameter(Parameter& p, double bound) {
  std::mt19937_64 rng(fnv1a(p.name) ^ (cfg_.init_seed * 0x9E3779B97F4A7C15ULL));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : p.value) v = u(rng);
  round_to_float(p);
}

GruParams ShemModel::build_gru(const std::string& prefix, std::size_t input_dim,
                               std::size_t hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruParams g;
  g.w = &add(prefix + ".w", 3 * hidden, input_dim);
  g.u = &add(prefix + ".u", 3 * hidden, hidden);
  g.bw = &add(prefix + ".bw", 3 * hidden, 1);
  g.bu = &add(prefix + ".bu", 3 * hidden, 1);
  init_parameter(*g.w, bound);
  init_parameter(*g.u, bound);
  return g;
}

EncoderParams ShemModel::build_encoder(const std::string& prefix, std::size_t input_dim) {
  EncoderParams e;
  const std::size_t h = cfg_.hidden_dim / 2;
  for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : cfg_.hidden_dim;
    const std::string p = prefix + ".l" + std::to_string(l);
    e.forward.push_back(build_gru(p + ".fw", in, h));
    e.backward.push_back(build_gru(p + ".bw", in, h));
  }
  return e;
}

DecoderParams ShemModel::build_decoder(const std::string& prefix) {
  DecoderParams d;
  const std::size_t h = cfg_.hidden_dim;
  const std::size_t df = cfg_.frame_emb_dim;
  for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
    d.layers.push_back(build_gru(prefix + ".l" + std::to_string(l),
                                 l == 0 ? cfg_.word_emb_dim : h, h));
  }
  auto mat = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Parameter& p = add(prefix + "." + name, rows, cols);
    init_parameter(p, 1.0 / std::sqrt(static_cast<double>(cols)));
    return &p;
  };
  d.init_w = mat("init_w", h, df);
  d.init_b = &add(prefix + ".init_b", h, 1);
  d.mem_w = mat("mem_w", h, df);
  d.slot_b = &add(prefix + ".slot_b", memory_slots(), h);
  init_parameter(*d.slot_b, cfg_.init_scale);
  d.comb_w = mat("comb_w", h, 2 * h);
  d.comb_b = &add(prefix + ".comb_b", h, 1);
  d.out_w = mat("out_w", lexical_vocab_, h);
  d.out_b = &add(prefix + ".out_b", lexical_vocab_, 1);
  return d;
}

ChainParams ShemModel::build_chain(const std::string& prefix, Parameter* shared_emb,
                                   std::size_t n_latents) {
  ChainParams c;
  const std::size_t h = cfg_.hidden_dim;
  const std::size_t df = cfg_.frame_emb_dim;
  auto mat = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Parameter& p = add(prefix + "." + name, rows, cols);
    init_parameter(p, 1.0 / std::sqrt(static_cast<double>(cols)));
    return &p;
  };
  if (shared_emb) {
    alias(prefix + ".frame_emb", *shared_emb);
    c.frame_emb = shared_emb;
  } else {
    c.frame_emb = &add(prefix + ".frame_emb", frame_vocab_, df);
    init_parameter(*c.frame_emb, cfg_.init_scale);
  }
  c.bos = &add(prefix + ".bos", df, 1);
  init_parameter(*c.bos, cfg_.init_scale);
  c.query_w = mat("query_w", h, df);
  c.query_b = &add(prefix + ".query_b", h, 1);
  c.step_b = &add(prefix + ".step_b", n_latents, h);
  init_parameter(*c.step_b, cfg_.init_scale);
  c.score_w = mat("score_w", frame_vocab_, 2 * h);
  c.score_b = &add(prefix + ".score_b", frame_vocab_, 1);
  c.prior_w = mat("prior_w", frame_vocab_, df);
  c.prior_b = &add(prefix + ".prior_b", frame_vocab_, 1);
  return c;
}

std::vector<Parameter*> ShemModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : storage_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ShemModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : storage_) out.push_back(&p);
  return out;
}

std::size_t ShemModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : storage_) n += p.size();
  return n;
}

Parameter* ShemModel::find(std::string_view name) {
  for (auto& e : manifest_) {
    if (e.name == name) return e.param;
  }
  return nullptr;
}

const Parameter* ShemModel::find(std::string_view name) const {
  for (const auto& e : manifest_) {
    if (e.name == name) return e.param;
  }
  return nullptr;
}

void ShemModel::zero_grad() {
  for (auto& p : storage_) p.zero_grad();
}

std::size_t ShemModel::memory_slots() const {
  if (!cfg_.compression_enabled) return cfg_.n_base_latents;
  if (cfg_.combine == CombineMode::kCat) return cfg_.n_base_latents + cfg_.n_comp_latents;
  return std::max(cfg_.n_base_latents, cfg_.n_comp_latents);
}

ChainOptions ShemModel::chain_options(bool comp) const {
  ChainOptions o;
  o.tau = cfg_.gumbel_temperature;
  o.samples = comp ? cfg_.comp_gumbel_samples : 1;
  o.lambda = cfg_.injection_weight;
  o.straight_through = cfg_.straight_through;
  return o;
}

std::vector<ad::Var> ShemModel::pooled_event_embeddings(ad::Tape& tape,
                                                        std::span<const int> tokens,
                                                        std::size_t n_events) {
  if (tokens.size() < tokenized_length(n_events)) {
    throw ArgumentError("token sequence shorter than its event count");
  }
  std::vector<ad::Var> out;
  out.reserve(n_events);
  for (std::size_t e = 0; e < n_events; ++e) {
    const std::size_t off = event_token_offset(e);
    std::vector<ad::Var> slots;
    for (std::size_t k = 0; k < 4; ++k) {
      slots.push_back(tape.row(*word_emb_, static_cast<std::size_t>(tokens[off + k])));
    }
    out.push_back(tape.mean(slots));
  }
  return out;
}

ForwardResult ShemModel::forward(ad::Tape& tape, const ForwardInput& in, ForwardMode mode,
                                 const ForwardRngs& rngs) {
  const bool train = mode == ForwardMode::kTrain;
  if (in.target_tokens.size() < 2) throw ArgumentError("target sequence too short");
  ForwardResult r;

  if (in.input_tokens.empty()) throw ArgumentError("encode: empty token list");
  std::vector<ad::Var> embedded;
  embedded.reserve(in.input_tokens.size());
  for (int t : in.input_tokens) embedded.push_back(tape.row(*word_emb_, static_cast<std::size_t>(t)));
  for (std::size_t pos : in.dropped) {
    if (pos < embedded.size()) embedded[pos] = tape.zeros(cfg_.word_emb_dim);
  }
  const EncoderOutput enc_base = encode_vectors(tape, base_enc_, embedded);
  r.base = sample_frame_chain(tape, enc_base, in.observed, cfg_.n_base_latents, base_chain_,
                              chain_options(false), train ? rngs.base_gumbel : nullptr);

  if (cfg_.compression_enabled) {
    std::vector<ad::Var> inputs;
    if (cfg_.comp_input == CompInputMode::kLexical) {
      inputs = pooled_event_embeddings(tape, in.input_tokens, in.input_events.size());
    } else {
      for (FrameId f : r.base.hard) {
        inputs.push_back(tape.row(*base_chain_.frame_emb, static_cast<std::size_t>(f)));
      }
    }
    if (comp_input_proj_) {
      ad::Var proj = tape.param(*comp_input_proj_);
      for (auto& x : inputs) x = tape.matvec(proj, x);
    }
    const EncoderOutput enc_comp = encode_vectors(tape, comp_enc_, inputs);

    static const FrameGraph kEmptyGraph;
    const FrameGraph& graph = graph_ ? *graph_ : kEmptyGraph;
    std::mt19937_64 eval_rng(0);
    std::mt19937_64& onto = (train && rngs.ontology) ? *rngs.ontology : eval_rng;
    r.guidance = compression_guidance(r.base.hard, graph, cfg_.relation_filter,
                                      cfg_.n_comp_latents, onto);
    r.comp = sample_frame_chain(tape, enc_comp, r.guidance.injections, cfg_.n_comp_latents,
                                comp_chain_, chain_options(true),
                                train ? rngs.comp_gumbel : nullptr);
  }

  const std::span<const ad::Var> no_latents;
  const Memories mem = combine_encodings(
      tape, r.base.embedding_vars, r.comp ? std::span<const ad::Var>(r.comp->embedding_vars) : no_latents,
      cfg_.compression_enabled ? cfg_.combine : CombineMode::kNone);

  const auto inputs = in.target_tokens.first(in.target_tokens.size() - 1);
  if (in.target_tokens.front() != Vocab::kBos) throw ArgumentError("decode: target must begin with BOS");
  DecoderRun base_run = decode_inputs(tape, base_dec_, *word_emb_, inputs, mem.base);
  r.base_logits = std::move(base_run.logits);
  r.base_final_hidden = base_run.final_hidden;

  std::vector<ad::Var> terms;
  for (std::size_t t = 0; t < r.base_logits.size(); ++t) {
    terms.push_back(tape.cross_entropy(r.base_logits[t], static_cast<std::size_t>(in.target_tokens[t + 1])));
  }
  r.recon_base = sum_or_zero(tape, terms);

  terms.clear();
  for (std::size_t i = 0; i < r.base.size(); ++i) {
    terms.push_back(tape.kl(r.base.logit_vars[i], r.base.prior_vars[i], cfg_.kl_mode));
  }
  r.kl_base = sum_or_zero(tape, terms);

  terms.clear();
  for (const auto& o : in.observed) {
    terms.push_back(tape.cross_entropy(r.base.logit_vars[o.index], static_cast<std::size_t>(o.frame)));
  }
  r.frame_cls = sum_or_zero(tape, terms);

  if (r.comp) {
    r.comp_logits = decode_inputs(tape, comp_dec_, *word_emb_, inputs, mem.comp).logits;
    terms.clear();
    for (std::size_t t = 0; t < r.comp_logits.size(); ++t) {
      terms.push_back(tape.cross_entropy(r.comp_logits[t], static_cast<std::size_t>(in.target_tokens[t + 1])));
    }
    r.recon_comp = sum_or_zero(tape, terms);
    terms.clear();
    for (std::size_t i = 0; i < r.comp->size(); ++i) {
      terms.push_back(tape.kl(r.comp->logit_vars[i], r.comp->prior_vars[i], cfg_.kl_mode));
    }
    r.kl_comp = sum_or_zero(tape, terms);
  } else {
    r.recon_comp = tape.scalar(0.0);
    r.kl_comp = tape.scalar(0.0);
  }

  r.sums.recon_base = tape.scalar_value(r.recon_base);
  r.sums.recon_comp = tape.scalar_value(r.recon_comp);
  r.sums.kl_base = tape.scalar_value(r.kl_base);
  r.sums.kl_comp = tape.scalar_value(r.kl_comp);
  r.sums.frame_cls = tape.scalar_value(r.frame_cls);
  r.sums.tokens = static_cast<double>(inputs.size());
  r.sums.base_steps = static_cast<double>(r.base.size());
  r.sums.comp_steps = r.comp ? static_cast<double>(r.comp->size()) : 0.0;
  r.sums.observed = static_cast<double>(in.observed.size());
  return r;
}

}  // namespace shem
