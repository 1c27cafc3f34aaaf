#include "shem/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shem/kernels.h"

namespace shem {

double combine_perplexity(double base, double compression) {
  return std::exp(0.5 * (std::log(base) + std::log(compression)));
}

SequenceScore score_sequence(ShemModel& model, std::span<const int> input_tokens,
                             std::span<const EventTuple> input_events,
                             std::span<const int> target_tokens) {
  ad::Tape tape;
  ForwardInput in;
  in.input_tokens = input_tokens;
  in.input_events = input_events;
  in.target_tokens = target_tokens;
  const ForwardResult r = model.forward(tape, in, ForwardMode::kEval, {});
  SequenceScore s;
  s.base_nll = r.sums.recon_base;
  s.comp_nll = r.sums.recon_comp;
  s.tokens = static_cast<std::size_t>(r.sums.tokens);
  return s;
}

PerplexityReport report_from_scores(std::span<const SequenceScore> scores,
                                    bool has_compression) {
  if (scores.empty()) throw ArgumentError("perplexity of an empty dataset");
  double base = 0.0, comp = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : scores) {
    base += s.base_nll;
    comp += s.comp_nll;
    tokens += s.tokens;
  }
  PerplexityReport r;
  r.token_count = tokens;
  r.has_compression = has_compression;
  r.base = std::exp(base / static_cast<double>(tokens));
  if (has_compression) {
    r.compression = std::exp(comp / static_cast<double>(tokens));
    r.combined = combine_perplexity(r.base, r.compression);
  } else {
    r.compression = 0.0;
    r.combined = r.base;
  }
  return r;
}

PerplexityReport perplexity(ShemModel& model, const Corpus& data, const Vocab& vocab) {
  if (data.empty()) throw ArgumentError("perplexity of an empty dataset");
  std::vector<SequenceScore> scores;
  scores.reserve(data.size());
  for (const auto& seq : data) {
    const auto tokens = tokenize_sequence(seq, vocab);
    scores.push_back(score_sequence(model, tokens, seq.events, tokens));
  }
  return report_from_scores(scores, model.config().compression_enabled);
}

std::size_t pick_candidate(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

std::vector<double> inc_candidate_scores(ShemModel& model, const IncInstance& inst,
                                         const Vocab& vocab, ScoringLayer layer) {
  const bool comp = model.config().compression_enabled;
  if (layer != ScoringLayer::kBase && !comp) {
    throw ArgumentError("compression scoring requested for a model without a compression layer");
  }
  std::vector<double> scores;
  for (const auto& cont : inst.candidates) {
    std::vector<EventTuple> events;
    events.reserve(cont.size() + 1);
    events.push_back(inst.seed);
    events.insert(events.end(), cont.begin(), cont.end());
    const auto tokens = tokenize_events(events, vocab);
    const SequenceScore s = score_sequence(model, tokens, events, tokens);
    const double n = static_cast<double>(s.tokens);
    switch (layer) {
      case ScoringLayer::kBase: scores.push_back(s.base_nll / n); break;
      case ScoringLayer::kCompression: scores.push_back(s.comp_nll / n); break;
      case ScoringLayer::kCombined: scores.push_back(s.base_nll / n + s.comp_nll / n); break;
    }
  }
  return scores;
}

double inverse_narrative_cloze(ShemModel& model, std::span<const IncInstance> instances,
                               const Vocab& vocab, ScoringLayer layer) {
  if (instances.empty()) throw ArgumentError("no inverse narrative cloze instances");
  std::size_t correct = 0;
  for (const auto& inst : instances) {
    const auto scores = inc_candidate_scores(model, inst, vocab, layer);
    if (pick_candidate(scores) == inst.answer_index) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

PerplexityReport masked_event_perplexity(ShemModel& model,
                                         std::span<const MaskedInstance> instances,
                                         const Vocab& vocab) {
  if (instances.empty()) throw ArgumentError("no masked-event instances");
  std::vector<SequenceScore> scores;
  scores.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto input = tokenize_sequence(inst.impoverished, vocab);
    const auto target = tokenize_sequence(inst.full_target, vocab);
    scores.push_back(score_sequence(model, input, inst.impoverished.events, target));
  }
  return report_from_scores(scores, model.config().compression_enabled);
}

ad::Var event_representation(ad::Tape& tape, ShemModel& model, const EventTuple& event,
                             const Vocab& vocab, std::span<const std::size_t> dropped) {
  const std::vector<EventTuple> events{event};
  const auto tokens = tokenize_events(events, vocab);
  ForwardInput in;
  in.input_tokens = tokens;
  in.input_events = events;
  in.target_tokens = tokens;
  in.dropped = dropped;
  const ForwardResult r = model.forward(tape, in, ForwardMode::kEval, {});
  std::vector<ad::Var> parts{r.base_final_hidden};
  const auto& latents = r.comp ? r.comp->embedding_vars : r.base.embedding_vars;
  parts.insert(parts.end(), latents.begin(), latents.end());
  return tape.concat(parts);
}

std::vector<double> event_representation(ShemModel& model, const EventTuple& event,
                                         const Vocab& vocab) {
  ad::Tape tape;
  const ad::Var v = event_representation(tape, model, event, vocab);
  const auto values = tape.value(v);
  return {values.begin(), values.end()};
}

ad::Var contrastive_loss(ad::Tape& tape, ad::Var query, std::span<const ad::Var> positives,
                         std::span<const ad::Var> negatives, double temperature) {
  if (positives.empty()) throw ArgumentError("contrastive loss needs a positive");
  if (negatives.empty()) throw ArgumentError("contrastive loss needs a negative");
  if (!(temperature > 0.0)) throw ArgumentError("contrastive temperature must be positive");
  auto nonzero = [&](ad::Var v) {
    const auto x = tape.value(v);
    if (kernels::dot(x, x) <= 0.0) throw ArgumentError("contrastive loss: zero-norm vector");
  };
  nonzero(query);
  for (ad::Var z : positives) nonzero(z);
  for (ad::Var z : negatives) nonzero(z);
  std::vector<ad::Var> sims;
  for (ad::Var z : positives) sims.push_back(tape.cosine(query, z));
  for (ad::Var z : negatives) sims.push_back(tape.cosine(query, z));
  ad::Var logits = tape.scale(tape.concat(sims), 1.0 / temperature);
  std::vector<ad::Var> terms;
  for (std::size_t k = 0; k < positives.size(); ++k) terms.push_back(tape.cross_entropy(logits, k));
  return tape.scale(tape.sum(terms), 1.0 / static_cast<double>(positives.size()));
}

double contrastive_loss(std::span<const double> query,
                        std::span<const std::vector<double>> positives,
                        std::span<const std::vector<double>> negatives, double temperature) {
  ad::Tape tape;
  const ad::Var q = tape.constant(query);
  std::vector<ad::Var> pos, neg;
  for (const auto& z : positives) pos.push_back(tape.constant(z));
  for (const auto& z : negatives) neg.push_back(tape.constant(z));
  return tape.scalar_value(contrastive_loss(tape, q, pos, neg, temperature));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine: dimension mismatch");
  const double na = std::sqrt(kernels::dot(a, a));
  const double nb = std::sqrt(kernels::dot(b, b));
  if (!(na > 0.0 && nb > 0.0)) throw ArgumentError("cosine: zero-norm vector");
  return kernels::dot(a, b) / (na * nb);
}

double hard_similarity_accuracy(std::span<const HardSimilarityInstance> instances,
                                const Representer& represent) {
  if (instances.empty()) throw ArgumentError("no hard similarity instances");
  std::size_t correct = 0;
  for (const auto& inst : instances) {
    const double a = cosine_similarity(represent(inst.pair_a[0]), represent(inst.pair_a[1]));
    const double b = cosine_similarity(represent(inst.pair_b[0]), represent(inst.pair_b[1]));
    if ((a > b) == inst.a_more_similar) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("spearman: length mismatch");
  if (x.size() < 2) throw ArgumentError("spearman: needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ArgumentError("spearman: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double transitive_correlation(std::span<const TransitiveInstance> instances,
                              const Representer& represent) {
  if (instances.size() < 2) throw ArgumentError("transitive correlation needs at least two instances");
  std::vector<double> predicted, gold;
  for (const auto& inst : instances) {
    predicted.push_back(cosine_similarity(represent(inst.first), represent(inst.second)));
    gold.push_back(inst.gold);
  }
  return spearman(predicted, gold);
}

Representer model_representer(ShemModel& model, const Vocab& vocab) {
  return [&model, &vocab](const EventTuple& e) { return event_representation(model, e, vocab); };
}

}  // namespace shem
