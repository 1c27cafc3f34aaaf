#include "shem/synthetic.h"

#include <algorithm>
#include <string>

namespace shem {
namespace {

// Mixture of uniform and Dirichlet(alpha): skewed but never vanishing.
std::vector<double> random_categorical(std::size_t n, std::mt19937_64& rng,
                                       double alpha = 1.0, double uniform = 0.5) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = gamma(rng);
    total += x;
  }
  for (auto& x : w) x = uniform / static_cast<double>(n) + (1.0 - uniform) * x / total;
  return w;
}

std::size_t draw(const std::vector<double>& weights, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
  return d(rng);
}

std::string name(const char* prefix, std::size_t a) {
  return std::string(prefix) + std::to_string(a);
}

std::string name(const char* prefix, std::size_t a, const char* mid, std::size_t b) {
  return std::string(prefix) + std::to_string(a) + mid + std::to_string(b);
}

struct Emitter {
  const SyntheticConfig& cfg;
  const SyntheticLexicon& lex;

  std::string argument(std::size_t s, std::size_t k, std::mt19937_64& rng) const {
    std::bernoulli_distribution shared(cfg.shared_argument_prob);
    if (!lex.shared_arguments.empty() && shared(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, lex.shared_arguments.size() - 1);
      return lex.shared_arguments[pick(rng)];
    }
    return lex.arguments[s][draw(lex.argument_weights[s][k], rng)];
  }

  EventTuple event(std::size_t s, std::size_t k, std::mt19937_64& rng) const {
    EventTuple e;
    e.predicate = lex.predicates[s][k][draw(lex.predicate_weights[s][k], rng)];
    e.subject = argument(s, k, rng);
    e.object = argument(s, k, rng);
    std::bernoulli_distribution has_modifier(cfg.modifier_prob);
    if (!lex.modifiers[s].empty() && has_modifier(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, lex.modifiers[s].size() - 1);
      e.modifier = lex.modifiers[s][pick(rng)];
    }
    return e;
  }
};

}  // namespace

SyntheticData generate_synthetic_corpus(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  if (cfg.n_scenarios == 0 || cfg.frames_per_scenario == 0 || cfg.n_docs == 0 ||
      cfg.events_per_doc == 0 || cfg.predicates_per_frame == 0 ||
      cfg.arguments_per_scenario == 0) {
    throw ArgumentError("synthetic corpus sizes must be positive");
  }
  if (cfg.shared_argument_prob < 0.0 || cfg.shared_argument_prob > 1.0 ||
      cfg.modifier_prob < 0.0 || cfg.modifier_prob > 1.0) {
    throw ArgumentError("synthetic corpus probabilities must lie in [0, 1]");
  }

  const std::size_t S = cfg.n_scenarios;
  const std::size_t K = cfg.frames_per_scenario;

  SyntheticData data;
  FrameTable table;
  std::vector<FrameEdge> edges;
  data.scenario_frames.resize(S);
  data.scenario_children.assign(S, std::vector<FrameId>(K));
  for (std::size_t s = 0; s < S; ++s) {
    data.scenario_frames[s] = table.intern(name("Scene", s) + "_scenario");
    for (std::size_t k = 0; k < K; ++k) {
      data.scenario_children[s][k] = table.intern(name("Frame", s, "_", k));
    }
  }
  std::uniform_int_distribution<std::size_t> pick_scenario(0, S - 1);
  std::uniform_int_distribution<std::size_t> pick_child(0, K - 1);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t k = 0; k < K; ++k) {
      const FrameId child = data.scenario_children[s][k];
      const auto rel = k % 2 == 0 ? RelationType::kInheritance : RelationType::kUsing;
      edges.push_back({child, rel, data.scenario_frames[s]});
      if (!cfg.cross_links) continue;
      if (k + 1 < K) {
        edges.push_back({child, RelationType::kPrecedes, data.scenario_children[s][k + 1]});
      }
      if (S > 1) {
        std::size_t other = pick_scenario(rng);
        if (other == s) other = (s + 1) % S;
        edges.push_back({child, RelationType::kSeeAlso,
                         data.scenario_children[other][pick_child(rng)]});
      }
    }
  }
  data.graph = FrameGraph(table, std::move(edges), {});

  auto& lex = data.lexicon;
  lex.predicates.resize(S);
  lex.predicate_weights.resize(S);
  lex.arguments.resize(S);
  lex.argument_weights.resize(S);
  lex.modifiers.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<std::string> preds;
      for (std::size_t p = 0; p < cfg.predicates_per_frame; ++p) {
        preds.push_back(name("act", s, "_", k) + "_" + std::to_string(p));
      }
      lex.predicates[s].push_back(std::move(preds));
      lex.predicate_weights[s].push_back(random_categorical(cfg.predicates_per_frame, rng));
    }
    for (std::size_t a = 0; a < cfg.arguments_per_scenario; ++a) {
      lex.arguments[s].push_back(name("ent", s, "_", a));
    }
    for (std::size_t k = 0; k < K; ++k) {
      lex.argument_weights[s].push_back(random_categorical(
          cfg.arguments_per_scenario, rng, cfg.argument_concentration, 0.1));
    }
    for (std::size_t m = 0; m < cfg.modifiers_per_scenario; ++m) {
      lex.modifiers[s].push_back(name("mod", s, "_", m));
    }
  }
  for (std::size_t a = 0; a < cfg.shared_arguments; ++a) {
    lex.shared_arguments.push_back(name("common", a));
  }

  data.frame_given_scenario.resize(S);
  for (std::size_t s = 0; s < S; ++s) data.frame_given_scenario[s] = random_categorical(K, rng);

  const Emitter emit{cfg, lex};
  data.corpus.reserve(cfg.n_docs);
  data.doc_scenario.reserve(cfg.n_docs);
  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    const std::size_t s = pick_scenario(rng);
    EventSequence seq;
    for (std::size_t i = 0; i < cfg.events_per_doc; ++i) {
      const std::size_t k = draw(data.frame_given_scenario[s], rng);
      seq.events.push_back(emit.event(s, k, rng));
      seq.gold_frames.push_back(data.scenario_children[s][k]);
    }
    data.corpus.push_back(std::move(seq));
    data.doc_scenario.push_back(s);
  }

  data.vocab = build_vocab(data.corpus, data.graph.frames());
  return data;
}

SimilaritySets generate_similarity_sets(const SyntheticData& data,
                                        const SyntheticConfig& cfg,
                                        std::size_t n_hard, std::size_t n_transitive,
                                        std::mt19937_64& rng) {
  const std::size_t S = data.scenario_frames.size();
  const std::size_t K = data.scenario_children.empty() ? 0 : data.scenario_children[0].size();
  if (S < 2 || K == 0) throw ArgumentError("similarity sets need at least two scenarios");
  const Emitter emit{cfg, data.lexicon};
  std::uniform_int_distribution<std::size_t> pick_s(0, S - 1);
  std::uniform_int_distribution<std::size_t> pick_k(0, K - 1);
  auto strip = [](EventTuple e) {
    e.modifier = std::string(kNoneToken);
    return e;
  };

  SimilaritySets sets;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t n = 0; n < n_hard; ++n) {
    const std::size_t s = pick_s(rng);
    const std::size_t k = pick_k(rng);
    EventTuple a1 = strip(emit.event(s, k, rng));
    EventTuple a2 = strip(emit.event(s, k, rng));
    for (int tries = 0; tries < 16 && (a2.subject == a1.subject || a2.object == a1.object);
         ++tries) {
      a2 = strip(emit.event(s, k, rng));
    }
    std::size_t t = pick_s(rng);
    if (t == s) t = (s + 1) % S;
    EventTuple b1 = strip(emit.event(s, pick_k(rng), rng));
    EventTuple b2 = strip(emit.event(t, pick_k(rng), rng));
    b2.subject = b1.subject;
    b2.object = b1.object;

    HardSimilarityInstance inst;
    inst.a_more_similar = coin(rng);
    if (inst.a_more_similar) {
      inst.pair_a = {a1, a2};
      inst.pair_b = {b1, b2};
    } else {
      inst.pair_a = {b1, b2};
      inst.pair_b = {a1, a2};
    }
    sets.hard.push_back(std::move(inst));
  }

  std::uniform_int_distribution<int> tier(0, 2);
  for (std::size_t n = 0; n < n_transitive; ++n) {
    const std::size_t s = pick_s(rng);
    const std::size_t k = pick_k(rng);
    TransitiveInstance inst;
    inst.first = strip(emit.event(s, k, rng));
    switch (tier(rng)) {
      case 0:
        inst.second = strip(emit.event(s, k, rng));
        inst.gold = 1.0;
        break;
      case 1: {
        const std::size_t k2 = K > 1 ? (k + 1 + pick_k(rng) % (K - 1)) % K : k;
        inst.second = strip(emit.event(s, k2, rng));
        inst.gold = k2 == k ? 1.0 : 0.5;
        break;
      }
      default: {
        std::size_t t = pick_s(rng);
        if (t == s) t = (s + 1) % S;
        inst.second = strip(emit.event(t, pick_k(rng), rng));
        inst.gold = 0.0;
        break;
      }
    }
    sets.transitive.push_back(std::move(inst));
  }
  return sets;
}

}  // namespace shem
