#pragma once

// Synthetic event corpora with a planted two-level frame hierarchy.
//
// Every document draws one latent scenario; each of its events draws a frame
// from that scenario's children and emits a lexical tuple from categoricals
// attached to the frame (predicates, and arguments over the scenario's
// argument pool) and the scenario (modifiers).
// The emitted frame graph links each child to its scenario parent through
// Inheritance or Using, plus optional Precedes / See_also cross links to
// non-scenario frames so that relation filters have something to exclude.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shem/corpus.h"
#include "shem/ontology.h"
#include "shem/similarity.h"

namespace shem {

struct SyntheticConfig {
  std::size_t n_scenarios = 4;
  std::size_t frames_per_scenario = 5;
  std::size_t n_docs = 2000;
  std::size_t events_per_doc = kDefaultEventsPerDoc;
  std::size_t predicates_per_frame = 3;
  std::size_t arguments_per_scenario = 8;
  std::size_t shared_arguments = 6;
  std::size_t modifiers_per_scenario = 3;
  double shared_argument_prob = 0.15;
  // Dirichlet concentration of each frame's weights over its scenario's
  // arguments; small values make arguments frame-specific.
  double argument_concentration = 0.3;
  double modifier_prob = 0.5;
  bool cross_links = true;
};

// Emission tables, indexed by scenario s and child slot k.
struct SyntheticLexicon {
  std::vector<std::vector<std::vector<std::string>>> predicates;  // [s][k]
  std::vector<std::vector<std::vector<double>>> predicate_weights;
  std::vector<std::vector<std::string>> arguments;  // [s]
  std::vector<std::vector<std::vector<double>>> argument_weights;  // [s][k]
  std::vector<std::string> shared_arguments;
  std::vector<std::vector<std::string>> modifiers;  // [s]
};

struct SyntheticData {
  Corpus corpus;
  FrameGraph graph;
  Vocab vocab;

  std::vector<FrameId> scenario_frames;                // per scenario
  std::vector<std::vector<FrameId>> scenario_children;  // per scenario
  std::vector<std::vector<double>> frame_given_scenario;
  std::vector<std::size_t> doc_scenario;
  SyntheticLexicon lexicon;
};

SyntheticData generate_synthetic_corpus(const SyntheticConfig& cfg, std::mt19937_64& rng);

struct SimilaritySets {
  std::vector<HardSimilarityInstance> hard;
  std::vector<TransitiveInstance> transitive;
};

// Hard pairs: the semantically similar pair shares a frame but no arguments;
// the distractor pair shares arguments across scenarios. Transitive gold:
// 1.0 same frame, 0.5 same scenario, 0.0 otherwise.
SimilaritySets generate_similarity_sets(const SyntheticData& data,
                                        const SyntheticConfig& cfg,
                                        std::size_t n_hard, std::size_t n_transitive,
                                        std::mt19937_64& rng);

}  // namespace shem
