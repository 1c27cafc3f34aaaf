#pragma once

// Perplexity, inverse narrative cloze, masked-event regeneration and event
// similarity. Every metric runs the model on its noise-free path with no
// observed frames, so results are deterministic per checkpoint.

#include <functional>
#include <span>
#include <vector>

#include "shem/autograd.h"
#include "shem/corpus.h"
#include "shem/model.h"
#include "shem/similarity.h"

namespace shem {

struct PerplexityReport {
  double base = 0.0;
  double compression = 0.0;
  double combined = 0.0;
  std::size_t token_count = 0;
  bool has_compression = false;
};

// exp((ln base + ln compression) / 2)
double combine_perplexity(double base, double compression);

// Negative log-likelihood sums of one target under both decoders.
struct SequenceScore {
  double base_nll = 0.0;
  double comp_nll = 0.0;
  std::size_t tokens = 0;
};

SequenceScore score_sequence(ShemModel& model, std::span<const int> input_tokens,
                             std::span<const EventTuple> input_events,
                             std::span<const int> target_tokens);

PerplexityReport report_from_scores(std::span<const SequenceScore> scores,
                                    bool has_compression);

// Throws ArgumentError on an empty dataset.
PerplexityReport perplexity(ShemModel& model, const Corpus& data, const Vocab& vocab);

enum class ScoringLayer { kBase, kCompression, kCombined };

// Index of the smallest score; ties go to the lower index.
std::size_t pick_candidate(std::span<const double> scores);

// Per-candidate length-normalized NLL of seed + continuation.
std::vector<double> inc_candidate_scores(ShemModel& model, const IncInstance& inst,
                                         const Vocab& vocab, ScoringLayer layer);

// Fraction of instances whose lowest-scoring candidate is the answer.
double inverse_narrative_cloze(ShemModel& model, std::span<const IncInstance> instances,
                               const Vocab& vocab, ScoringLayer layer);

// Encoder reads the impoverished sequence; decoders score the full target.
PerplexityReport masked_event_perplexity(ShemModel& model,
                                         std::span<const MaskedInstance> instances,
                                         const Vocab& vocab);

// Decoder final hidden state followed by the compression latent embeddings.
// `dropped` zeroes encoder positions (predicate dropout during training).
ad::Var event_representation(ad::Tape& tape, ShemModel& model, const EventTuple& event,
                             const Vocab& vocab, std::span<const std::size_t> dropped = {});
std::vector<double> event_representation(ShemModel& model, const EventTuple& event,
                                         const Vocab& vocab);

// -(1/R) sum_{k<R} log softmax(cos(query, z_k) / temperature)_k over the R
// positives followed by the negatives. Throws ArgumentError on R = 0, no
// negatives, or zero-norm vectors.
ad::Var contrastive_loss(ad::Tape& tape, ad::Var query, std::span<const ad::Var> positives,
                         std::span<const ad::Var> negatives, double temperature);
double contrastive_loss(std::span<const double> query,
                        std::span<const std::vector<double>> positives,
                        std::span<const std::vector<double>> negatives, double temperature);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

using Representer = std::function<std::vector<double>(const EventTuple&)>;

// Predicts the pair with the larger cosine; ties count as pair B.
double hard_similarity_accuracy(std::span<const HardSimilarityInstance> instances,
                                const Representer& represent);
// Spearman correlation between pair cosines and gold scores. Throws
// ArgumentError with fewer than two instances.
double transitive_correlation(std::span<const TransitiveInstance> instances,
                              const Representer& represent);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

Representer model_representer(ShemModel& model, const Vocab& vocab);

}  // namespace shem
