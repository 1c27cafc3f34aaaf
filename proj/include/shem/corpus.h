#pragma once

// Event sequences, vocabularies, frame observation masks and the evaluation
// instance builders (inverse narrative cloze, scenario-masked events).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shem/ontology.h"

namespace shem {

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Surface form of an absent modifier.
inline constexpr std::string_view kNoneToken = "<NONE>";

struct EventTuple {
  std::string predicate;
  std::string subject;
  std::string object;
  std::string modifier = std::string(kNoneToken);

  friend bool operator==(const EventTuple&, const EventTuple&) = default;
};

struct EventSequence {
  std::vector<EventTuple> events;
  std::vector<FrameId> gold_frames;  // NOFRAME where unannotated

  std::size_t size() const { return events.size(); }
};

using Corpus = std::vector<EventSequence>;

inline constexpr std::size_t kDefaultEventsPerDoc = 5;

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kTup = 4;
  static constexpr int kNone = 5;
  static constexpr int kSpecialCount = 6;

  Vocab();
  // Tokens beyond the specials, in id order.
  Vocab(const std::vector<std::string>& tokens, FrameTable frames,
        std::vector<FrameId> kept_frames);

  int id(std::string_view token) const;  // kUnk for OOV
  const std::string& token(int id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Frame id space shared with the frame graph. Logit dimension of the
  // frame chains is frames().size().
  const FrameTable& frames() const { return frames_; }
  // Gold frames retained by the frame cap, ascending.
  const std::vector<FrameId>& kept_frames() const { return kept_frames_; }
  bool keeps_frame(FrameId f) const;

  // FNV-1a over tokens / frame names, for checkpoint validation.
  std::uint64_t lexical_hash() const;
  std::uint64_t frame_hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  FrameTable frames_;
  std::vector<FrameId> kept_frames_;
  std::vector<bool> kept_mask_;
};

inline constexpr std::size_t kDefaultLexicalCap = 40000;
inline constexpr std::size_t kDefaultFrameCap = 500;

// Top lexical_cap tokens and top frame_cap gold frames by frequency, ties to
// the lexicographically smaller name. `frames` is the id space the corpus
// gold frames refer to.
Vocab build_vocab(const Corpus& corpus, const FrameTable& frames,
                  std::size_t lexical_cap = kDefaultLexicalCap,
                  std::size_t frame_cap = kDefaultFrameCap);

// Gold frames outside the vocab's kept set become NOFRAME.
void restrict_frames(Corpus& corpus, const Vocab& vocab);

// BOS, (p s o m) per event with TUP between events, EOS.
std::vector<int> tokenize_sequence(const EventSequence& seq, const Vocab& vocab);
std::vector<int> tokenize_events(const std::vector<EventTuple>& events,
                                 const Vocab& vocab);

inline std::size_t tokenized_length(std::size_t events) {
  return 1 + 4 * events + (events - 1) + 1;
}

// Position of event i's first token in a tokenized sequence.
inline std::size_t event_token_offset(std::size_t i) { return 1 + 5 * i; }

struct ObservationMask {
  std::vector<bool> observed;

  std::size_t count() const;
};

// Each position with a real gold frame is observed with probability epsilon.
ObservationMask apply_observation_mask(const EventSequence& seq, double epsilon,
                                       std::mt19937_64& rng);

// Inverse narrative cloze. Candidate continuations are the remainder of a
// document after its first event.
inline constexpr std::size_t kIncChoices = 6;

struct IncInstance {
  EventTuple seed;
  std::array<std::vector<EventTuple>, kIncChoices> candidates;
  std::size_t answer_index = 0;
  std::size_t source_document = 0;
  std::array<std::size_t, kIncChoices> candidate_documents{};
};

IncInstance make_inc_instance(const Corpus& corpus, std::mt19937_64& rng);
std::vector<IncInstance> make_inc_instances(const Corpus& corpus, std::size_t count,
                                            std::uint64_t seed);

struct MaskedInstance {
  EventSequence impoverished;
  EventSequence full_target;
  std::size_t removed_index = 0;
};

// First (i, j), i < j, in row-major order whose gold frames are distinct,
// both real, and scenario-connected. Returns j.
std::optional<std::size_t> find_masked_index(const EventSequence& seq,
                                             const FrameGraph& graph);

std::optional<MaskedInstance> make_masked_instance(const EventSequence& seq,
                                                   const FrameGraph& graph);

struct MaskedSet {
  std::vector<MaskedInstance> instances;
  std::size_t skipped = 0;
};

MaskedSet make_masked_instances(const Corpus& corpus, const FrameGraph& graph);

// Corpus file: one document per line, events separated by " <TUP> ", four
// whitespace-separated fields per event with "-" for an absent modifier.
// The optional frames file has one line per document of frame names ("-" for
// NOFRAME). Unknown frame names are interned into `frames`. Documents longer
// than max_events are truncated.
Corpus load_corpus(const std::filesystem::path& corpus_path,
                   const std::optional<std::filesystem::path>& frames_path,
                   FrameTable& frames,
                   std::size_t max_events = kDefaultEventsPerDoc);
Corpus parse_corpus(std::string_view corpus_text,
                    std::optional<std::string_view> frames_text,
                    FrameTable& frames,
                    std::size_t max_events = kDefaultEventsPerDoc);

std::string format_corpus(const Corpus& corpus);
std::string format_frames(const Corpus& corpus, const FrameTable& frames);
void save_corpus(const Corpus& corpus, const FrameTable& frames,
                 const std::filesystem::path& corpus_path,
                 const std::filesystem::path& frames_path);

std::string format_event(const EventTuple& e);

// Deterministic split: the last `fraction` of documents (rounded down) goes
// to the second half.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double fraction);

}  // namespace shem
