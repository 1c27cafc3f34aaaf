#include "shem/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "shem/text.h"

namespace shem {
namespace {

constexpr std::array<std::string_view, Vocab::kSpecialCount> kSpecialTokens = {
    "<PAD>", "<UNK>", "<BOS>", "<EOS>", "<TUP>", kNoneToken};

std::uint64_t fnv1a(const std::vector<std::string>& items) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& s : items) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Keys sorted by descending count, then ascending key.
template <typename Key>
std::vector<Key> rank_by_count(const std::map<Key, std::size_t>& counts,
                               std::size_t cap) {
  std::vector<std::pair<Key, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::vector<Key> out;
  for (std::size_t i = 0; i < items.size() && i < cap; ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace

Vocab::Vocab() : Vocab({}, FrameTable(), {}) {}

Vocab::Vocab(const std::vector<std::string>& tokens, FrameTable frames,
             std::vector<FrameId> kept_frames)
    : frames_(std::move(frames)), kept_frames_(std::move(kept_frames)) {
  for (auto special : kSpecialTokens) {
    index_.emplace(std::string(special), static_cast<int>(tokens_.size()));
    tokens_.emplace_back(special);
  }
  for (const auto& t : tokens) {
    if (index_.count(t)) continue;
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
  std::sort(kept_frames_.begin(), kept_frames_.end());
  kept_mask_.assign(frames_.size(), false);
  for (FrameId f : kept_frames_) {
    if (f < 0 || static_cast<std::size_t>(f) >= frames_.size()) {
      throw ArgumentError("kept frame id outside the frame table");
    }
    kept_mask_[f] = true;
  }
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::keeps_frame(FrameId f) const {
  return f >= 0 && static_cast<std::size_t>(f) < kept_mask_.size() && kept_mask_[f];
}

std::uint64_t Vocab::lexical_hash() const { return fnv1a(tokens_); }
std::uint64_t Vocab::frame_hash() const { return fnv1a(frames_.names()); }

Vocab build_vocab(const Corpus& corpus, const FrameTable& frames,
                  std::size_t lexical_cap, std::size_t frame_cap) {
  std::map<std::string, std::size_t> token_counts;
  std::map<std::string, std::size_t> frame_counts;
  for (const auto& seq : corpus) {
    for (const auto& e : seq.events) {
      for (const std::string* t : {&e.predicate, &e.subject, &e.object, &e.modifier}) {
        if (*t == kNoneToken) continue;
        ++token_counts[*t];
      }
    }
    for (FrameId f : seq.gold_frames) {
      if (is_reserved_frame(f)) continue;
      ++frame_counts[frames.name(f)];
    }
  }
  // Specials are never counted as ordinary tokens.
  for (auto special : kSpecialTokens) token_counts.erase(std::string(special));

  auto tokens = rank_by_count(token_counts, lexical_cap);
  std::vector<FrameId> kept;
  for (const auto& name : rank_by_count(frame_counts, frame_cap)) {
    kept.push_back(*frames.find(name));
  }
  return Vocab(tokens, frames, std::move(kept));
}

void restrict_frames(Corpus& corpus, const Vocab& vocab) {
  for (auto& seq : corpus) {
    for (auto& f : seq.gold_frames) {
      if (!is_reserved_frame(f) && !vocab.keeps_frame(f)) f = kNoFrame;
    }
  }
}

std::vector<int> tokenize_events(const std::vector<EventTuple>& events,
                                 const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(events.empty() ? 2 : tokenized_length(events.size()));
  ids.push_back(Vocab::kBos);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) ids.push_back(Vocab::kTup);
    const auto& e = events[i];
    ids.push_back(vocab.id(e.predicate));
    ids.push_back(vocab.id(e.subject));
    ids.push_back(vocab.id(e.object));
    ids.push_back(e.modifier == kNoneToken ? Vocab::kNone : vocab.id(e.modifier));
  }
  ids.push_back(Vocab::kEos);
  return ids;
}

std::vector<int> tokenize_sequence(const EventSequence& seq, const Vocab& vocab) {
  return tokenize_events(seq.events, vocab);
}

std::size_t ObservationMask::count() const {
  return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), true));
}

ObservationMask apply_observation_mask(const EventSequence& seq, double epsilon,
                                       std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ArgumentError("observation probability must lie in [0, 1]");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ObservationMask mask;
  mask.observed.assign(seq.size(), false);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const FrameId f = i < seq.gold_frames.size() ? seq.gold_frames[i] : kNoFrame;
    if (is_reserved_frame(f)) continue;
    mask.observed[i] = unit(rng) < epsilon;
  }
  return mask;
}

IncInstance make_inc_instance(const Corpus& corpus, std::mt19937_64& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].size() >= 2) eligible.push_back(d);
  }
  if (eligible.size() < kIncChoices) {
    throw ArgumentError("inverse narrative cloze needs at least 6 documents with 2+ events");
  }
  std::uniform_int_distribution<std::size_t> pick_doc(0, eligible.size() - 1);
  const std::size_t seed_pos = pick_doc(rng);
  const std::size_t seed_doc = eligible[seed_pos];

  // Five distinct distractor documents, excluding the seed's own.
  std::vector<std::size_t> others;
  others.reserve(eligible.size() - 1);
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (i != seed_pos) others.push_back(eligible[i]);
  }
  for (std::size_t k = 0; k + 1 < kIncChoices; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, others.size() - 1);
    std::swap(others[k], others[pick(rng)]);
  }

  std::array<std::size_t, kIncChoices> order{};
  order[0] = seed_doc;
  for (std::size_t k = 1; k < kIncChoices; ++k) order[k] = others[k - 1];
  std::shuffle(order.begin(), order.end(), rng);

  IncInstance inst;
  inst.seed = corpus[seed_doc].events.front();
  inst.source_document = seed_doc;
  for (std::size_t k = 0; k < kIncChoices; ++k) {
    const auto& events = corpus[order[k]].events;
    inst.candidates[k].assign(events.begin() + 1, events.end());
    inst.candidate_documents[k] = order[k];
    if (order[k] == seed_doc) inst.answer_index = k;
  }
  return inst;
}

std::vector<IncInstance> make_inc_instances(const Corpus& corpus, std::size_t count,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<IncInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_inc_instance(corpus, rng));
  return out;
}

std::optional<std::size_t> find_masked_index(const EventSequence& seq,
                                             const FrameGraph& graph) {
  const auto& g = seq.gold_frames;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (is_reserved_frame(g[i])) continue;
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      if (is_reserved_frame(g[j]) || g[i] == g[j]) continue;
      if (scenario_connected(graph, g[i], g[j])) return j;
    }
  }
  return std::nullopt;
}

std::optional<MaskedInstance> make_masked_instance(const EventSequence& seq,
                                                   const FrameGraph& graph) {
  const auto j = find_masked_index(seq, graph);
  if (!j) return std::nullopt;
  MaskedInstance inst;
  inst.full_target = seq;
  inst.impoverished = seq;
  inst.impoverished.events.erase(inst.impoverished.events.begin() + *j);
  inst.impoverished.gold_frames.erase(inst.impoverished.gold_frames.begin() + *j);
  inst.removed_index = *j;
  return inst;
}

MaskedSet make_masked_instances(const Corpus& corpus, const FrameGraph& graph) {
  MaskedSet set;
  for (const auto& seq : corpus) {
    if (auto inst = make_masked_instance(seq, graph)) {
      set.instances.push_back(std::move(*inst));
    } else {
      ++set.skipped;
    }
  }
  return set;
}

Corpus parse_corpus(std::string_view corpus_text,
                    std::optional<std::string_view> frames_text,
                    FrameTable& frames, std::size_t max_events) {
  if (max_events == 0) throw ArgumentError("max_events must be positive");
  Corpus corpus;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(corpus_text)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "corpus line " + std::to_string(line_no) + ": ";
    EventSequence seq;
    std::size_t start = 0;
    constexpr std::string_view kSep = "<TUP>";
    for (;;) {
      const auto pos = line.find(kSep, start);
      const auto chunk = line.substr(start, pos == std::string_view::npos
                                                ? std::string_view::npos
                                                : pos - start);
      const auto fields = split_whitespace(chunk);
      if (fields.size() != 4) {
        throw LoadError(where + "event must have 4 fields, found " +
                        std::to_string(fields.size()));
      }
      EventTuple e;
      e.predicate = fields[0];
      e.subject = fields[1];
      e.object = fields[2];
      e.modifier = fields[3] == "-" ? std::string(kNoneToken) : std::string(fields[3]);
      if (e.predicate == "-" || e.subject == "-" || e.object == "-") {
        throw LoadError(where + "only the modifier may be absent");
      }
      seq.events.push_back(std::move(e));
      if (pos == std::string_view::npos) break;
      start = pos + kSep.size();
    }
    seq.gold_frames.assign(seq.events.size(), kNoFrame);
    corpus.push_back(std::move(seq));
  }

  if (frames_text) {
    std::vector<std::string_view> lines;
    for (std::string_view l : split_lines(*frames_text)) {
      if (!trim(l).empty()) lines.push_back(l);
    }
    if (lines.size() != corpus.size()) {
      throw LoadError("frames file has " + std::to_string(lines.size()) +
                      " documents, corpus has " + std::to_string(corpus.size()));
    }
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const auto names = split_whitespace(lines[d]);
      if (names.size() != corpus[d].size()) {
        throw LoadError("frames line " + std::to_string(d + 1) + ": expected " +
                        std::to_string(corpus[d].size()) + " frames, found " +
                        std::to_string(names.size()));
      }
      for (std::size_t i = 0; i < names.size(); ++i) {
        corpus[d].gold_frames[i] = names[i] == "-" ? kNoFrame : frames.intern(names[i]);
      }
    }
  }

  for (auto& seq : corpus) {
    if (seq.events.size() > max_events) {
      seq.events.resize(max_events);
      seq.gold_frames.resize(max_events);
    }
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& corpus_path,
                   const std::optional<std::filesystem::path>& frames_path,
                   FrameTable& frames, std::size_t max_events) {
  const std::string text = read_file(corpus_path);
  if (frames_path) {
    const std::string ftext = read_file(*frames_path);
    return parse_corpus(text, std::string_view(ftext), frames, max_events);
  }
  return parse_corpus(text, std::nullopt, frames, max_events);
}

std::string format_event(const EventTuple& e) {
  return e.predicate + ' ' + e.subject + ' ' + e.object + ' ' +
         (e.modifier == kNoneToken ? std::string("-") : e.modifier);
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
      if (i > 0) out += " <TUP> ";
      out += format_event(seq.events[i]);
    }
    out += '\n';
  }
  return out;
}

std::string format_frames(const Corpus& corpus, const FrameTable& frames) {
  std::string out;
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.gold_frames.size(); ++i) {
      if (i > 0) out += ' ';
      const FrameId f = seq.gold_frames[i];
      out += is_reserved_frame(f) ? std::string("-") : frames.name(f);
    }
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const FrameTable& frames,
                 const std::filesystem::path& corpus_path,
                 const std::filesystem::path& frames_path) {
  std::ofstream c(corpus_path, std::ios::binary);
  std::ofstream f(frames_path, std::ios::binary);
  if (!c || !f) throw LoadError("cannot write corpus to " + corpus_path.string());
  c << format_corpus(corpus);
  f << format_frames(corpus, frames);
  if (!c || !f) throw LoadError("write failed for " + corpus_path.string());
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double fraction) {
  const auto tail = static_cast<std::size_t>(static_cast<double>(corpus.size()) * fraction);
  const auto head = corpus.size() - tail;
  return {Corpus(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(head)),
          Corpus(corpus.begin() + static_cast<std::ptrdiff_t>(head), corpus.end())};
}

}  // namespace shem
