#pragma once

// Event-similarity instance files.
//
//   hard:        "pA1 sA1 oA1 | pA2 sA2 oA2 | pB1 sB1 oB1 | pB2 sB2 oB2\tA"
//   transitive:  "p1 s1 o1 | p2 s2 o2\t0.75"

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shem/corpus.h"

namespace shem {

struct HardSimilarityInstance {
  std::array<EventTuple, 2> pair_a;
  std::array<EventTuple, 2> pair_b;
  bool a_more_similar = true;
};

struct TransitiveInstance {
  EventTuple first;
  EventTuple second;
  double gold = 0.0;
};

std::vector<HardSimilarityInstance> parse_hard_similarity(std::string_view text);
std::vector<TransitiveInstance> parse_transitive(std::string_view text);
std::vector<HardSimilarityInstance> load_hard_similarity(const std::filesystem::path& path);
std::vector<TransitiveInstance> load_transitive(const std::filesystem::path& path);

std::string format_hard_similarity(const std::vector<HardSimilarityInstance>& items);
std::string format_transitive(const std::vector<TransitiveInstance>& items);

}  // namespace shem
