#pragma once

// Frame-to-frame relation graph (FrameNet-style) and the abstract-frame
// queries that guide the compression layer.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shem {

using FrameId = std::int32_t;

// Reserved ids. They never appear as graph nodes.
inline constexpr FrameId kNoFrame = 0;
inline constexpr FrameId kFramePad = 1;
inline constexpr FrameId kAbstain = 2;
inline constexpr FrameId kFirstRealFrame = 3;

inline bool is_reserved_frame(FrameId f) { return f >= 0 && f < kFirstRealFrame; }

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Interned frame names. Ids 0..2 are the reserved specials.
class FrameTable {
 public:
  FrameTable();

  // Returns the existing id or appends a new one.
  FrameId intern(std::string_view name);
  std::optional<FrameId> find(std::string_view name) const;
  const std::string& name(FrameId id) const { return names_.at(id); }

  // Includes the three reserved specials.
  std::size_t size() const { return names_.size(); }
  std::size_t real_count() const { return names_.size() - kFirstRealFrame; }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, FrameId> index_;
};

enum class RelationType : std::uint8_t {
  kInheritance,
  kUsing,
  kPrecedes,
  kMetaphor,
  kSeeAlso,
  kCausativeOf,
  kInchoativeOf,
  kPerspectiveOn,
  kSubframe,
  kReFramingMapping,
};

inline constexpr std::size_t kRelationCount = 10;

inline constexpr std::array<RelationType, kRelationCount> kAllRelations = {
    RelationType::kInheritance,   RelationType::kUsing,
    RelationType::kPrecedes,      RelationType::kMetaphor,
    RelationType::kSeeAlso,       RelationType::kCausativeOf,
    RelationType::kInchoativeOf,  RelationType::kPerspectiveOn,
    RelationType::kSubframe,      RelationType::kReFramingMapping,
};

// FrameNet spelling, e.g. "See_also", "ReFraming_Mapping".
std::string_view relation_name(RelationType r);
std::optional<RelationType> parse_relation(std::string_view name);

// The six relations admitted by grouping mode.
bool in_relation_group(RelationType r);

struct RelationFilter {
  enum class Mode : std::uint8_t { kSingle, kGrouping, kScenarioOnly, kAll };

  Mode mode = Mode::kAll;
  RelationType relation = RelationType::kInheritance;  // kSingle only

  static RelationFilter single(RelationType r) { return {Mode::kSingle, r}; }
  static RelationFilter grouping() { return {Mode::kGrouping, {}}; }
  static RelationFilter scenario_only() { return {Mode::kScenarioOnly, {}}; }
  static RelationFilter all() { return {Mode::kAll, {}}; }

  // Lowercase CLI spelling: "inheritance", ..., "grouping", "scenario_only", "all".
  static std::optional<RelationFilter> parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const RelationFilter& a, const RelationFilter& b) {
    return a.mode == b.mode &&
           (a.mode != Mode::kSingle || a.relation == b.relation);
  }
};

struct FrameEdge {
  FrameId child;
  RelationType relation;
  FrameId parent;

  friend auto operator<=>(const FrameEdge&, const FrameEdge&) = default;
};

// Immutable after construction.
class FrameGraph {
 public:
  FrameGraph() = default;

  // explicit_flags maps parent ids to a flag given in the input; it overrides
  // the "_scenario" name-suffix rule.
  FrameGraph(FrameTable table, std::vector<FrameEdge> edges,
             std::unordered_map<FrameId, bool> explicit_flags);

  const FrameTable& frames() const { return table_; }
  const std::vector<FrameEdge>& edges() const { return edges_; }

  // Real frames only (reserved specials excluded).
  std::size_t frame_count() const { return table_.real_count(); }

  // False for reserved ids and ids outside the graph.
  bool is_scenario(FrameId f) const;
  std::optional<bool> explicit_flag(FrameId f) const;

  // Edges whose child is f, sorted.
  std::span<const FrameEdge> out_edges(FrameId f) const;

  bool admits(const FrameEdge& e, const RelationFilter& filter) const;

 private:
  FrameTable table_;
  std::vector<FrameEdge> edges_;  // sorted by (child, relation, parent)
  std::vector<std::size_t> offsets_;
  std::vector<bool> scenario_;
  std::unordered_map<FrameId, bool> explicit_flags_;
};

FrameGraph load_frame_graph(const std::filesystem::path& path);
FrameGraph parse_frame_graph(std::string_view text);
void save_frame_graph(const FrameGraph& graph, const std::filesystem::path& path);
std::string format_frame_graph(const FrameGraph& graph);

// Distinct parents reachable through exactly one admitted edge, ascending.
// NOFRAME and ids outside the graph give an empty set.
std::vector<FrameId> abstract_frames(const FrameGraph& graph, FrameId frame,
                                     const RelationFilter& filter);

// Uniform over abstract_frames(); kAbstain when that set is empty.
FrameId sample_abstract_frame(const FrameGraph& graph, FrameId frame,
                              const RelationFilter& filter, std::mt19937_64& rng);

// True iff some scenario-flagged frame is a one-hop parent (any relation)
// of both frames.
bool scenario_connected(const FrameGraph& graph, FrameId a, FrameId b);

}  // namespace shem
