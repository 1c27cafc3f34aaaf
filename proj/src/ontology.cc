#include "shem/ontology.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "shem/text.h"

namespace shem {
namespace {

constexpr std::array<std::string_view, kRelationCount> kRelationNames = {
    "Inheritance",   "Using",         "Precedes",       "Metaphor",
    "See_also",      "Causative_of",  "Inchoative_of",  "Perspective_on",
    "Subframe",      "ReFraming_Mapping",
};

bool has_scenario_suffix(std::string_view name) {
  constexpr std::string_view kSuffix = "_scenario";
  if (name.size() < kSuffix.size()) return false;
  const auto tail = name.substr(name.size() - kSuffix.size());
  return std::equal(tail.begin(), tail.end(), kSuffix.begin(),
                    [](char a, char b) {
                      return std::tolower(static_cast<unsigned char>(a)) == b;
                    });
}

}  // namespace

FrameTable::FrameTable() {
  for (const char* special : {"<NOFRAME>", "<FPAD>", "<ABSTAIN>"}) {
    index_.emplace(special, static_cast<FrameId>(names_.size()));
    names_.emplace_back(special);
  }
}

FrameId FrameTable::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<FrameId>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<FrameId> FrameTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view relation_name(RelationType r) {
  return kRelationNames[static_cast<std::size_t>(r)];
}

std::optional<RelationType> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationCount; ++i) {
    if (kRelationNames[i] == name) return static_cast<RelationType>(i);
  }
  return std::nullopt;
}

bool in_relation_group(RelationType r) {
  switch (r) {
    case RelationType::kInheritance:
    case RelationType::kUsing:
    case RelationType::kPrecedes:
    case RelationType::kCausativeOf:
    case RelationType::kInchoativeOf:
    case RelationType::kSubframe:
      return true;
    default:
      return false;
  }
}

std::optional<RelationFilter> RelationFilter::parse(std::string_view text) {
  if (text == "grouping") return grouping();
  if (text == "scenario_only") return scenario_only();
  if (text == "all") return all();
  for (RelationType r : kAllRelations) {
    if (to_lower(relation_name(r)) == text) return single(r);
  }
  return std::nullopt;
}

std::string RelationFilter::to_string() const {
  switch (mode) {
    case Mode::kSingle:
      return to_lower(relation_name(relation));
    case Mode::kGrouping:
      return "grouping";
    case Mode::kScenarioOnly:
      return "scenario_only";
    case Mode::kAll:
      return "all";
  }
  return "all";
}

FrameGraph::FrameGraph(FrameTable table, std::vector<FrameEdge> edges,
                       std::unordered_map<FrameId, bool> explicit_flags)
    : table_(std::move(table)),
      edges_(std::move(edges)),
      explicit_flags_(std::move(explicit_flags)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& e : edges_) {
    if (e.child == e.parent) {
      throw LoadError("self-loop edge on frame '" + table_.name(e.child) + "'");
    }
    if (is_reserved_frame(e.child) || is_reserved_frame(e.parent)) {
      throw LoadError("reserved frame used as a graph node");
    }
  }
  const std::size_t n = table_.size();
  offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) ++offsets_[e.child + 1];
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];

  scenario_.assign(n, false);
  for (std::size_t f = kFirstRealFrame; f < n; ++f) {
    auto it = explicit_flags_.find(static_cast<FrameId>(f));
    scenario_[f] = it != explicit_flags_.end() ? it->second
                                               : has_scenario_suffix(table_.name(f));
  }
}

bool FrameGraph::is_scenario(FrameId f) const {
  if (f < 0 || static_cast<std::size_t>(f) >= scenario_.size()) return false;
  return scenario_[f];
}

std::optional<bool> FrameGraph::explicit_flag(FrameId f) const {
  auto it = explicit_flags_.find(f);
  if (it == explicit_flags_.end()) return std::nullopt;
  return it->second;
}

std::span<const FrameEdge> FrameGraph::out_edges(FrameId f) const {
  if (f < 0 || static_cast<std::size_t>(f) + 1 >= offsets_.size()) return {};
  return std::span<const FrameEdge>(edges_).subspan(
      offsets_[f], offsets_[f + 1] - offsets_[f]);
}

bool FrameGraph::admits(const FrameEdge& e, const RelationFilter& filter) const {
  switch (filter.mode) {
    case RelationFilter::Mode::kSingle:
      return e.relation == filter.relation;
    case RelationFilter::Mode::kGrouping:
      return in_relation_group(e.relation);
    case RelationFilter::Mode::kScenarioOnly:
      return is_scenario(e.parent);
    case RelationFilter::Mode::kAll:
      return true;
  }
  return false;
}

FrameGraph parse_frame_graph(std::string_view text) {
  FrameTable table;
  std::vector<FrameEdge> edges;
  std::unordered_map<FrameId, bool> flags;

  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto where = "frame graph line " + std::to_string(line_no) + ": ";

    const auto cols = split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) {
      throw LoadError(where + "expected 3 or 4 tab-separated columns");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (cols[i].empty()) throw LoadError(where + "empty column");
    }
    const auto relation = parse_relation(cols[1]);
    if (!relation) {
      throw LoadError(where + "unknown relation '" + std::string(cols[1]) + "'");
    }
    if (cols[0] == cols[2]) {
      throw LoadError(where + "self-loop on '" + std::string(cols[0]) + "'");
    }
    if (table.find(cols[0]).value_or(kFirstRealFrame) < kFirstRealFrame ||
        table.find(cols[2]).value_or(kFirstRealFrame) < kFirstRealFrame) {
      throw LoadError(where + "reserved frame name used as a node");
    }
    const FrameId child = table.intern(cols[0]);
    const FrameId parent = table.intern(cols[2]);
    if (cols.size() == 4) {
      bool flag;
      if (cols[3] == "scenario=1") {
        flag = true;
      } else if (cols[3] == "scenario=0") {
        flag = false;
      } else {
        throw LoadError(where + "fourth column must be scenario=0 or scenario=1");
      }
      auto [it, inserted] = flags.emplace(parent, flag);
      if (!inserted && it->second != flag) {
        throw LoadError(where + "conflicting scenario flag for '" +
                        std::string(cols[2]) + "'");
      }
    }
    edges.push_back({child, *relation, parent});
  }
  return FrameGraph(std::move(table), std::move(edges), std::move(flags));
}

FrameGraph load_frame_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open frame graph " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_frame_graph(buf.str());
}

std::string format_frame_graph(const FrameGraph& graph) {
  const auto& table = graph.frames();
  std::ostringstream out;
  for (const auto& e : graph.edges()) {
    out << table.name(e.child) << '\t' << relation_name(e.relation) << '\t'
        << table.name(e.parent);
    if (auto flag = graph.explicit_flag(e.parent)) {
      out << "\tscenario=" << (*flag ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

void save_frame_graph(const FrameGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write frame graph " + path.string());
  out << format_frame_graph(graph);
  if (!out) throw LoadError("write failed for " + path.string());
}

std::vector<FrameId> abstract_frames(const FrameGraph& graph, FrameId frame,
                                     const RelationFilter& filter) {
  std::vector<FrameId> parents;
  if (frame == kNoFrame) return parents;
  for (const auto& e : graph.out_edges(frame)) {
    if (graph.admits(e, filter)) parents.push_back(e.parent);
  }
  std::sort(parents.begin(), parents.end());
  parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
  return parents;
}

FrameId sample_abstract_frame(const FrameGraph& graph, FrameId frame,
                              const RelationFilter& filter, std::mt19937_64& rng) {
  const auto parents = abstract_frames(graph, frame, filter);
  if (parents.empty()) return kAbstain;
  if (parents.size() == 1) return parents.front();
  std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
  return parents[pick(rng)];
}

bool scenario_connected(const FrameGraph& graph, FrameId a, FrameId b) {
  const auto pa = abstract_frames(graph, a, RelationFilter::all());
  const auto pb = abstract_frames(graph, b, RelationFilter::all());
  // Both sorted; walk them together.
  auto ia = pa.begin();
  auto ib = pb.begin();
  while (ia != pa.end() && ib != pb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      if (graph.is_scenario(*ia)) return true;
      ++ia;
      ++ib;
    }
  }
  return false;
}

}  // namespace shem
