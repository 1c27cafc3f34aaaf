#include "shem/similarity.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shem/text.h"

namespace shem {
namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

EventTuple parse_short_event(std::string_view text, const std::string& where) {
  const auto f = split_whitespace(text);
  if (f.size() != 3 && f.size() != 4) {
    throw LoadError(where + "event needs 3 or 4 fields");
  }
  EventTuple e;
  e.predicate = f[0];
  e.subject = f[1];
  e.object = f[2];
  if (f.size() == 4 && f[3] != "-") e.modifier = f[3];
  return e;
}

std::string short_event(const EventTuple& e) {
  std::string s = e.predicate + ' ' + e.subject + ' ' + e.object;
  if (e.modifier != kNoneToken) s += ' ' + e.modifier;
  return s;
}

// Splits "events<TAB>label" and the events on '|'.
std::pair<std::vector<std::string_view>, std::string_view> split_record(
    std::string_view line, std::size_t events, const std::string& where) {
  const auto cols = split(line, '\t');
  if (cols.size() != 2) throw LoadError(where + "expected events<TAB>label");
  auto parts = split(cols[0], '|');
  if (parts.size() != events) {
    throw LoadError(where + "expected " + std::to_string(events) + " events");
  }
  return {parts, trim(cols[1])};
}

}  // namespace

std::vector<HardSimilarityInstance> parse_hard_similarity(std::string_view text) {
  std::vector<HardSimilarityInstance> out;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto where = "hard similarity line " + std::to_string(line_no) + ": ";
    auto [events, label] = split_record(line, 4, where);
    HardSimilarityInstance inst;
    inst.pair_a = {parse_short_event(events[0], where), parse_short_event(events[1], where)};
    inst.pair_b = {parse_short_event(events[2], where), parse_short_event(events[3], where)};
    if (label == "A") {
      inst.a_more_similar = true;
    } else if (label == "B") {
      inst.a_more_similar = false;
    } else {
      throw LoadError(where + "label must be A or B");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<TransitiveInstance> parse_transitive(std::string_view text) {
  std::vector<TransitiveInstance> out;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto where = "transitive line " + std::to_string(line_no) + ": ";
    auto [events, label] = split_record(line, 2, where);
    TransitiveInstance inst;
    inst.first = parse_short_event(events[0], where);
    inst.second = parse_short_event(events[1], where);
    const auto r = std::from_chars(label.data(), label.data() + label.size(), inst.gold);
    if (r.ec != std::errc() || r.ptr != label.data() + label.size() ||
        !std::isfinite(inst.gold)) {
      throw LoadError(where + "bad gold score '" + std::string(label) + "'");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<HardSimilarityInstance> load_hard_similarity(const std::filesystem::path& path) {
  return parse_hard_similarity(read_all(path));
}

std::vector<TransitiveInstance> load_transitive(const std::filesystem::path& path) {
  return parse_transitive(read_all(path));
}

std::string format_hard_similarity(const std::vector<HardSimilarityInstance>& items) {
  std::string out;
  for (const auto& it : items) {
    out += short_event(it.pair_a[0]) + " | " + short_event(it.pair_a[1]) + " | " +
           short_event(it.pair_b[0]) + " | " + short_event(it.pair_b[1]) + '\t' +
           (it.a_more_similar ? "A" : "B") + '\n';
  }
  return out;
}

std::string format_transitive(const std::vector<TransitiveInstance>& items) {
  std::string out;
  char buf[32];
  for (const auto& it : items) {
    auto r = std::to_chars(buf, buf + sizeof(buf), it.gold);
    out += short_event(it.first) + " | " + short_event(it.second) + '\t' +
           std::string(buf, r.ptr) + '\n';
  }
  return out;
}

}  // namespace shem
