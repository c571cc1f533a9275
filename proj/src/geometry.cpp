#include "coopintersect/geometry.hpp"

#include <stdexcept>
#include <utility>

namespace coopintersect {

namespace {

struct Row {
  const char* group;
  std::array<const char*, 3> partners;
};

constexpr std::array<Row, 8> kNonConflictRows{{
    {"0-1", {"0-2", "1-1", "2-2"}},
    {"0-2", {"0-1", "1-2", "3-1"}},
    {"1-1", {"0-1", "1-2", "3-2"}},
    {"1-2", {"0-2", "1-1", "2-1"}},
    {"2-1", {"1-2", "2-2", "3-1"}},
    {"2-2", {"0-1", "2-1", "3-2"}},
    {"3-1", {"0-2", "2-1", "3-2"}},
    {"3-2", {"1-1", "2-2", "3-1"}},
}};

}  // namespace

std::string LaneGroup::label() const {
  return std::to_string(road) + "-" + std::to_string(static_cast<int>(intention));
}

LaneGroup LaneGroup::parse(std::string_view text) {
  if (text.size() != 3 || text[1] != '-' || text[0] < '0' || text[0] > '3' || text[2] < '0' ||
      text[2] > '2') {
    throw std::invalid_argument("malformed lane group '" + std::string(text) + "'");
  }
  return assign_group(text[0] - '0', text[2] - '0');
}

void IntersectionSpec::validate() const {
  if (!(control_zone_length > 0.0)) throw std::invalid_argument("control_zone_length must be > 0");
  if (!(conflict_zone_width > 0.0)) throw std::invalid_argument("conflict_zone_width must be > 0");
  if (lanes_per_road < 1) throw std::invalid_argument("lanes_per_road must be >= 1");
  if (!(speed_limit > 0.0)) throw std::invalid_argument("speed_limit must be > 0");
}

int IntersectionSpec::lane_for(Intention intention) const noexcept {
  const int i = static_cast<int>(intention);
  if (lanes_per_road >= kIntentionCount) return i;
  if (lanes_per_road == 1) return 0;
  return intention == Intention::left_turn ? 1 : 0;
}

LaneGroup assign_group(int road, int intention) {
  if (road < 0 || road >= kRoadCount) throw std::invalid_argument("road out of range");
  if (intention < 0 || intention >= kIntentionCount) throw std::invalid_argument("intention out of range");
  return LaneGroup{road, static_cast<Intention>(intention)};
}

ConflictTable::ConflictTable() {
  for (const Row& row : kNonConflictRows) {
    const LaneGroup g = LaneGroup::parse(row.group);
    for (const char* p : row.partners) listed_[g.index()][LaneGroup::parse(p).index()] = true;
  }
  for (int a = 0; a < kGroupCount; ++a) {
    for (int b = 0; b < kGroupCount; ++b) {
      const LaneGroup ga = LaneGroup::from_index(a);
      const LaneGroup gb = LaneGroup::from_index(b);
      // Same group shares a trajectory; ordering there is longitudinal.
      const bool free = ga.intention == Intention::right_turn ||
                        gb.intention == Intention::right_turn || a == b || listed_[a][b];
      conflict_[a][b] = !free;
    }
  }
}

const ConflictTable& ConflictTable::standard() {
  static const ConflictTable table;
  return table;
}

std::vector<LaneGroup> ConflictTable::non_conflict_set(LaneGroup g) const {
  std::vector<LaneGroup> out;
  for (int b = 0; b < kGroupCount; ++b) {
    if (listed_[g.index()][b]) out.push_back(LaneGroup::from_index(b));
  }
  return out;
}

std::array<LaneGroup, kRoadCount> ConflictTable::right_turn_groups() const noexcept {
  return {LaneGroup{0, Intention::right_turn}, LaneGroup{1, Intention::right_turn},
          LaneGroup{2, Intention::right_turn}, LaneGroup{3, Intention::right_turn}};
}

}  // namespace coopintersect
