#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace coopintersect {

inline constexpr int kRoadCount = 4;
inline constexpr int kIntentionCount = 3;
inline constexpr int kGroupCount = kRoadCount * kIntentionCount;

enum class Intention : std::uint8_t { right_turn = 0, straight = 1, left_turn = 2 };

/// Trajectory group "x-y": origin road x, intention y.
struct LaneGroup {
  int road = 0;
  Intention intention = Intention::straight;

  [[nodiscard]] constexpr int index() const noexcept {
    return road * kIntentionCount + static_cast<int>(intention);
  }
  [[nodiscard]] static constexpr LaneGroup from_index(int idx) noexcept {
    return LaneGroup{idx / kIntentionCount, static_cast<Intention>(idx % kIntentionCount)};
  }
  [[nodiscard]] std::string label() const;
  /// Parses "x-y". Throws std::invalid_argument on malformed input.
  [[nodiscard]] static LaneGroup parse(std::string_view text);

  friend constexpr bool operator==(LaneGroup, LaneGroup) = default;
};

struct IntersectionSpec {
  double control_zone_length = 150.0;  // L_c
  double conflict_zone_width = 25.0;   // identified with the lateral margin M_sl
  int lanes_per_road = 3;              // L_n
  double speed_limit = 20.0;           // v-bar

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;

  /// Lane index a vehicle with the given intention occupies on its road.
  [[nodiscard]] int lane_for(Intention intention) const noexcept;
};

[[nodiscard]] LaneGroup assign_group(int road, int intention);

/// Non-conflict relation between trajectory groups. Right-turn groups conflict
/// with nothing; every other group has exactly three non-conflicting partners.
class ConflictTable {
 public:
  ConflictTable();

  /// The table used at the modelled four-arm intersection.
  [[nodiscard]] static const ConflictTable& standard();

  [[nodiscard]] bool conflicts(LaneGroup a, LaneGroup b) const noexcept {
    return conflict_[a.index()][b.index()];
  }
  /// Listed non-conflicting partners of a non-right-turn group (right-turn groups excluded).
  [[nodiscard]] std::vector<LaneGroup> non_conflict_set(LaneGroup g) const;
  [[nodiscard]] std::array<LaneGroup, kRoadCount> right_turn_groups() const noexcept;

 private:
  std::array<std::array<bool, kGroupCount>, kGroupCount> conflict_{};
  std::array<std::array<bool, kGroupCount>, kGroupCount> listed_{};
};

[[nodiscard]] inline bool conflicts(LaneGroup a, LaneGroup b) {
  return ConflictTable::standard().conflicts(a, b);
}

}  // namespace coopintersect
