#pragma once

#include <cmath>
#include <string>

#include "failbench/error.hpp"

namespace failbench {

// How a performance measure orders methods. LowerBetter exists for the
// signed-ranking configuration switch; the default ranking of bias-like
// measures is LowerAbsBetter.
enum class Direction {
  HigherBetter,
  LowerAbsBetter,
  CloserToTarget,
  LowerBetter,
};

struct MeasureSpec {
  std::string name = "value";
  Direction direction = Direction::HigherBetter;
  double target = 0.0;  // used by CloserToTarget only

  // Score such that smaller is better, for ranking.
  double rank_key(double value) const {
    switch (direction) {
      case Direction::HigherBetter: return -value;
      case Direction::LowerAbsBetter: return std::abs(value);
      case Direction::CloserToTarget: return std::abs(value - target);
      case Direction::LowerBetter: return value;
    }
    return value;
  }

  void validate() const {
    require(std::isfinite(target) || direction != Direction::CloserToTarget,
            Errc::config, "measure target must be finite");
  }
};

inline std::string direction_name(Direction d) {
  switch (d) {
    case Direction::HigherBetter: return "higher_better";
    case Direction::LowerAbsBetter: return "lower_abs_better";
    case Direction::CloserToTarget: return "closer_to_target";
    case Direction::LowerBetter: return "lower_better";
  }
  return "higher_better";
}

inline Direction direction_from_name(const std::string& s) {
  if (s == "higher_better") return Direction::HigherBetter;
  if (s == "lower_abs_better") return Direction::LowerAbsBetter;
  if (s == "closer_to_target") return Direction::CloserToTarget;
  if (s == "lower_better") return Direction::LowerBetter;
  raise(Errc::parse, "unknown measure direction '" + s + "'");
}

}  // namespace failbench
