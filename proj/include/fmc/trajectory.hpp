#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "fmc/grid.hpp"

namespace fmc {

/// Flow vectors are (u, v) = (delta column, delta row) in pixels.
using Vec2 = std::array<double, 2>;

/// Forward flow F_{t-1} (frame t-1 -> t) and backward flow (frame t -> t-1).
struct FlowPair {
  Grid forward;
  Grid backward;

  /// Throws ShapeError unless both grids are 2-channel and share H, W.
  void validate() const;
};

/// Binary H x W x 1 grid: 1 where pixel (row, col) of frame `frame` is linked
/// to a foreground pixel of frame `frame - 1`.
struct LinkMask {
  Grid grid;
  int frame = 0;
};

struct TrajectoryPoint {
  int frame;
  int row;
  int col;
  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  int length() const { return static_cast<int>(points.size()); }
};

/// Forward/backward consistency:
/// |f + b|^2 <= 0.01 (|f|^2 + |b|^2) + 0.5.
bool flow_consistent(const Vec2& f, const Vec2& b);

/// Rounds to the nearest integer with ties going toward negative infinity.
int round_half_down(double v);

/// Lattice pixel that target (row, col) links back to under the backward
/// flow, or nullopt when the rounded source falls outside the frame.
std::optional<std::array<int, 2>> rounded_source(const Grid& backward, int row, int col);

/// Link mask between frames t-1 and t. A target pixel is linked when it is
/// foreground, the previous mask sampled at its backward-flow source is
/// >= 0.5, and the forward flow sampled there is consistent with its
/// backward flow.
LinkMask link_mask(const FlowPair& pair, const Grid& fg_prev, const Grid& fg_cur, int frame = 1);

/// Foreground-consistent warp: gathers `values` at each linked target's
/// backward-flow source (bilinear), zero where the link mask is 0.
Grid warp_g(const Grid& values, const FlowPair& pair, const LinkMask& mask);

/// Explicit trajectories over a sequence. `fg` has T masks; `links` and
/// `pairs` have T-1 entries, entry t-1 linking frame t-1 to frame t.
///
/// Each target pixel continues the trajectory that ended at its rounded
/// source. When several targets claim one source, the first in raster order
/// continues it and the others start branches that copy the shared prefix,
/// which is what warping the recurrent state produces. Without branching the
/// result partitions the foreground pixels of every frame.
std::vector<Trajectory> enumerate_trajectories(std::span<const Grid> fg, std::span<const LinkMask> links,
                                               std::span<const FlowPair> pairs);

}  // namespace fmc
