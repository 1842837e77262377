#include "fmc/trajectory.hpp"

#include <cmath>
#include <string>

#include "fmc/error.hpp"

namespace fmc {

void FlowPair::validate() const {
  if (forward.channels() != 2 || backward.channels() != 2) {
    throw ShapeError("flow pair: flows must have 2 channels");
  }
  if (!forward.same_spatial(backward)) throw ShapeError("flow pair: forward/backward size mismatch");
}

bool flow_consistent(const Vec2& f, const Vec2& b) {
  const double su = f[0] + b[0];
  const double sv = f[1] + b[1];
  const double lhs = su * su + sv * sv;
  const double rhs = 0.01 * (f[0] * f[0] + f[1] * f[1] + b[0] * b[0] + b[1] * b[1]) + 0.5;
  return lhs <= rhs;
}

int round_half_down(double v) { return static_cast<int>(std::ceil(v - 0.5)); }

std::optional<std::array<int, 2>> rounded_source(const Grid& backward, int row, int col) {
  const int sr = round_half_down(row + backward(row, col, 1));
  const int sc = round_half_down(col + backward(row, col, 0));
  if (sr < 0 || sc < 0 || sr >= backward.height() || sc >= backward.width()) return std::nullopt;
  return std::array<int, 2>{sr, sc};
}

LinkMask link_mask(const FlowPair& pair, const Grid& fg_prev, const Grid& fg_cur, int frame) {
  pair.validate();
  if (!fg_prev.same_spatial(pair.forward) || !fg_cur.same_spatial(pair.forward)) {
    throw ShapeError("link_mask: mask and flow sizes differ");
  }
  const int height = fg_cur.height();
  const int width = fg_cur.width();
  LinkMask out{Grid(height, width, 1), frame};

#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    double prev_fg = 0.0;
    Vec2 fwd{};
    for (int c = 0; c < width; ++c) {
      if (fg_cur(r, c) < 0.5) continue;
      const Vec2 bwd{pair.backward(r, c, 0), pair.backward(r, c, 1)};
      const double sx = c + bwd[0];
      const double sy = r + bwd[1];
      bilinear_sample(fg_prev, sx, sy, {&prev_fg, 1});
      if (prev_fg < 0.5) continue;
      bilinear_sample(pair.forward, sx, sy, fwd);
      if (flow_consistent(fwd, bwd)) out.grid(r, c) = 1.0;
    }
  }
  return out;
}

Grid warp_g(const Grid& values, const FlowPair& pair, const LinkMask& mask) {
  pair.validate();
  if (!values.same_spatial(pair.backward) || !mask.grid.same_spatial(pair.backward)) {
    throw ShapeError("warp_g: values, flow and mask sizes differ");
  }
  const int height = values.height();
  const int width = values.width();
  Grid out(height, width, values.channels());

#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (mask.grid(r, c) < 0.5) continue;
      bilinear_sample(values, c + pair.backward(r, c, 0), r + pair.backward(r, c, 1), out.pixel(r, c));
    }
  }
  return out;
}

std::vector<Trajectory> enumerate_trajectories(std::span<const Grid> fg, std::span<const LinkMask> links,
                                               std::span<const FlowPair> pairs) {
  if (fg.empty()) return {};
  if (links.size() + 1 != fg.size() || pairs.size() + 1 != fg.size()) {
    throw ShapeError("enumerate_trajectories: need T masks and T-1 link masks and flow pairs");
  }
  const int height = fg[0].height();
  const int width = fg[0].width();
  std::vector<Trajectory> out;
  std::vector<int> owner(static_cast<std::size_t>(height) * width, -1);

  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (fg[0](r, c) < 0.5) continue;
      owner[static_cast<std::size_t>(r) * width + c] = static_cast<int>(out.size());
      out.push_back({{{0, r, c}}});
    }
  }

  for (std::size_t t = 1; t < fg.size(); ++t) {
    const Grid& mask = fg[t];
    if (!mask.same_spatial(fg[0]) || !links[t - 1].grid.same_spatial(fg[0])) {
      throw ShapeError("enumerate_trajectories: frame size mismatch");
    }
    std::vector<int> next(owner.size(), -1);
    std::vector<char> claimed(owner.size(), 0);
    const int frame = static_cast<int>(t);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (mask(r, c) < 0.5) continue;
        int parent = -1;
        std::size_t src_index = 0;
        if (links[t - 1].grid(r, c) >= 0.5) {
          if (const auto src = rounded_source(pairs[t - 1].backward, r, c)) {
            src_index = static_cast<std::size_t>((*src)[0]) * width + (*src)[1];
            parent = owner[src_index];
          }
        }
        int id;
        if (parent < 0) {
          id = static_cast<int>(out.size());
          out.push_back({{{frame, r, c}}});
        } else if (!claimed[src_index]) {
          claimed[src_index] = 1;
          id = parent;
          out[id].points.push_back({frame, r, c});
        } else {
          Trajectory branch;
          branch.points.assign(out[parent].points.begin(), out[parent].points.end() - 1);
          branch.points.push_back({frame, r, c});
          id = static_cast<int>(out.size());
          out.push_back(std::move(branch));
        }
        next[static_cast<std::size_t>(r) * width + c] = id;
      }
    }
    owner = std::move(next);
  }
  return out;
}

}  // namespace fmc
