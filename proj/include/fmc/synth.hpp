#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fmc/grid.hpp"
#include "fmc/trajectory.hpp"

namespace fmc {

enum class ObjectShape { rectangle, disk };

/// One rigid object. (x, y) is the top-left corner of a rectangle or the
/// centre of a disk at frame 0; it moves by (vx, vy) whole pixels per frame.
struct SceneObject {
  ObjectShape shape = ObjectShape::rectangle;
  int width = 8;    // rectangle
  int height = 8;   // rectangle
  int radius = 4;   // disk
  int x = 0;
  int y = 0;
  int vx = 0;
  int vy = 0;
  std::array<double, 3> color{1.0, 1.0, 1.0};
};

/// Later objects are drawn on top of earlier ones. Objects may leave the
/// frame; the part outside is clipped.
struct SceneSpec {
  int height = 64;
  int width = 64;
  int frames = 10;
  std::vector<SceneObject> objects;
  std::array<double, 3> background{0.2, 0.2, 0.2};
  double texture = 0.05;  // amplitude of per-pixel appearance noise
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Text form, one `key = value` per line, '#' starts a comment:
///
///     height = 64
///     width = 64
///     frames = 10
///     seed = 3
///     texture = 0.05
///     background = 0.2,0.2,0.2
///     object = rect w=12 h=10 x=8 y=20 vx=2 vy=0 color=0.9,0.2,0.2
///     object = disk r=6 x=40 y=30 vx=-1 vy=1 color=0.2,0.9,0.2
SceneSpec parse_scene_spec(const std::string& text);
std::string format_scene_spec(const SceneSpec& spec);

struct Scene {
  std::vector<Grid> rgb;        // T frames, 3 channels in [0, 1]
  std::vector<Grid> masks;      // T binary masks
  std::vector<Grid> labels;     // T label maps, object i has id i + 1
  std::vector<FlowPair> pairs;  // T - 1; pairs[t] links frame t to t + 1
};

/// Forward flow carries each visible object's velocity, background flow is
/// zero, and backward flow at t + 1 is minus the velocity of the object
/// visible there. Pixels revealed or covered by occlusion therefore fail the
/// consistency test.
Scene generate_scene(const SceneSpec& spec);

/// Object k gets basis vector e_{k-1} rotated by a random angle of at most
/// noise_deg; background gets e_{C-1} with the same perturbation.
/// Requires every id <= C - 1.
std::vector<Grid> oracle_embeddings(const std::vector<Grid>& labels, int channels, double noise_deg,
                                    std::uint64_t seed);

}  // namespace fmc
