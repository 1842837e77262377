#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmc/grid.hpp"
#include "fmc/io.hpp"
#include "fmc/loss.hpp"
#include "fmc/trajectory.hpp"

namespace fmc {

enum class PtrnnVariant { standard, conv, conv_gru };

PtrnnVariant parse_variant(const std::string& name);
std::string variant_name(PtrnnVariant v);

/// Spatial coordinate module: two fully connected layers 4 -> C -> C.
struct ScmParams {
  Eigen::MatrixXd fc1;  // C x 4
  Eigen::VectorXd b1;   // C
  Eigen::MatrixXd fc2;  // C x C
  Eigen::VectorXd b2;   // C

  static ScmParams zeros(int channels);
};

struct PtrnnParams {
  PtrnnVariant variant = PtrnnVariant::conv;
  int channels = 32;

  // standard: per-pixel maps. The hidden layer is C x 2C and the weight head
  // 1 x C, so a single weight is broadcast over all channels.
  Eigen::MatrixXd std_hidden;  // C x 2C
  Eigen::RowVectorXd std_out;  // 1 x C

  // conv and convGRU: 3x3 kernels without bias.
  ConvWeights conv_c;      // 2C -> C        (conv)
  ConvWeights conv_w;      // C -> C         (conv, convGRU)
  ConvWeights conv_z;      // 2C -> C        (convGRU update gate)
  ConvWeights conv_r;      // 2C -> C        (convGRU reset gate)
  ConvWeights conv_cand;   // 2C -> C        (convGRU candidate memory)

  ScmParams scm;

  /// When set, every weight w_t is this constant instead of the network output.
  std::optional<double> forced_weight;

  /// All-zero weights: the network then emits w = sigmoid(0) = 0.5 everywhere,
  /// so trajectory embeddings are plain means.
  static PtrnnParams zeros(PtrnnVariant variant, int channels);
  static PtrnnParams random(PtrnnVariant variant, int channels, std::uint64_t seed, double scale = 0.3);
  /// Reads tensors named "ptrnn.*" and "scm.*".
  static PtrnnParams from_params(const io::ParamSet& params);
  void to_params(io::ParamSet& params) const;
};

/// Per-pixel trajectory statistics carried along with the hidden state.
enum StatChannel : int { kStartX = 0, kStartY, kCurX, kCurY, kSumX, kSumY, kLength, kStatCount };

struct PtrnnState {
  Grid h;        // running weighted sum
  Grid weight;   // running weight total
  Grid memory;   // convGRU memory (empty for other variants)
  Grid stats;    // kStatCount channels
  Grid fg;       // foreground mask of the current frame
  std::vector<std::int64_t> track;  // trajectory id per pixel, -1 when not live
  std::int64_t next_track = 0;
  int frame = -1;

  bool live(int row, int col) const { return stats(row, col, kLength) > 0.0; }
};

struct TrajectoryEmbedding {
  Vector embedding;             // unit norm, SCM applied
  Vector raw;                   // h / W before the SCM
  int end_frame = 0;
  int end_row = 0;
  int end_col = 0;
  int length = 0;
  std::array<double, 4> stats{};  // normalised (mean x, mean y, dx, dy)
  std::int64_t track = -1;
};

struct RejectedTrajectory {
  int end_frame;
  int end_row;
  int end_col;
  std::int64_t track;
};

struct TrajectoryEmbeddingSet {
  std::vector<TrajectoryEmbedding> entries;
  std::vector<RejectedTrajectory> rejected;  // zero-norm embeddings

  void append(TrajectoryEmbeddingSet&& other);
};

/// Per-pixel weights w_t from the ratio map h~/W~ and embeddings x_t.
/// `memory` is the warped convGRU memory and is replaced by the new one.
Grid ptrnn_weights(const Grid& ratio, const Grid& x, Grid& memory, const PtrnnParams& params);

PtrnnState ptrnn_init(const Grid& x1, const Grid& m1, const PtrnnParams& params);

/// Advances to the next frame. Returns the trajectories that ended at the
/// previous frame (live there, and no linked target at this frame rounds
/// back to them); they are read from the state before warping.
TrajectoryEmbeddingSet ptrnn_step(PtrnnState& state, const Grid& xt, const FlowPair& pair, const LinkMask& link,
                                  const Grid& mt, const PtrnnParams& params);

/// SCM input from raw statistics: mean location mapped to [-1, 1] about
/// the image centre, displacement divided by the image extent.
std::array<double, 4> scm_stats(double mean_x, double mean_y, double dx, double dy, int height, int width);

/// raw + FC2(ReLU(FC1(stats))).
Vector scm_apply(const Vector& raw, const std::array<double, 4>& stats, const ScmParams& scm);

/// Emits every still-live trajectory of the current frame.
TrajectoryEmbeddingSet finalize_all(const PtrnnState& state, const PtrnnParams& params);

}  // namespace fmc
