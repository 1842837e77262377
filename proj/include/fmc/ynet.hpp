#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fmc/grid.hpp"
#include "fmc/io.hpp"

namespace fmc {

/// Conv 3x3 -> GroupNorm -> ReLU.
struct ConvGnLayer {
  ConvWeights conv;
  std::vector<double> gamma;
  std::vector<double> beta;

  Grid apply(const Grid& input) const;
};

struct ConvBlock {
  ConvGnLayer first;
  ConvGnLayer second;

  Grid apply(const Grid& input) const { return second.apply(first.apply(input)); }
};

struct YNetSchedule {
  std::array<int, 4> block_channels{16, 32, 64, 128};
  int embedding_channels = 32;
};

/// Weights of the two-branch encoder / shared decoder network.
///
/// Encoder block i (i = 0..3) runs at 1/2^i resolution and is followed by 2x2
/// max pooling. The two pooled bottlenecks are concatenated; decoder block i
/// upsamples its input 2x, concatenates the block-i skip features of both
/// branches and applies two conv layers with block_channels[i] outputs.
struct YNetParams {
  YNetSchedule schedule;
  std::array<ConvBlock, 4> rgb_encoder;
  std::array<ConvBlock, 4> flow_encoder;
  std::array<ConvBlock, 4> decoder;
  ConvWeights embed_head;  // 1x1, block_channels[0] -> C
  ConvWeights fg_head;     // 1x1, C -> 1

  static YNetParams zeros(const YNetSchedule& schedule);
  /// He-normal conv weights, zero biases, unit gamma, zero beta.
  static YNetParams random(const YNetSchedule& schedule, std::uint64_t seed);
  /// Reads tensors named "ynet.*"; the schedule is recovered from their shapes.
  static YNetParams from_params(const io::ParamSet& params);
  void to_params(io::ParamSet& params) const;
};

struct ForegroundMask {
  Grid logits;  // H x W x 1
  Grid mask;    // 1 where logit > 0, i.e. sigmoid(logit) > 0.5 strictly
};

/// Per-pixel embeddings (H x W x C). Requires H and W divisible by 16.
Grid ynet_forward(const Grid& rgb, const Grid& flow, const YNetParams& params);

ForegroundMask foreground_predict(const Grid& embeddings, const ConvWeights& fg_head);

}  // namespace fmc
