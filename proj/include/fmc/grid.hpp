#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fmc {

/// Dense H x W x C grid of doubles, row-major with channels innermost.
///
/// Holds images (C=3), flow fields (C=2), masks (C=1) and feature maps.
/// A default-constructed grid is empty (all dimensions zero); every other
/// grid has positive dimensions.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }
  double& operator()(int row, int col, int ch = 0) { return values_[index(row, col, ch)]; }
  double operator()(int row, int col, int ch = 0) const { return values_[index(row, col, ch)]; }

  std::span<double> pixel(int row, int col) {
    return {values_.data() + index(row, col), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(int row, int col) const {
    return {values_.data() + index(row, col), static_cast<std::size_t>(channels_)};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_spatial(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_shape(const Grid& other) const {
    return same_spatial(other) && channels_ == other.channels_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

/// Convolution weights laid out k x k x Cin x Cout (Cout innermost).
struct ConvWeights {
  int kernel_size = 1;
  int in_channels = 1;
  int out_channels = 1;
  std::vector<double> kernel;
  std::vector<double> bias;

  ConvWeights() = default;
  ConvWeights(int k, int cin, int cout);

  std::size_t index(int ky, int kx, int ci, int co) const {
    return ((static_cast<std::size_t>(ky) * kernel_size + kx) * in_channels + ci) * out_channels + co;
  }
  double& at(int ky, int kx, int ci, int co) { return kernel[index(ky, kx, ci, co)]; }
  double at(int ky, int kx, int ci, int co) const { return kernel[index(ky, kx, ci, co)]; }
};

enum class Activation { relu, sigmoid };

// Bilinear interpolation at column x, row y. Corners outside the grid read
// as zero. Throws std::invalid_argument for non-finite coordinates.
void bilinear_sample(const Grid& grid, double x, double y, std::span<double> out);
std::vector<double> bilinear_sample(const Grid& grid, double x, double y);

/// Same-size convolution with zero padding of (k-1)/2 on each side.
Grid conv2d(const Grid& input, const ConvWeights& weights);

/// 2x2 max pooling, stride 2. Requires even height and width.
Grid maxpool2(const Grid& input);

/// Group normalisation over (H, W, channels-in-group) per group.
Grid group_norm(const Grid& input, int groups, std::span<const double> gamma,
                std::span<const double> beta, double eps = 1e-5);

/// min(8, C) when it divides C, otherwise the largest divisor of C below 8.
int default_group_count(int channels);

Grid activate(Activation kind, const Grid& input);

inline double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

/// 2x bilinear upsampling. Output pixel (r, c) samples the input at
/// (r/2, c/2), clamped to the last row/column, so even output positions
/// reproduce input values exactly.
Grid upsample2_bilinear(const Grid& input);

/// Concatenate along channels; all inputs must share H and W.
Grid concat_channels(std::span<const Grid* const> parts);

/// Bilinear resize to an arbitrary target size (pixel-centre convention).
Grid resize_bilinear(const Grid& input, int height, int width);

/// Nearest-neighbour resize (used for label maps).
Grid resize_nearest(const Grid& input, int height, int width);

}  // namespace fmc
