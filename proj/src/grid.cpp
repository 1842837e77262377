#include "fmc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fmc/error.hpp"

namespace fmc {

Grid::Grid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
  values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ConvWeights::ConvWeights(int k, int cin, int cout)
    : kernel_size(k), in_channels(cin), out_channels(cout) {
  if (k < 1 || k % 2 == 0) throw ShapeError("convolution kernel size must be odd");
  if (cin < 1 || cout < 1) throw ShapeError("convolution channel counts must be positive");
  kernel.assign(static_cast<std::size_t>(k) * k * cin * cout, 0.0);
  bias.assign(cout, 0.0);
}

void bilinear_sample(const Grid& grid, double x, double y, std::span<double> out) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw std::invalid_argument("bilinear_sample: non-finite coordinate");
  }
  const int channels = grid.channels();
  std::fill(out.begin(), out.begin() + channels, 0.0);
  // Far outside: every corner is padding.
  if (x <= -1.0 || y <= -1.0 || x >= grid.width() || y >= grid.height()) return;

  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double ax = x - fx0;
  const double ay = y - fy0;

  const double weights[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (weights[k] == 0.0) continue;
    if (xs[k] < 0 || ys[k] < 0 || xs[k] >= grid.width() || ys[k] >= grid.height()) continue;
    const auto px = grid.pixel(ys[k], xs[k]);
    for (int c = 0; c < channels; ++c) out[c] += weights[k] * px[c];
  }
}

std::vector<double> bilinear_sample(const Grid& grid, double x, double y) {
  std::vector<double> out(grid.channels());
  bilinear_sample(grid, x, y, out);
  return out;
}

Grid conv2d(const Grid& input, const ConvWeights& w) {
  if (input.channels() != w.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.channels()) +
                     " channels, kernel expects " + std::to_string(w.in_channels));
  }
  if (w.kernel_size % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  const int height = input.height();
  const int width = input.width();
  const int half = w.kernel_size / 2;
  const int cin = w.in_channels;
  const int cout = w.out_channels;
  Grid out(height, width, cout);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    std::vector<double> acc(cout);
    for (int c = 0; c < width; ++c) {
      std::copy(w.bias.begin(), w.bias.end(), acc.begin());
      for (int ky = 0; ky < w.kernel_size; ++ky) {
        const int sr = r + ky - half;
        if (sr < 0 || sr >= height) continue;
        for (int kx = 0; kx < w.kernel_size; ++kx) {
          const int sc = c + kx - half;
          if (sc < 0 || sc >= width) continue;
          const auto src = input.pixel(sr, sc);
          const double* taps = &w.kernel[w.index(ky, kx, 0, 0)];
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            if (v == 0.0) continue;
            const double* row = taps + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) acc[co] += v * row[co];
          }
        }
      }
      std::copy(acc.begin(), acc.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

Grid maxpool2(const Grid& input) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw ShapeError("maxpool2: height and width must be even, got " +
                     std::to_string(input.height()) + "x" + std::to_string(input.width()));
  }
  const int channels = input.channels();
  Grid out(input.height() / 2, input.width() / 2, channels);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        out(r, c, ch) = std::max({input(2 * r, 2 * c, ch), input(2 * r, 2 * c + 1, ch),
                                  input(2 * r + 1, 2 * c, ch), input(2 * r + 1, 2 * c + 1, ch)});
      }
    }
  }
  return out;
}

int default_group_count(int channels) {
  for (int g = std::min(8, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

Grid group_norm(const Grid& input, int groups, std::span<const double> gamma,
                std::span<const double> beta, double eps) {
  const int channels = input.channels();
  if (groups < 1 || channels % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (static_cast<int>(gamma.size()) != channels || static_cast<int>(beta.size()) != channels) {
    throw ShapeError("group_norm: gamma/beta length must equal channel count");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("group_norm: eps must be positive");

  const int per_group = channels / groups;
  const std::size_t pixels = static_cast<std::size_t>(input.height()) * input.width();
  const auto src = input.values();
  Grid out(input.height(), input.width(), channels);
  auto dst = out.values();

  // One group per iteration keeps each reduction serial and the result
  // independent of the thread count.
#pragma omp parallel for schedule(static)
  for (int g = 0; g < groups; ++g) {
    const int c0 = g * per_group;
    double sum = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) sum += src[p * channels + c];
    }
    const double count = static_cast<double>(pixels) * per_group;
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const double d = src[p * channels + c] - mean;
        sq += d * d;
      }
    }
    const double inv_std = 1.0 / std::sqrt(sq / count + eps);
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const std::size_t i = p * channels + c;
        dst[i] = (src[i] - mean) * inv_std * gamma[c] + beta[c];
      }
    }
  }
  return out;
}

Grid activate(Activation kind, const Grid& input) {
  Grid out = input;
  auto v = out.values();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  if (kind == Activation::relu) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = std::max(v[i], 0.0);
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = sigmoid(v[i]);
  }
  return out;
}

Grid upsample2_bilinear(const Grid& input) {
  const int height = input.height();
  const int width = input.width();
  const int channels = input.channels();
  Grid out(2 * height, 2 * width, channels);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out.height(); ++r) {
    const int r0 = r / 2;
    const int r1 = std::min(r0 + 1, height - 1);
    const double ay = (r % 2) * 0.5;
    for (int c = 0; c < out.width(); ++c) {
      const int c0 = c / 2;
      const int c1 = std::min(c0 + 1, width - 1);
      const double ax = (c % 2) * 0.5;
      for (int ch = 0; ch < channels; ++ch) {
        const double top = (1 - ax) * input(r0, c0, ch) + ax * input(r0, c1, ch);
        const double bottom = (1 - ax) * input(r1, c0, ch) + ax * input(r1, c1, ch);
        out(r, c, ch) = (1 - ay) * top + ay * bottom;
      }
    }
  }
  return out;
}

Grid concat_channels(std::span<const Grid* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  int total = 0;
  for (const Grid* g : parts) {
    if (!g->same_spatial(*parts.front())) throw ShapeError("concat_channels: spatial mismatch");
    total += g->channels();
  }
  const Grid& first = *parts.front();
  Grid out(first.height(), first.width(), total);
  for (int r = 0; r < first.height(); ++r) {
    for (int c = 0; c < first.width(); ++c) {
      auto dst = out.pixel(r, c).begin();
      for (const Grid* g : parts) {
        const auto src = g->pixel(r, c);
        dst = std::copy(src.begin(), src.end(), dst);
      }
    }
  }
  return out;
}

Grid resize_bilinear(const Grid& input, int height, int width) {
  if (height == input.height() && width == input.width()) return input;
  Grid out(height, width, input.channels());
  const double sy = static_cast<double>(input.height()) / height;
  const double sx = static_cast<double>(input.width()) / width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, input.height() - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, input.height() - 1);
    const double ay = y - y0;
    for (int c = 0; c < width; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, input.width() - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, input.width() - 1);
      const double ax = x - x0;
      for (int ch = 0; ch < input.channels(); ++ch) {
        const double top = (1 - ax) * input(y0, x0, ch) + ax * input(y0, x1, ch);
        const double bottom = (1 - ax) * input(y1, x0, ch) + ax * input(y1, x1, ch);
        out(r, c, ch) = (1 - ay) * top + ay * bottom;
      }
    }
  }
  return out;
}

Grid resize_nearest(const Grid& input, int height, int width) {
  if (height == input.height() && width == input.width()) return input;
  Grid out(height, width, input.channels());
  for (int r = 0; r < height; ++r) {
    const int sr = std::min(static_cast<int>((r + 0.5) * input.height() / height), input.height() - 1);
    for (int c = 0; c < width; ++c) {
      const int sc = std::min(static_cast<int>((c + 0.5) * input.width() / width), input.width() - 1);
      const auto src = input.pixel(sr, sc);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

}  // namespace fmc
