#include "fmc/reference.hpp"

#include <cmath>

#include "fmc/cluster.hpp"
#include "fmc/error.hpp"

namespace fmc::reference {

Grid conv2d(const Grid& input, const ConvWeights& w) {
  if (input.channels() != w.in_channels) throw ShapeError("reference conv2d: channel mismatch");
  const int half = w.kernel_size / 2;
  Grid out(input.height(), input.width(), w.out_channels);
  for (int co = 0; co < w.out_channels; ++co) {
    for (int r = 0; r < input.height(); ++r) {
      for (int c = 0; c < input.width(); ++c) {
        double acc = w.bias[co];
        for (int ky = 0; ky < w.kernel_size; ++ky) {
          for (int kx = 0; kx < w.kernel_size; ++kx) {
            const int sr = r + ky - half;
            const int sc = c + kx - half;
            if (sr < 0 || sc < 0 || sr >= input.height() || sc >= input.width()) continue;
            for (int ci = 0; ci < w.in_channels; ++ci) acc += input(sr, sc, ci) * w.at(ky, kx, ci, co);
          }
        }
        out(r, c, co) = acc;
      }
    }
  }
  return out;
}

Grid group_norm(const Grid& input, int groups, std::span<const double> gamma, std::span<const double> beta,
                double eps) {
  const int channels = input.channels();
  if (groups < 1 || channels % groups != 0) throw ShapeError("reference group_norm: indivisible channels");
  const int per = channels / groups;
  Grid out(input.height(), input.width(), channels);
  for (int g = 0; g < groups; ++g) {
    double sum = 0.0;
    double count = 0.0;
    for (int r = 0; r < input.height(); ++r)
      for (int c = 0; c < input.width(); ++c)
        for (int ch = g * per; ch < (g + 1) * per; ++ch) {
          sum += input(r, c, ch);
          count += 1.0;
        }
    const double mean = sum / count;
    double var = 0.0;
    for (int r = 0; r < input.height(); ++r)
      for (int c = 0; c < input.width(); ++c)
        for (int ch = g * per; ch < (g + 1) * per; ++ch) var += (input(r, c, ch) - mean) * (input(r, c, ch) - mean);
    var /= count;
    for (int r = 0; r < input.height(); ++r)
      for (int c = 0; c < input.width(); ++c)
        for (int ch = g * per; ch < (g + 1) * per; ++ch)
          out(r, c, ch) = (input(r, c, ch) - mean) / std::sqrt(var + eps) * gamma[ch] + beta[ch];
  }
  return out;
}

LinkMask link_mask(const FlowPair& pair, const Grid& fg_prev, const Grid& fg_cur, int frame) {
  pair.validate();
  if (!fg_prev.same_spatial(fg_cur) || !fg_cur.same_spatial(pair.forward)) {
    throw ShapeError("reference link_mask: size mismatch");
  }
  LinkMask out{Grid(fg_cur.height(), fg_cur.width(), 1), frame};
  for (int r = 0; r < fg_cur.height(); ++r) {
    for (int c = 0; c < fg_cur.width(); ++c) {
      const Vec2 b{pair.backward(r, c, 0), pair.backward(r, c, 1)};
      const double x = c + b[0];
      const double y = r + b[1];
      const bool fg_here = fg_cur(r, c) >= 0.5;
      const bool fg_there = bilinear_sample(fg_prev, x, y)[0] >= 0.5;
      const auto f = bilinear_sample(pair.forward, x, y);
      if (fg_here && fg_there && flow_consistent({f[0], f[1]}, b)) out.grid(r, c) = 1.0;
    }
  }
  return out;
}

Grid warp_g(const Grid& values, const FlowPair& pair, const LinkMask& mask) {
  pair.validate();
  Grid out(values.height(), values.width(), values.channels());
  for (int r = 0; r < values.height(); ++r) {
    for (int c = 0; c < values.width(); ++c) {
      if (mask.grid(r, c) < 0.5) continue;
      const auto v = bilinear_sample(values, c + pair.backward(r, c, 0), r + pair.backward(r, c, 1));
      for (int ch = 0; ch < values.channels(); ++ch) out(r, c, ch) = v[ch];
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> mean_shift_modes(const std::vector<Eigen::VectorXd>& points,
                                              const std::vector<Eigen::VectorXd>& seeds, double kappa,
                                              double tol, int max_iter) {
  std::vector<Eigen::VectorXd> modes;
  for (const auto& seed : seeds) {
    Eigen::VectorXd m = seed;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.size());
      for (const auto& x : points) acc += std::exp(kappa * m.dot(x)) * x;
      const double norm = acc.norm();
      if (norm == 0.0) throw DegenerateError("reference mean shift: zero update");
      Eigen::VectorXd next = acc / norm;
      const double moved = cosine_distance_unchecked(next, m);
      m = next;
      if (moved < tol) break;
    }
    modes.push_back(m);
  }
  return modes;
}

}  // namespace fmc::reference
