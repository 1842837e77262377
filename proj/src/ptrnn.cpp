#include "fmc/ptrnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fmc/error.hpp"

namespace fmc {

namespace {

constexpr double kDegenerateNorm = 1e-12;

std::vector<double> to_row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, int rows, int cols) {
  if (v.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("ptrnn: matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r) * cols + c];
  return m;
}

Eigen::MatrixXd read_matrix(const io::ParamSet& params, const std::string& name, int rows, int cols) {
  const auto& shape = params.shape(name);
  if (shape != std::vector<int>{rows, cols}) throw ShapeError("ptrnn: '" + name + "' has the wrong shape");
  return from_row_major(params.get_double(name), rows, cols);
}

ConvWeights read_kernel(const io::ParamSet& params, const std::string& name, int cin, int cout) {
  if (params.shape(name) != std::vector<int>{3, 3, cin, cout}) {
    throw ShapeError("ptrnn: '" + name + "' must be 3x3x" + std::to_string(cin) + "x" + std::to_string(cout));
  }
  ConvWeights w(3, cin, cout);
  w.kernel = params.get_double(name);
  return w;
}

void write_kernel(io::ParamSet& params, const std::string& name, const ConvWeights& w) {
  params.add(name, {w.kernel_size, w.kernel_size, w.in_channels, w.out_channels}, w.kernel);
}

Grid multiply(const Grid& a, const Grid& b) {
  Grid out = a;
  auto o = out.values();
  const auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= v[i];
  return out;
}

Grid ratio_map(const Grid& h, const Grid& weight) {
  Grid out(h.height(), h.width(), h.channels());
  auto o = out.values();
  const auto hv = h.values();
  const auto wv = weight.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = wv[i] > 0.0 ? hv[i] / wv[i] : 0.0;
  return out;
}

std::optional<TrajectoryEmbedding> emit(const PtrnnState& state, int r, int c, const PtrnnParams& params) {
  const int channels = state.h.channels();
  TrajectoryEmbedding e;
  e.raw.resize(channels);
  for (int ch = 0; ch < channels; ++ch) {
    const double w = state.weight(r, c, ch);
    e.raw[ch] = w > 0.0 ? state.h(r, c, ch) / w : 0.0;
  }
  const double length = state.stats(r, c, kLength);
  e.length = static_cast<int>(std::lround(length));
  e.stats = scm_stats(state.stats(r, c, kSumX) / length, state.stats(r, c, kSumY) / length,
                      state.stats(r, c, kCurX) - state.stats(r, c, kStartX),
                      state.stats(r, c, kCurY) - state.stats(r, c, kStartY), state.h.height(), state.h.width());
  e.end_frame = state.frame;
  e.end_row = r;
  e.end_col = c;
  e.track = state.track[static_cast<std::size_t>(r) * state.h.width() + c];
  Vector v = scm_apply(e.raw, e.stats, params.scm);
  const double norm = v.norm();
  if (!(norm > kDegenerateNorm)) return std::nullopt;
  e.embedding = v / norm;
  return e;
}

void emit_into(TrajectoryEmbeddingSet& out, const PtrnnState& state, int r, int c, const PtrnnParams& params) {
  if (auto e = emit(state, r, c, params)) {
    out.entries.push_back(std::move(*e));
  } else {
    out.rejected.push_back({state.frame, r, c, state.track[static_cast<std::size_t>(r) * state.h.width() + c]});
  }
}

void check_inputs(const Grid& x, const Grid& m, const PtrnnParams& params) {
  if (x.channels() != params.channels) {
    throw ShapeError("ptrnn: embeddings have " + std::to_string(x.channels()) + " channels, parameters expect " +
                     std::to_string(params.channels));
  }
  if (m.channels() != 1 || !m.same_spatial(x)) throw ShapeError("ptrnn: foreground mask does not match embeddings");
}

// Shared tail of init and step: weights from (ratio, x), then the hidden
// state update on foreground pixels. `warped_*` are zero grids at init.
void update(PtrnnState& state, const Grid& xt, const Grid& mt, const PtrnnParams& params, Grid warped_h,
            Grid warped_w, Grid warped_stats, Grid warped_memory, const FlowPair* pair, const LinkMask* link) {
  const int height = xt.height();
  const int width = xt.width();
  const int channels = xt.channels();

  const Grid ratio = ratio_map(warped_h, warped_w);
  Grid memory = std::move(warped_memory);
  const Grid w = ptrnn_weights(ratio, xt, memory, params);

  std::vector<std::int64_t> track(static_cast<std::size_t>(height) * width, -1);
  std::vector<char> taken(track.size(), 0);

  state.h = std::move(warped_h);
  state.weight = std::move(warped_w);
  state.stats = std::move(warped_stats);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * width + c;
      auto h = state.h.pixel(r, c);
      auto wsum = state.weight.pixel(r, c);
      auto st = state.stats.pixel(r, c);
      if (mt(r, c) < 0.5) {
        std::fill(h.begin(), h.end(), 0.0);
        std::fill(wsum.begin(), wsum.end(), 0.0);
        std::fill(st.begin(), st.end(), 0.0);
        if (!memory.empty()) {
          auto mem = memory.pixel(r, c);
          std::fill(mem.begin(), mem.end(), 0.0);
        }
        continue;
      }
      const auto x = xt.pixel(r, c);
      const auto wt = w.pixel(r, c);
      for (int ch = 0; ch < channels; ++ch) {
        h[ch] += wt[ch] * x[ch];
        wsum[ch] += wt[ch];
      }
      const bool linked = link != nullptr && link->grid(r, c) >= 0.5;
      if (linked) {
        st[kSumX] += c;
        st[kSumY] += r;
        st[kLength] += 1.0;
      } else {
        st[kStartX] = st[kSumX] = c;
        st[kStartY] = st[kSumY] = r;
        st[kLength] = 1.0;
      }
      st[kCurX] = c;
      st[kCurY] = r;

      std::int64_t id = -1;
      if (linked) {
        if (const auto src = rounded_source(pair->backward, r, c)) {
          const std::size_t s = static_cast<std::size_t>((*src)[0]) * width + (*src)[1];
          if (state.track[s] >= 0 && !taken[s]) {
            taken[s] = 1;
            id = state.track[s];
          }
        }
      }
      track[p] = id >= 0 ? id : state.next_track++;
    }
  }
  state.memory = std::move(memory);
  state.track = std::move(track);
  state.fg = mt;
}

}  // namespace

PtrnnVariant parse_variant(const std::string& name) {
  if (name == "standard") return PtrnnVariant::standard;
  if (name == "conv") return PtrnnVariant::conv;
  if (name == "convGRU" || name == "convgru" || name == "conv_gru") return PtrnnVariant::conv_gru;
  throw ConfigError("unknown PT-RNN variant '" + name + "' (expected standard, conv or convGRU)");
}

std::string variant_name(PtrnnVariant v) {
  switch (v) {
    case PtrnnVariant::standard: return "standard";
    case PtrnnVariant::conv: return "conv";
    case PtrnnVariant::conv_gru: return "convGRU";
  }
  return "conv";
}

ScmParams ScmParams::zeros(int channels) {
  return {Eigen::MatrixXd::Zero(channels, 4), Eigen::VectorXd::Zero(channels),
          Eigen::MatrixXd::Zero(channels, channels), Eigen::VectorXd::Zero(channels)};
}

PtrnnParams PtrnnParams::zeros(PtrnnVariant variant, int channels) {
  if (channels < 1) throw ShapeError("ptrnn: channels must be positive");
  PtrnnParams p;
  p.variant = variant;
  p.channels = channels;
  switch (variant) {
    case PtrnnVariant::standard:
      p.std_hidden = Eigen::MatrixXd::Zero(channels, 2 * channels);
      p.std_out = Eigen::RowVectorXd::Zero(channels);
      break;
    case PtrnnVariant::conv:
      p.conv_c = ConvWeights(3, 2 * channels, channels);
      p.conv_w = ConvWeights(3, channels, channels);
      break;
    case PtrnnVariant::conv_gru:
      p.conv_z = ConvWeights(3, 2 * channels, channels);
      p.conv_r = ConvWeights(3, 2 * channels, channels);
      p.conv_cand = ConvWeights(3, 2 * channels, channels);
      p.conv_w = ConvWeights(3, channels, channels);
      break;
  }
  p.scm = ScmParams::zeros(channels);
  return p;
}

PtrnnParams PtrnnParams::random(PtrnnVariant variant, int channels, std::uint64_t seed, double scale) {
  PtrnnParams p = zeros(variant, channels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  auto fill = [&](auto& container) {
    for (auto& v : container) v = dist(rng);
  };
  auto fill_matrix = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  fill_matrix(p.std_hidden);
  fill_matrix(p.std_out);
  fill(p.conv_c.kernel);
  fill(p.conv_w.kernel);
  fill(p.conv_z.kernel);
  fill(p.conv_r.kernel);
  fill(p.conv_cand.kernel);
  fill_matrix(p.scm.fc1);
  fill_matrix(p.scm.b1);
  fill_matrix(p.scm.fc2);
  fill_matrix(p.scm.b2);
  return p;
}

PtrnnParams PtrnnParams::from_params(const io::ParamSet& params) {
  const auto& scm_shape = params.shape("scm.fc1.weight");
  if (scm_shape.size() != 2 || scm_shape[1] != 4) throw ShapeError("scm: fc1 must be C x 4");
  const int channels = scm_shape[0];

  PtrnnVariant variant = PtrnnVariant::conv;
  if (params.contains("ptrnn.std.hidden")) {
    variant = PtrnnVariant::standard;
  } else if (params.contains("ptrnn.conv_z.weight")) {
    variant = PtrnnVariant::conv_gru;
  }
  PtrnnParams p = zeros(variant, channels);
  const int c = channels;
  switch (variant) {
    case PtrnnVariant::standard:
      p.std_hidden = read_matrix(params, "ptrnn.std.hidden", c, 2 * c);
      p.std_out = read_matrix(params, "ptrnn.std.out", 1, c);
      break;
    case PtrnnVariant::conv:
      p.conv_c = read_kernel(params, "ptrnn.conv_c.weight", 2 * c, c);
      p.conv_w = read_kernel(params, "ptrnn.conv_w.weight", c, c);
      break;
    case PtrnnVariant::conv_gru:
      p.conv_z = read_kernel(params, "ptrnn.conv_z.weight", 2 * c, c);
      p.conv_r = read_kernel(params, "ptrnn.conv_r.weight", 2 * c, c);
      p.conv_cand = read_kernel(params, "ptrnn.conv_cand.weight", 2 * c, c);
      p.conv_w = read_kernel(params, "ptrnn.conv_w.weight", c, c);
      break;
  }
  p.scm.fc1 = read_matrix(params, "scm.fc1.weight", c, 4);
  p.scm.b1 = read_matrix(params, "scm.fc1.bias", 1, c).transpose();
  p.scm.fc2 = read_matrix(params, "scm.fc2.weight", c, c);
  p.scm.b2 = read_matrix(params, "scm.fc2.bias", 1, c).transpose();
  return p;
}

void PtrnnParams::to_params(io::ParamSet& params) const {
  const int c = channels;
  switch (variant) {
    case PtrnnVariant::standard:
      params.add("ptrnn.std.hidden", {c, 2 * c}, to_row_major(std_hidden));
      params.add("ptrnn.std.out", {1, c}, to_row_major(std_out));
      break;
    case PtrnnVariant::conv:
      write_kernel(params, "ptrnn.conv_c.weight", conv_c);
      write_kernel(params, "ptrnn.conv_w.weight", conv_w);
      break;
    case PtrnnVariant::conv_gru:
      write_kernel(params, "ptrnn.conv_z.weight", conv_z);
      write_kernel(params, "ptrnn.conv_r.weight", conv_r);
      write_kernel(params, "ptrnn.conv_cand.weight", conv_cand);
      write_kernel(params, "ptrnn.conv_w.weight", conv_w);
      break;
  }
  params.add("scm.fc1.weight", {c, 4}, to_row_major(scm.fc1));
  params.add("scm.fc1.bias", {1, c}, to_row_major(scm.b1.transpose()));
  params.add("scm.fc2.weight", {c, c}, to_row_major(scm.fc2));
  params.add("scm.fc2.bias", {1, c}, to_row_major(scm.b2.transpose()));
}

void TrajectoryEmbeddingSet::append(TrajectoryEmbeddingSet&& other) {
  entries.insert(entries.end(), std::make_move_iterator(other.entries.begin()),
                 std::make_move_iterator(other.entries.end()));
  rejected.insert(rejected.end(), other.rejected.begin(), other.rejected.end());
}

Grid ptrnn_weights(const Grid& ratio, const Grid& x, Grid& memory, const PtrnnParams& params) {
  const int channels = params.channels;
  if (params.forced_weight) {
    return Grid(x.height(), x.width(), channels, *params.forced_weight);
  }
  const Grid* parts[] = {&ratio, &x};
  switch (params.variant) {
    case PtrnnVariant::standard: {
      Grid w(x.height(), x.width(), channels);
#pragma omp parallel for schedule(static)
      for (int r = 0; r < x.height(); ++r) {
        Eigen::VectorXd in(2 * channels);
        for (int c = 0; c < x.width(); ++c) {
          for (int ch = 0; ch < channels; ++ch) {
            in[ch] = ratio(r, c, ch);
            in[channels + ch] = x(r, c, ch);
          }
          const Eigen::VectorXd hidden = (params.std_hidden * in).cwiseMax(0.0);
          const double weight = sigmoid(params.std_out.dot(hidden));
          auto out = w.pixel(r, c);
          std::fill(out.begin(), out.end(), weight);
        }
      }
      return w;
    }
    case PtrnnVariant::conv: {
      const Grid hidden = activate(Activation::relu, conv2d(concat_channels(parts), params.conv_c));
      return activate(Activation::sigmoid, conv2d(hidden, params.conv_w));
    }
    case PtrnnVariant::conv_gru: {
      const Grid joined = concat_channels(parts);
      const Grid z = activate(Activation::sigmoid, conv2d(joined, params.conv_z));
      const Grid reset = activate(Activation::sigmoid, conv2d(joined, params.conv_r));
      const Grid gated = multiply(reset, ratio);
      const Grid* cand_parts[] = {&gated, &x};
      const Grid cand = activate(Activation::relu, conv2d(concat_channels(cand_parts), params.conv_cand));
      if (memory.empty()) memory = Grid(x.height(), x.width(), channels);
      auto m = memory.values();
      const auto zv = z.values();
      const auto cv = cand.values();
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - zv[i]) * m[i] + zv[i] * cv[i];
      return activate(Activation::sigmoid, conv2d(memory, params.conv_w));
    }
  }
  throw ConfigError("ptrnn: unknown variant");
}

PtrnnState ptrnn_init(const Grid& x1, const Grid& m1, const PtrnnParams& params) {
  check_inputs(x1, m1, params);
  PtrnnState state;
  const int height = x1.height();
  const int width = x1.width();
  state.track.assign(static_cast<std::size_t>(height) * width, -1);
  Grid memory = params.variant == PtrnnVariant::conv_gru ? Grid(height, width, params.channels) : Grid();
  update(state, x1, m1, params, Grid(height, width, params.channels), Grid(height, width, params.channels),
         Grid(height, width, kStatCount), std::move(memory), nullptr, nullptr);
  state.frame = 0;
  return state;
}

TrajectoryEmbeddingSet ptrnn_step(PtrnnState& state, const Grid& xt, const FlowPair& pair, const LinkMask& link,
                                  const Grid& mt, const PtrnnParams& params) {
  check_inputs(xt, mt, params);
  pair.validate();
  if (!xt.same_spatial(state.h) || !pair.backward.same_spatial(xt) || !link.grid.same_spatial(xt)) {
    throw ShapeError("ptrnn_step: state, embeddings, flow and link sizes differ");
  }
  const int height = xt.height();
  const int width = xt.width();

  // Sources that some linked target continues from.
  std::vector<char> claimed(static_cast<std::size_t>(height) * width, 0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (link.grid(r, c) < 0.5) continue;
      if (const auto src = rounded_source(pair.backward, r, c)) {
        claimed[static_cast<std::size_t>((*src)[0]) * width + (*src)[1]] = 1;
      }
    }
  }
  TrajectoryEmbeddingSet ended;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (state.live(r, c) && !claimed[static_cast<std::size_t>(r) * width + c]) emit_into(ended, state, r, c, params);
    }
  }

  Grid warped_memory = state.memory.empty() ? Grid() : warp_g(state.memory, pair, link);
  update(state, xt, mt, params, warp_g(state.h, pair, link), warp_g(state.weight, pair, link),
         warp_g(state.stats, pair, link), std::move(warped_memory), &pair, &link);
  state.frame += 1;
  return ended;
}

std::array<double, 4> scm_stats(double mean_x, double mean_y, double dx, double dy, int height, int width) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double hx = std::max(cx, 0.5);
  const double hy = std::max(cy, 0.5);
  return {(mean_x - cx) / hx, (mean_y - cy) / hy, dx / (2.0 * hx), dy / (2.0 * hy)};
}

Vector scm_apply(const Vector& raw, const std::array<double, 4>& stats, const ScmParams& scm) {
  if (scm.fc1.rows() != raw.size()) throw ShapeError("scm: channel mismatch");
  const Eigen::Vector4d s(stats[0], stats[1], stats[2], stats[3]);
  const Vector hidden = (scm.fc1 * s + scm.b1).cwiseMax(0.0);
  return raw + scm.fc2 * hidden + scm.b2;
}

TrajectoryEmbeddingSet finalize_all(const PtrnnState& state, const PtrnnParams& params) {
  TrajectoryEmbeddingSet out;
  if (state.h.empty()) return out;
  for (int r = 0; r < state.h.height(); ++r) {
    for (int c = 0; c < state.h.width(); ++c) {
      if (state.live(r, c)) emit_into(out, state, r, c, params);
    }
  }
  return out;
}

}  // namespace fmc
