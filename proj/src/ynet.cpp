#include "fmc/ynet.hpp"

#include <cmath>
#include <random>

#include "fmc/error.hpp"

namespace fmc {

namespace {

ConvGnLayer make_layer(int cin, int cout) {
  ConvGnLayer layer;
  layer.conv = ConvWeights(3, cin, cout);
  layer.gamma.assign(cout, 0.0);
  layer.beta.assign(cout, 0.0);
  return layer;
}

ConvBlock make_block(int cin, int cout) { return {make_layer(cin, cout), make_layer(cout, cout)}; }

int decoder_input_channels(const YNetSchedule& s, int block) {
  const int from_below = block == 3 ? 2 * s.block_channels[3] : s.block_channels[block + 1];
  return from_below + 2 * s.block_channels[block];
}

template <typename Fn>
void for_each_layer(YNetParams& p, Fn&& fn) {
  const char* names[3] = {"rgb", "flow", "dec"};
  std::array<ConvBlock, 4>* groups[3] = {&p.rgb_encoder, &p.flow_encoder, &p.decoder};
  for (int g = 0; g < 3; ++g) {
    for (int b = 0; b < 4; ++b) {
      const std::string base = std::string("ynet.") + names[g] + ".b" + std::to_string(b);
      fn(base + ".conv0", (*groups[g])[b].first);
      fn(base + ".conv1", (*groups[g])[b].second);
    }
  }
}

std::vector<int> conv_shape(const ConvWeights& w) {
  return {w.kernel_size, w.kernel_size, w.in_channels, w.out_channels};
}

ConvWeights read_conv(const io::ParamSet& params, const std::string& name) {
  const auto& shape = params.shape(name + ".weight");
  if (shape.size() != 4 || shape[0] != shape[1]) throw ShapeError("ynet: '" + name + "' is not a square conv kernel");
  ConvWeights w(shape[0], shape[2], shape[3]);
  w.kernel = params.get_double(name + ".weight");
  w.bias = params.get_double(name + ".bias");
  if (static_cast<int>(w.bias.size()) != w.out_channels) throw ShapeError("ynet: '" + name + "' bias size");
  return w;
}

void write_conv(io::ParamSet& params, const std::string& name, const ConvWeights& w) {
  params.add(name + ".weight", conv_shape(w), w.kernel);
  params.add(name + ".bias", {w.out_channels}, w.bias);
}

}  // namespace

Grid ConvGnLayer::apply(const Grid& input) const {
  const Grid conv_out = conv2d(input, conv);
  const Grid normed = group_norm(conv_out, default_group_count(conv.out_channels), gamma, beta, 1e-5);
  return activate(Activation::relu, normed);
}

YNetParams YNetParams::zeros(const YNetSchedule& s) {
  YNetParams p;
  p.schedule = s;
  const auto& ch = s.block_channels;
  for (int b = 0; b < 4; ++b) {
    if (ch[b] < 1) throw ShapeError("ynet: channel schedule entries must be positive");
    const int in_enc = b == 0 ? -1 : ch[b - 1];
    p.rgb_encoder[b] = make_block(b == 0 ? 3 : in_enc, ch[b]);
    p.flow_encoder[b] = make_block(b == 0 ? 2 : in_enc, ch[b]);
    p.decoder[b] = make_block(decoder_input_channels(s, b), ch[b]);
  }
  if (s.embedding_channels < 1) throw ShapeError("ynet: embedding channels must be positive");
  p.embed_head = ConvWeights(1, ch[0], s.embedding_channels);
  p.fg_head = ConvWeights(1, s.embedding_channels, 1);
  return p;
}

YNetParams YNetParams::random(const YNetSchedule& s, std::uint64_t seed) {
  YNetParams p = zeros(s);
  std::mt19937_64 rng(seed);
  auto fill = [&](ConvWeights& w) {
    const double fan_in = static_cast<double>(w.kernel_size * w.kernel_size * w.in_channels);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : w.kernel) v = dist(rng);
  };
  for_each_layer(p, [&](const std::string&, ConvGnLayer& layer) {
    fill(layer.conv);
    std::fill(layer.gamma.begin(), layer.gamma.end(), 1.0);
  });
  fill(p.embed_head);
  fill(p.fg_head);
  return p;
}

YNetParams YNetParams::from_params(const io::ParamSet& params) {
  YNetSchedule s;
  for (int b = 0; b < 4; ++b) {
    const auto& shape = params.shape("ynet.rgb.b" + std::to_string(b) + ".conv0.weight");
    if (shape.size() != 4) throw ShapeError("ynet: malformed encoder kernel shape");
    s.block_channels[b] = shape[3];
  }
  const auto& embed_shape = params.shape("ynet.embed.weight");
  if (embed_shape.size() != 4) throw ShapeError("ynet: malformed embedding head shape");
  s.embedding_channels = embed_shape[3];

  YNetParams p = zeros(s);
  for_each_layer(p, [&](const std::string& name, ConvGnLayer& layer) {
    ConvWeights w = read_conv(params, name);
    if (w.kernel_size != layer.conv.kernel_size || w.in_channels != layer.conv.in_channels ||
        w.out_channels != layer.conv.out_channels) {
      throw ShapeError("ynet: '" + name + "' does not match the channel schedule");
    }
    layer.conv = std::move(w);
    layer.gamma = params.get_double(name + ".gamma");
    layer.beta = params.get_double(name + ".beta");
    if (static_cast<int>(layer.gamma.size()) != layer.conv.out_channels ||
        static_cast<int>(layer.beta.size()) != layer.conv.out_channels) {
      throw ShapeError("ynet: '" + name + "' groupnorm size");
    }
  });
  p.embed_head = read_conv(params, "ynet.embed");
  p.fg_head = read_conv(params, "ynet.fg");
  if (p.embed_head.in_channels != s.block_channels[0] || p.embed_head.kernel_size != 1 ||
      p.fg_head.in_channels != s.embedding_channels || p.fg_head.out_channels != 1 || p.fg_head.kernel_size != 1) {
    throw ShapeError("ynet: head shapes do not match the channel schedule");
  }
  return p;
}

void YNetParams::to_params(io::ParamSet& params) const {
  YNetParams copy = *this;
  for_each_layer(copy, [&](const std::string& name, ConvGnLayer& layer) {
    write_conv(params, name, layer.conv);
    params.add(name + ".gamma", {layer.conv.out_channels}, layer.gamma);
    params.add(name + ".beta", {layer.conv.out_channels}, layer.beta);
  });
  write_conv(params, "ynet.embed", embed_head);
  write_conv(params, "ynet.fg", fg_head);
}

Grid ynet_forward(const Grid& rgb, const Grid& flow, const YNetParams& p) {
  if (rgb.channels() != 3 || flow.channels() != 2) throw ShapeError("ynet: expected 3-channel rgb and 2-channel flow");
  if (!rgb.same_spatial(flow)) throw ShapeError("ynet: rgb and flow sizes differ");
  if (rgb.height() % 16 != 0 || rgb.width() % 16 != 0) {
    throw ShapeError("ynet: height and width must be multiples of 16, got " + std::to_string(rgb.height()) + "x" +
                     std::to_string(rgb.width()));
  }

  std::array<Grid, 4> rgb_skip, flow_skip;
  Grid rgb_x = rgb;
  Grid flow_x = flow;
  for (int b = 0; b < 4; ++b) {
    rgb_skip[b] = p.rgb_encoder[b].apply(rgb_x);
    flow_skip[b] = p.flow_encoder[b].apply(flow_x);
    rgb_x = maxpool2(rgb_skip[b]);
    flow_x = maxpool2(flow_skip[b]);
  }

  const Grid* fused_parts[] = {&rgb_x, &flow_x};
  Grid x = concat_channels(fused_parts);
  for (int b = 3; b >= 0; --b) {
    const Grid up = upsample2_bilinear(x);
    const Grid* parts[] = {&up, &rgb_skip[b], &flow_skip[b]};
    x = p.decoder[b].apply(concat_channels(parts));
  }
  return conv2d(x, p.embed_head);
}

ForegroundMask foreground_predict(const Grid& embeddings, const ConvWeights& fg_head) {
  if (fg_head.out_channels != 1) throw ShapeError("foreground head must produce one channel");
  ForegroundMask out;
  out.logits = conv2d(embeddings, fg_head);
  out.mask = Grid(out.logits.height(), out.logits.width(), 1);
  auto logits = out.logits.values();
  auto mask = out.mask.values();
  for (std::size_t i = 0; i < logits.size(); ++i) mask[i] = logits[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

}  // namespace fmc
