#include "fmc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Core>

#include "fmc/error.hpp"

namespace fmc {

namespace {

bool covers(const SceneObject& o, int t, int r, int c) {
  const int x = o.x + t * o.vx;
  const int y = o.y + t * o.vy;
  if (o.shape == ObjectShape::rectangle) return c >= x && c < x + o.width && r >= y && r < y + o.height;
  const int dx = c - x;
  const int dy = r - y;
  return dx * dx + dy * dy <= o.radius * o.radius;
}

std::array<double, 3> parse_color(const std::string& text) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(ss, part, ',')) throw ConfigError("scene: color needs three components: '" + text + "'");
    out[i] = std::stod(part);
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) throw ConfigError("scene: '" + key + "' expects an integer, got '" + value + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

SceneObject parse_object(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  SceneObject o;
  if (kind == "rect") {
    o.shape = ObjectShape::rectangle;
  } else if (kind == "disk") {
    o.shape = ObjectShape::disk;
  } else {
    throw ConfigError("scene: object shape must be rect or disk, got '" + kind + "'");
  }
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("scene: bad object field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "w") o.width = parse_int(key, value);
    else if (key == "h") o.height = parse_int(key, value);
    else if (key == "r") o.radius = parse_int(key, value);
    else if (key == "x") o.x = parse_int(key, value);
    else if (key == "y") o.y = parse_int(key, value);
    else if (key == "vx") o.vx = parse_int(key, value);
    else if (key == "vy") o.vy = parse_int(key, value);
    else if (key == "color") o.color = parse_color(value);
    else throw ConfigError("scene: unknown object field '" + key + "'");
  }
  return o;
}

}  // namespace

void SceneSpec::validate() const {
  if (height < 1 || width < 1) throw ConfigError("scene: frame size must be positive");
  if (frames < 1) throw ConfigError("scene: need at least one frame");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const bool empty = o.shape == ObjectShape::rectangle ? (o.width < 1 || o.height < 1) : o.radius < 0;
    if (empty) throw ConfigError("scene: object " + std::to_string(i + 1) + " has zero area");
  }
  if (objects.size() > 254) throw ConfigError("scene: at most 254 objects");
}

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("scene line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "height") spec.height = parse_int(key, value);
    else if (key == "width") spec.width = parse_int(key, value);
    else if (key == "frames") spec.frames = parse_int(key, value);
    else if (key == "seed") spec.rng_seed = std::stoull(value);
    else if (key == "texture") spec.texture = std::stod(value);
    else if (key == "background") spec.background = parse_color(value);
    else if (key == "object") spec.objects.push_back(parse_object(value));
    else throw ConfigError("scene line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  spec.validate();
  return spec;
}

std::string format_scene_spec(const SceneSpec& spec) {
  std::ostringstream out;
  auto color = [](const std::array<double, 3>& c) {
    std::ostringstream s;
    s << c[0] << "," << c[1] << "," << c[2];
    return s.str();
  };
  out << "height = " << spec.height << "\nwidth = " << spec.width << "\nframes = " << spec.frames
      << "\nseed = " << spec.rng_seed << "\ntexture = " << spec.texture << "\nbackground = " << color(spec.background)
      << "\n";
  for (const auto& o : spec.objects) {
    out << "object = ";
    if (o.shape == ObjectShape::rectangle) {
      out << "rect w=" << o.width << " h=" << o.height;
    } else {
      out << "disk r=" << o.radius;
    }
    out << " x=" << o.x << " y=" << o.y << " vx=" << o.vx << " vy=" << o.vy << " color=" << color(o.color) << "\n";
  }
  return out.str();
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> noise(-spec.texture, spec.texture);

  Scene scene;
  for (int t = 0; t < spec.frames; ++t) {
    Grid labels(spec.height, spec.width, 1);
    Grid rgb(spec.height, spec.width, 3);
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        int id = 0;
        for (std::size_t k = 0; k < spec.objects.size(); ++k) {
          if (covers(spec.objects[k], t, r, c)) id = static_cast<int>(k) + 1;
        }
        labels(r, c) = id;
        const auto& base = id == 0 ? spec.background : spec.objects[id - 1].color;
        for (int ch = 0; ch < 3; ++ch) rgb(r, c, ch) = std::clamp(base[ch] + noise(rng), 0.0, 1.0);
      }
    }
    Grid mask(spec.height, spec.width, 1);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.values()[i] = labels.values()[i] > 0 ? 1.0 : 0.0;
    scene.rgb.push_back(std::move(rgb));
    scene.masks.push_back(std::move(mask));
    scene.labels.push_back(std::move(labels));
  }

  auto velocity_field = [&](const Grid& labels, double sign) {
    Grid flow(spec.height, spec.width, 2);
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        const int id = static_cast<int>(labels(r, c));
        if (id == 0) continue;
        flow(r, c, 0) = sign * spec.objects[id - 1].vx;
        flow(r, c, 1) = sign * spec.objects[id - 1].vy;
      }
    }
    return flow;
  };
  for (int t = 0; t + 1 < spec.frames; ++t) {
    scene.pairs.push_back({velocity_field(scene.labels[t], 1.0), velocity_field(scene.labels[t + 1], -1.0)});
  }
  return scene;
}

std::vector<Grid> oracle_embeddings(const std::vector<Grid>& labels, int channels, double noise_deg,
                                    std::uint64_t seed) {
  if (channels < 2) throw ConfigError("oracle embeddings: need at least 2 channels");
  if (noise_deg < 0.0 || noise_deg > 90.0) throw ConfigError("oracle embeddings: noise angle must lie in [0, 90]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double max_angle = noise_deg * std::numbers::pi / 180.0;

  std::vector<Grid> out;
  for (const auto& frame : labels) {
    Grid emb(frame.height(), frame.width(), channels);
    for (int r = 0; r < frame.height(); ++r) {
      for (int c = 0; c < frame.width(); ++c) {
        const int id = static_cast<int>(std::lround(frame(r, c)));
        if (id < 0 || id > channels - 1) {
          throw ConfigError("oracle embeddings: object id " + std::to_string(id) + " does not fit in " +
                            std::to_string(channels) + " channels (one is reserved for background)");
        }
        const int axis = id == 0 ? channels - 1 : id - 1;
        auto px = emb.pixel(r, c);
        if (max_angle == 0.0) {
          px[axis] = 1.0;
          continue;
        }
        // Uniform random direction orthogonal to the axis.
        Eigen::VectorXd dir(channels);
        for (int ch = 0; ch < channels; ++ch) dir[ch] = gauss(rng);
        dir[axis] = 0.0;
        const double norm = dir.norm();
        const double angle = max_angle * unit(rng);
        for (int ch = 0; ch < channels; ++ch) px[ch] = norm > 0.0 ? std::sin(angle) * dir[ch] / norm : 0.0;
        px[axis] = std::cos(angle);
      }
    }
    out.push_back(std::move(emb));
  }
  return out;
}

}  // namespace fmc
