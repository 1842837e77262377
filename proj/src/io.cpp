#include "fmc/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "fmc/error.hpp"

namespace fmc::io {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const Bytes& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
float get_f32(const Bytes& in, std::size_t offset) { return std::bit_cast<float>(get_u32(in, offset)); }

// Reads whitespace-separated header tokens of a netpbm file, skipping comments.
class HeaderReader {
 public:
  explicit HeaderReader(const Bytes& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) tok.push_back(static_cast<char>(bytes_[pos_++]));
    if (tok.empty()) throw FormatError("pnm: truncated header");
    return tok;
  }

  int integer() {
    const std::string tok = token();
    if (!std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }) ||
        tok.size() > 9) {
      throw FormatError("pnm: bad header field '" + tok + "'");
    }
    return std::stoi(tok);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("pnm: truncated header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const Bytes& bytes_;
  std::size_t pos_ = 0;
};

bool valid_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' || ch == '-';
  });
}

std::vector<int> parse_shape(const std::string& text) {
  std::vector<int> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty() || part.size() > 9 ||
        !std::all_of(part.begin(), part.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      throw FormatError("params: bad shape '" + text + "'");
    }
    shape.push_back(std::stoi(part));
  }
  if (shape.empty()) throw FormatError("params: empty shape");
  return shape;
}

constexpr const char* kParamsHeader = "fmc-params";
constexpr const char* kParamsSeparator = "---";

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Bytes encode_flo(const Grid& flow) {
  if (flow.channels() != 2) throw ShapeError("flo: flow grid must have 2 channels");
  Bytes out;
  out.reserve(12 + flow.size() * 4);
  put_f32(out, kFloMagic);
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (double v : flow.values()) put_f32(out, static_cast<float>(v));
  return out;
}

Grid decode_flo(const Bytes& bytes) {
  if (bytes.size() < 12) throw FormatError("flo: stream shorter than header");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "PIEH")) throw FormatError("flo: bad magic");
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width < 1 || height < 1 || width > (1 << 16) || height > (1 << 16)) {
    throw FormatError("flo: implausible dimensions");
  }
  const std::size_t expected = 12 + static_cast<std::size_t>(width) * height * 8;
  if (bytes.size() != expected) {
    throw FormatError("flo: payload is " + std::to_string(bytes.size() - 12) + " bytes, expected " +
                      std::to_string(expected - 12));
  }
  Grid flow(height, width, 2);
  auto v = flow.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = get_f32(bytes, 12 + 4 * i);
    if (!std::isfinite(f)) throw FormatError("flo: non-finite flow value");
    v[i] = f;
  }
  return flow;
}

void write_flo(const std::filesystem::path& path, const Grid& flow) { write_file(path, encode_flo(flow)); }

Grid read_flo(const std::filesystem::path& path) {
  try {
    return decode_flo(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Bytes encode_pgm(const Grid& mask) {
  if (mask.channels() != 1) throw ShapeError("pgm: mask grid must have 1 channel");
  const std::string header =
      "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + mask.size());
  for (double v : mask.values()) {
    if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
      throw RangeError("pgm: value " + std::to_string(v) + " is not an integer in [0, 255]");
    }
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

Grid decode_pgm(const Bytes& bytes) {
  HeaderReader header(bytes);
  if (header.token() != "P5") throw FormatError("pgm: not a binary PGM (P5)");
  const int width = header.integer();
  const int height = header.integer();
  const int maxval = header.integer();
  if (width < 1 || height < 1) throw FormatError("pgm: bad dimensions");
  if (maxval < 1 || maxval > 255) throw FormatError("pgm: maxval " + std::to_string(maxval) + " unsupported");
  const std::size_t start = header.raster_start();
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - start != count) throw FormatError("pgm: raster size mismatch");
  Grid mask(height, width, 1);
  auto v = mask.values();
  for (std::size_t i = 0; i < count; ++i) v[i] = bytes[start + i];
  return mask;
}

void write_pgm(const std::filesystem::path& path, const Grid& mask) { write_file(path, encode_pgm(mask)); }

Grid read_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Grid read_rgb_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  HeaderReader header(bytes);
  const std::string magic = header.token();
  if (magic != "P5" && magic != "P6") throw FormatError(path.string() + ": expected P5 or P6 image");
  const int width = header.integer();
  const int height = header.integer();
  const int maxval = header.integer();
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) throw FormatError(path.string() + ": bad header");
  const std::size_t start = header.raster_start();
  const int samples = magic == "P6" ? 3 : 1;
  if (bytes.size() - start != static_cast<std::size_t>(width) * height * samples) {
    throw FormatError(path.string() + ": raster size mismatch");
  }
  Grid rgb(height, width, 3);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t p = start + (static_cast<std::size_t>(r) * width + c) * samples;
      for (int ch = 0; ch < 3; ++ch) rgb(r, c, ch) = bytes[p + (samples == 3 ? ch : 0)] / double(maxval);
    }
  }
  return rgb;
}

Grid mask_to_pgm_values(const Grid& binary) {
  Grid out = binary;
  for (double& v : out.values()) v = v > 0.5 ? 255.0 : 0.0;
  return out;
}

Grid pgm_values_to_mask(const Grid& pgm) {
  Grid out = pgm;
  for (double& v : out.values()) v = v > 0.0 ? 1.0 : 0.0;
  return out;
}

std::size_t ParamEntry::element_count() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void ParamManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!valid_name(e.name)) throw FormatError("params: invalid tensor name '" + e.name + "'");
    if (!seen.insert(e.name).second) throw FormatError("params: duplicate tensor name '" + e.name + "'");
    if (e.shape.empty() || std::any_of(e.shape.begin(), e.shape.end(), [](int d) { return d < 1; })) {
      throw FormatError("params: tensor '" + e.name + "' has a non-positive dimension");
    }
  }
}

void ParamSet::add(const std::string& name, std::vector<int> shape, std::vector<float> values) {
  ParamEntry entry{name, std::move(shape)};
  ParamManifest next = manifest_;
  next.entries.push_back(entry);
  next.validate();
  if (entry.element_count() != values.size()) {
    throw ShapeError("params: tensor '" + name + "' expects " + std::to_string(entry.element_count()) +
                     " values, got " + std::to_string(values.size()));
  }
  manifest_ = std::move(next);
  blobs_.emplace(name, std::move(values));
}

void ParamSet::add(const std::string& name, std::vector<int> shape, const std::vector<double>& values) {
  add(name, std::move(shape), std::vector<float>(values.begin(), values.end()));
}

const std::vector<float>& ParamSet::get(const std::string& name) const {
  const auto it = blobs_.find(name);
  if (it == blobs_.end()) throw LookupError("params: no tensor named '" + name + "'");
  return it->second;
}

std::vector<double> ParamSet::get_double(const std::string& name) const {
  const auto& f = get(name);
  return {f.begin(), f.end()};
}

const std::vector<int>& ParamSet::shape(const std::string& name) const {
  for (const auto& e : manifest_.entries) {
    if (e.name == name) return e.shape;
  }
  throw LookupError("params: no tensor named '" + name + "'");
}

Bytes encode_params(const ParamManifest& manifest, const std::map<std::string, std::vector<float>>& blobs) {
  manifest.validate();
  if (blobs.size() != manifest.entries.size()) {
    throw FormatError("params: " + std::to_string(blobs.size()) + " blobs for " +
                      std::to_string(manifest.entries.size()) + " manifest entries");
  }
  std::string text = std::string(kParamsHeader) + " " + std::to_string(manifest.version) + "\n";
  for (const auto& e : manifest.entries) {
    text += e.name + " ";
    for (std::size_t i = 0; i < e.shape.size(); ++i) {
      if (i) text += ",";
      text += std::to_string(e.shape[i]);
    }
    text += "\n";
  }
  text += std::string(kParamsSeparator) + "\n";
  Bytes out(text.begin(), text.end());
  for (const auto& e : manifest.entries) {
    const auto it = blobs.find(e.name);
    if (it == blobs.end()) throw LookupError("params: missing blob for '" + e.name + "'");
    if (it->second.size() != e.element_count()) {
      throw FormatError("params: blob '" + e.name + "' has " + std::to_string(it->second.size()) +
                        " values, manifest declares " + std::to_string(e.element_count()));
    }
    for (float f : it->second) put_f32(out, f);
  }
  return out;
}

Bytes ParamSet::encode() const { return encode_params(manifest_, blobs_); }

ParamSet ParamSet::decode(const Bytes& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(pos);
    const auto nl = std::find(begin, bytes.end(), static_cast<std::uint8_t>('\n'));
    if (nl == bytes.end()) throw FormatError("params: manifest is not terminated");
    std::string line(begin, nl);
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    return line;
  };

  ParamManifest manifest;
  {
    std::istringstream head(next_line());
    std::string magic;
    head >> magic >> manifest.version;
    if (magic != kParamsHeader || !head) throw FormatError("params: bad container header");
  }
  for (;;) {
    const std::string line = next_line();
    if (line == kParamsSeparator) break;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw FormatError("params: bad manifest line '" + line + "'");
    manifest.entries.push_back({line.substr(0, space), parse_shape(line.substr(space + 1))});
  }
  manifest.validate();

  std::size_t total = 0;
  for (const auto& e : manifest.entries) total += e.element_count();
  if (bytes.size() - pos != total * 4) {
    throw FormatError("params: payload holds " + std::to_string(bytes.size() - pos) + " bytes, manifest needs " +
                      std::to_string(total * 4));
  }

  ParamSet set;
  set.manifest_ = manifest;
  for (const auto& e : manifest.entries) {
    std::vector<float> values(e.element_count());
    for (auto& f : values) {
      f = get_f32(bytes, pos);
      pos += 4;
    }
    set.blobs_.emplace(e.name, std::move(values));
  }
  return set;
}

void ParamSet::save(const std::filesystem::path& path) const { write_file(path, encode()); }

ParamSet ParamSet::load(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fmc::io
