#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fmc/grid.hpp"

namespace fmc::io {

using Bytes = std::vector<std::uint8_t>;

// Middlebury .flo: "PIEH" magic (float 202021.25 little-endian), int32 width,
// int32 height, then interleaved float32 (u, v) per pixel, row-major.
inline constexpr float kFloMagic = 202021.25f;

Bytes encode_flo(const Grid& flow);
Grid decode_flo(const Bytes& bytes);
void write_flo(const std::filesystem::path& path, const Grid& flow);
Grid read_flo(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Values are stored as-is, so a label map keeps
// its object ids and a foreground mask is written as {0, 255}.
Bytes encode_pgm(const Grid& mask);
Grid decode_pgm(const Bytes& bytes);
void write_pgm(const std::filesystem::path& path, const Grid& mask);
Grid read_pgm(const std::filesystem::path& path);

/// Reads a P5 or P6 image as a 3-channel grid with values in [0, 1].
/// Grayscale input is replicated across the three channels.
Grid read_rgb_image(const std::filesystem::path& path);

/// Binary {0,1} mask to a {0,255} PGM-ready grid and back.
Grid mask_to_pgm_values(const Grid& binary);
Grid pgm_values_to_mask(const Grid& pgm);

struct ParamEntry {
  std::string name;
  std::vector<int> shape;

  std::size_t element_count() const;
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

struct ParamManifest {
  int version = 1;
  std::vector<ParamEntry> entries;

  /// Throws FormatError on duplicate names, bad identifiers or empty dims.
  void validate() const;
  friend bool operator==(const ParamManifest&, const ParamManifest&) = default;
};

/// Parameter container. Layout:
///
///     fmc-params <version>\n
///     <name> <d0>,<d1>,...\n          one line per tensor, in payload order
///     ---\n
///     <float32 little-endian payloads, concatenated in manifest order>
///
/// Names are [A-Za-z0-9_.-]+.
class ParamSet {
 public:
  ParamSet() = default;

  /// Appends a tensor; the name must be new and the element count must match.
  void add(const std::string& name, std::vector<int> shape, std::vector<float> values);
  void add(const std::string& name, std::vector<int> shape, const std::vector<double>& values);

  bool contains(const std::string& name) const { return blobs_.count(name) != 0; }
  /// Throws LookupError for an undeclared name.
  const std::vector<float>& get(const std::string& name) const;
  std::vector<double> get_double(const std::string& name) const;
  const std::vector<int>& shape(const std::string& name) const;

  const ParamManifest& manifest() const { return manifest_; }

  Bytes encode() const;
  static ParamSet decode(const Bytes& bytes);
  void save(const std::filesystem::path& path) const;
  static ParamSet load(const std::filesystem::path& path);

 private:
  ParamManifest manifest_;
  std::map<std::string, std::vector<float>> blobs_;
};

/// Encodes a manifest plus named blobs; blob set and sizes must match.
Bytes encode_params(const ParamManifest& manifest,
                    const std::map<std::string, std::vector<float>>& blobs);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

}  // namespace fmc::io
