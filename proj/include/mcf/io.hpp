#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcf/fourier_optics.hpp"
#include "mcf/grid.hpp"
#include "mcf/kernel_layout.hpp"
#include "mcf/optical_layer.hpp"
#include "mcf/sensor.hpp"

namespace mcf::io {

// Stack of C square N x N planes. 16-byte header: magic "MCF1",
// u32 channel count, u32 side length, u32 dtype tag (1 = f64), all
// little-endian, followed by the samples as little-endian doubles in
// channel-row-major order.
void write_grid_stack(const std::string& path, const std::vector<RealGrid>& channels);
std::vector<RealGrid> read_grid_stack(const std::string& path);

void write_phase(const std::string& path, const PhaseProfile& phase);
PhaseProfile read_phase(const std::string& path);
void write_psf(const std::string& path, const PsfImage& psf);
PsfImage read_psf(const std::string& path);
void write_sensor_image(const std::string& path, const SensorImage& img);

// Kernel bank with a [K][C][k][k] shape header, magic "MCK1".
void write_kernels(const std::string& path, const KernelSet& kernels);
KernelSet read_kernels(const std::string& path);

// Checkpoint container: named tensor sections, magic "MCN1".
struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<double> data;

  size_t element_count() const;
};
void write_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(const std::string& path);

// Fabrication handoff: one row per mask element, angles in [0, pi).
// Doubles are printed with %.17g so a read reproduces them exactly.
void write_orientations(const std::string& path, const OrientationMap& map);
OrientationMap read_orientations(const std::string& path);

// Flat key=value text. Parsing skips blank lines and # comments; writing
// emits bare "key=value" lines, so write -> read -> write is stable.
struct KeyValueFile {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const;
  const std::string& get(const std::string& key) const;        // throws if absent
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  uint64_t get_uint64(const std::string& key) const;
  void set(const std::string& key, const std::string& value);  // replace or append
  void set_double(const std::string& key, double value);
  std::string serialize() const;
};
KeyValueFile parse_key_values(std::string_view text, const std::string& source_name);
KeyValueFile read_key_values(const std::string& path);
void write_key_values(const std::string& path, const KeyValueFile& kv);

uint64_t fnv1a64(std::string_view bytes);
// 16 lowercase hex digits of the hash of the serialized entries; names run
// directories so identical configs land in identical places.
std::string config_hash(const KeyValueFile& kv);

// 16-bit binary PGM, big-endian samples, values affinely mapped onto
// [0, 65535]; the map is recorded in a header comment "# range lo hi".
void write_pgm16(const std::string& path, const RealGrid& values);
RealGrid read_pgm16(const std::string& path);

// 8-bit binary PPM (P6, maxval 255) read as an RGB scene scaled to [0, 1].
SceneImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const SceneImage& scene);  // clamps to [0, 1]

// Optimization trace: "iteration,loss" CSV with a header row.
void write_trace(const std::string& path, const std::vector<double>& losses);
std::vector<double> read_trace(const std::string& path);

// Dataset listing: "filename,label" CSV with optional header.
std::vector<std::pair<std::string, int>> read_labels_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mcf::io
