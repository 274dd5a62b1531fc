#include "mcf/io.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mcf/errors.hpp"

namespace mcf::io {

namespace {

constexpr uint32_t kDtypeF64 = 1;

void append_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_f64(std::string& out, double d) {
  const uint64_t v = std::bit_cast<uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& path;
  const std::string& bytes;
  size_t at = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path, static_cast<int>(at), "byte offset " + std::to_string(at) + ": " + what);
  }
  void expect_magic(const char* magic) {
    if (bytes.size() < at + 4 || std::memcmp(bytes.data() + at, magic, 4) != 0)
      fail(std::string("expected magic \"") + magic + '"');
    at += 4;
  }
  uint32_t u32(const char* what) {
    if (bytes.size() < at + 4) fail(std::string("truncated while reading ") + what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[at + static_cast<size_t>(i)])) << (8 * i);
    at += 4;
    return v;
  }
  double f64(const char* what) {
    if (bytes.size() < at + 8) fail(std::string("truncated while reading ") + what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[at + static_cast<size_t>(i)])) << (8 * i);
    at += 8;
    return std::bit_cast<double>(v);
  }
  void read_f64_block(double* dst, size_t count, const char* what) {
    for (size_t i = 0; i < count; ++i) dst[i] = f64(what);
  }
  void expect_end() const {
    if (at != bytes.size()) throw ParseError(path, static_cast<int>(at),
                                             "byte offset " + std::to_string(at) + ": trailing data");
  }
};

std::string format_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

double parse_double_token(std::string_view tok, const std::string& path, int line) {
  std::string tmp(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || tmp.empty() || errno == ERANGE)
    throw ParseError(path, line, "expected a number, got \"" + tmp + '"');
  return v;
}

long parse_int_token(std::string_view tok, const std::string& path, int line) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(path, line, "expected an integer, got \"" + std::string(tok) + '"');
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw RuntimeFailure("short write to " + path);
}

void write_grid_stack(const std::string& path, const std::vector<RealGrid>& channels) {
  if (channels.empty()) throw InvalidInput("refusing to write an empty stack to " + path);
  const int n = channels.front().rows;
  for (const RealGrid& g : channels)
    if (g.rows != n || g.cols != n) throw InvalidInput("stack planes must be square and equal-sized");
  std::string out;
  out.reserve(16 + channels.size() * static_cast<size_t>(n) * static_cast<size_t>(n) * 8);
  out += "MCF1";
  append_u32(out, static_cast<uint32_t>(channels.size()));
  append_u32(out, static_cast<uint32_t>(n));
  append_u32(out, kDtypeF64);
  for (const RealGrid& g : channels)
    for (double d : g.v) append_f64(out, d);
  write_text_file(path, out);
}

std::vector<RealGrid> read_grid_stack(const std::string& path) {
  const std::string bytes = read_text_file(path);
  Reader r{path, bytes};
  r.expect_magic("MCF1");
  const uint32_t c = r.u32("channel count");
  const uint32_t n = r.u32("side length");
  const uint32_t dtype = r.u32("dtype tag");
  if (c == 0 || n == 0) r.fail("degenerate shape");
  if (dtype != kDtypeF64) r.fail("unsupported dtype tag " + std::to_string(dtype));
  std::vector<RealGrid> channels(c, RealGrid(static_cast<int>(n), static_cast<int>(n)));
  for (RealGrid& g : channels) r.read_f64_block(g.v.data(), g.v.size(), "samples");
  r.expect_end();
  return channels;
}

void write_phase(const std::string& path, const PhaseProfile& phase) {
  phase.validate("phase profile");
  write_grid_stack(path, phase.channels);
}

PhaseProfile read_phase(const std::string& path) {
  PhaseProfile p;
  p.channels = read_grid_stack(path);
  p.n = p.channels.front().rows;
  return p;
}

void write_psf(const std::string& path, const PsfImage& psf) {
  write_grid_stack(path, psf.channels);
}

PsfImage read_psf(const std::string& path) {
  PsfImage p;
  p.channels = read_grid_stack(path);
  p.n = p.channels.front().rows;
  return p;
}

void write_sensor_image(const std::string& path, const SensorImage& img) {
  write_grid_stack(path, {img.values});
}

void write_kernels(const std::string& path, const KernelSet& kernels) {
  kernels.validate();
  std::string out;
  out += "MCK1";
  append_u32(out, static_cast<uint32_t>(kernels.count()));
  append_u32(out, static_cast<uint32_t>(kernels.channels));
  append_u32(out, static_cast<uint32_t>(kernels.k));
  append_u32(out, kDtypeF64);
  for (const auto& per : kernels.w)
    for (const RealGrid& g : per)
      for (double d : g.v) append_f64(out, d);
  write_text_file(path, out);
}

KernelSet read_kernels(const std::string& path) {
  const std::string bytes = read_text_file(path);
  Reader r{path, bytes};
  r.expect_magic("MCK1");
  const uint32_t count = r.u32("kernel count");
  const uint32_t channels = r.u32("channel count");
  const uint32_t k = r.u32("kernel size");
  const uint32_t dtype = r.u32("dtype tag");
  if (count == 0 || channels == 0 || k == 0) r.fail("degenerate shape");
  if (dtype != kDtypeF64) r.fail("unsupported dtype tag " + std::to_string(dtype));
  KernelSet ks;
  ks.k = static_cast<int>(k);
  ks.channels = static_cast<int>(channels);
  ks.w.assign(count, std::vector<RealGrid>(channels, RealGrid(ks.k, ks.k)));
  for (auto& per : ks.w)
    for (RealGrid& g : per) r.read_f64_block(g.v.data(), g.v.size(), "samples");
  r.expect_end();
  ks.validate();
  return ks;
}

size_t NamedTensor::element_count() const {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

void write_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::string out;
  out += "MCN1";
  append_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (t.name.empty()) throw InvalidInput("tensor sections need a name");
    if (t.data.size() != t.element_count())
      throw InvalidInput("tensor \"" + t.name + "\" data does not match its dims");
    append_u32(out, static_cast<uint32_t>(t.name.size()));
    out += t.name;
    append_u32(out, static_cast<uint32_t>(t.dims.size()));
    for (uint32_t d : t.dims) append_u32(out, d);
    append_u32(out, kDtypeF64);
    for (double d : t.data) append_f64(out, d);
  }
  write_text_file(path, out);
}

std::vector<NamedTensor> read_tensors(const std::string& path) {
  const std::string bytes = read_text_file(path);
  Reader r{path, bytes};
  r.expect_magic("MCN1");
  const uint32_t count = r.u32("section count");
  std::vector<NamedTensor> tensors(count);
  for (NamedTensor& t : tensors) {
    const uint32_t name_len = r.u32("name length");
    if (bytes.size() < r.at + name_len) r.fail("truncated section name");
    t.name.assign(bytes, r.at, name_len);
    r.at += name_len;
    const uint32_t ndim = r.u32("rank");
    t.dims.resize(ndim);
    for (uint32_t& d : t.dims) d = r.u32("dim");
    const uint32_t dtype = r.u32("dtype tag");
    if (dtype != kDtypeF64) r.fail("unsupported dtype tag " + std::to_string(dtype));
    t.data.resize(t.element_count());
    r.read_f64_block(t.data.data(), t.data.size(), "samples");
  }
  r.expect_end();
  return tensors;
}

void write_orientations(const std::string& path, const OrientationMap& map) {
  if (map.channels.empty()) throw InvalidInput("orientation map is empty");
  std::string out = "row,col,channel,angle\n";
  for (size_t c = 0; c < map.channels.size(); ++c) {
    const RealGrid& g = map.channels[c];
    for (int r = 0; r < g.rows; ++r)
      for (int q = 0; q < g.cols; ++q)
        out += std::to_string(r) + ',' + std::to_string(q) + ',' + std::to_string(c) + ',' +
               format_double(g(r, q)) + '\n';
  }
  write_text_file(path, out);
}

OrientationMap read_orientations(const std::string& path) {
  const std::string text = read_text_file(path);
  struct Row {
    int r, c, ch;
    double angle;
  };
  std::vector<Row> rows;
  int max_r = -1, max_c = -1, max_ch = -1;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line == "row,col,channel,angle") continue;
    std::string_view f[4];
    size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      const size_t comma = line.find(',', start);
      if (i < 3 && comma == std::string_view::npos)
        throw ParseError(path, line_no, "expected 4 comma-separated fields");
      f[i] = line.substr(start, (i < 3 ? comma : line.size()) - start);
      start = comma + 1;
    }
    Row row;
    row.r = static_cast<int>(parse_int_token(trim(f[0]), path, line_no));
    row.c = static_cast<int>(parse_int_token(trim(f[1]), path, line_no));
    row.ch = static_cast<int>(parse_int_token(trim(f[2]), path, line_no));
    row.angle = parse_double_token(trim(f[3]), path, line_no);
    if (row.r < 0 || row.c < 0 || row.ch < 0) throw ParseError(path, line_no, "negative index");
    max_r = std::max(max_r, row.r);
    max_c = std::max(max_c, row.c);
    max_ch = std::max(max_ch, row.ch);
    rows.push_back(row);
  }
  if (rows.empty()) throw ParseError(path, line_no, "no data rows");
  if (max_r != max_c) throw ParseError(path, line_no, "orientation grid is not square");
  const int n = max_r + 1;
  OrientationMap map;
  map.n = n;
  map.channels.assign(static_cast<size_t>(max_ch) + 1, RealGrid(n, n));
  if (rows.size() != map.channels.size() * static_cast<size_t>(n) * static_cast<size_t>(n))
    throw ParseError(path, line_no, "row count does not cover the full grid");
  for (const Row& row : rows) map.channels[static_cast<size_t>(row.ch)](row.r, row.c) = row.angle;
  return map;
}

const std::string* KeyValueFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

const std::string& KeyValueFile::get(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw InvalidInput("missing required key \"" + key + '"');
  return *v;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  return parse_double_token(get(key), "key \"" + key + '"', 0);
}

int KeyValueFile::get_int(const std::string& key) const {
  return static_cast<int>(parse_int_token(get(key), "key \"" + key + '"', 0));
}

uint64_t KeyValueFile::get_uint64(const std::string& key) const {
  const std::string& s = get(key);
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw InvalidInput("key \"" + key + "\" is not an unsigned integer: \"" + s + '"');
  return v;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries)
    if (k == key) {
      v = value;
      return;
    }
  entries.emplace_back(key, value);
}

void KeyValueFile::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

std::string KeyValueFile::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries) out += k + '=' + v + '\n';
  return out;
}

KeyValueFile parse_key_values(std::string_view text, const std::string& source_name) {
  KeyValueFile kv;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    if (pos == text.size()) break;
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source_name, line_no, "expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(source_name, line_no, "empty key");
    if (kv.find(key)) throw ParseError(source_name, line_no, "duplicate key \"" + key + '"');
    kv.entries.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValueFile read_key_values(const std::string& path) {
  return parse_key_values(read_text_file(path), path);
}

void write_key_values(const std::string& path, const KeyValueFile& kv) {
  write_text_file(path, kv.serialize());
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const KeyValueFile& kv) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(kv.serialize())));
  return buf;
}

void write_pgm16(const std::string& path, const RealGrid& values) {
  if (values.rows <= 0 || values.cols <= 0) throw InvalidInput("empty image");
  double lo = values.v.front(), hi = values.v.front();
  for (double d : values.v) {
    if (!std::isfinite(d)) throw InvalidInput("image contains a non-finite value");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out = "P5\n# range " + format_double(lo) + ' ' + format_double(hi) + '\n' +
                    std::to_string(values.cols) + ' ' + std::to_string(values.rows) + "\n65535\n";
  out.reserve(out.size() + values.v.size() * 2);
  for (double d : values.v) {
    const auto q = static_cast<uint32_t>(std::lround((d - lo) / span * 65535.0));
    out.push_back(static_cast<char>((q >> 8) & 0xff));
    out.push_back(static_cast<char>(q & 0xff));
  }
  write_text_file(path, out);
}

namespace {

// Reads one whitespace-delimited netpbm header token, skipping # comments.
std::string pnm_token(const std::string& bytes, size_t& at, const std::string& path) {
  while (at < bytes.size()) {
    const char c = bytes[at];
    if (c == '#') {
      while (at < bytes.size() && bytes[at] != '\n') ++at;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++at;
    } else {
      break;
    }
  }
  const size_t start = at;
  while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
  if (start == at) throw ParseError(path, static_cast<int>(at), "truncated header");
  return bytes.substr(start, at - start);
}

}  // namespace

RealGrid read_pgm16(const std::string& path) {
  const std::string bytes = read_text_file(path);
  size_t at = 0;
  if (pnm_token(bytes, at, path) != "P5") throw ParseError(path, 1, "not a binary PGM");
  // The range comment precedes the dimensions; recover it for the inverse map.
  double lo = 0.0, hi = 65535.0;
  const size_t range_at = bytes.find("# range ");
  if (range_at != std::string::npos) {
    std::istringstream ss(bytes.substr(range_at + 8));
    ss >> lo >> hi;
    if (!ss) throw ParseError(path, 2, "malformed range comment");
  }
  const int w = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  const int h = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  const int maxval = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  if (w <= 0 || h <= 0) throw ParseError(path, 0, "bad dimensions");
  if (maxval != 65535) throw ParseError(path, 0, "expected maxval 65535");
  ++at;  // single whitespace byte after maxval
  const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 2;
  if (bytes.size() - at < need) throw ParseError(path, static_cast<int>(at), "truncated pixel data");
  RealGrid g(h, w);
  const double span = hi > lo ? hi - lo : 1.0;
  for (size_t i = 0; i < g.v.size(); ++i) {
    const auto q = static_cast<uint32_t>(
        (static_cast<unsigned char>(bytes[at + 2 * i]) << 8) |
        static_cast<unsigned char>(bytes[at + 2 * i + 1]));
    g.v[i] = lo + q / 65535.0 * span;
  }
  return g;
}

SceneImage read_ppm(const std::string& path) {
  const std::string bytes = read_text_file(path);
  size_t at = 0;
  if (pnm_token(bytes, at, path) != "P6") throw ParseError(path, 1, "not a binary PPM");
  const int w = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  const int h = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  const int maxval = static_cast<int>(parse_int_token(pnm_token(bytes, at, path), path, 0));
  if (w <= 0 || h <= 0) throw ParseError(path, 0, "bad dimensions");
  if (w != h) throw InvalidInput(path + ": scenes must be square, got " + std::to_string(w) + 'x' +
                                 std::to_string(h));
  if (maxval != 255) throw ParseError(path, 0, "expected maxval 255");
  ++at;
  const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  if (bytes.size() - at < need) throw ParseError(path, static_cast<int>(at), "truncated pixel data");
  SceneImage scene;
  scene.size = w;
  scene.provenance = path;
  scene.channels.assign(3, RealGrid(h, w));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        scene.channels[static_cast<size_t>(c)](y, x) =
            static_cast<unsigned char>(bytes[at + 3 * (static_cast<size_t>(y) * w + x) +
                                             static_cast<size_t>(c)]) / 255.0;
  return scene;
}

void write_ppm(const std::string& path, const SceneImage& scene) {
  scene.validate();
  if (scene.channel_count() != 3) throw InvalidInput("PPM export needs exactly 3 channels");
  const int s = scene.size;
  std::string out = "P6\n" + std::to_string(s) + ' ' + std::to_string(s) + "\n255\n";
  out.reserve(out.size() + static_cast<size_t>(s) * static_cast<size_t>(s) * 3);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(scene.channels[static_cast<size_t>(c)](y, x), 0.0, 1.0);
        out.push_back(static_cast<char>(std::lround(v * 255.0)));
      }
  write_text_file(path, out);
}

void write_trace(const std::string& path, const std::vector<double>& losses) {
  std::string out = "iteration,loss\n";
  for (size_t i = 0; i < losses.size(); ++i)
    out += std::to_string(i) + ',' + format_double(losses[i]) + '\n';
  write_text_file(path, out);
}

std::vector<double> read_trace(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<double> losses;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line == "iteration,loss") continue;
    const size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError(path, line_no, "expected iteration,loss");
    const long it = parse_int_token(trim(line.substr(0, comma)), path, line_no);
    if (it != static_cast<long>(losses.size()))
      throw ParseError(path, line_no, "iterations must count up from 0");
    losses.push_back(parse_double_token(trim(line.substr(comma + 1)), path, line_no));
  }
  return losses;
}

std::vector<std::pair<std::string, int>> read_labels_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::pair<std::string, int>> rows;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line == "filename,label") continue;
    const size_t comma = line.rfind(',');
    if (comma == std::string_view::npos) throw ParseError(path, line_no, "expected filename,label");
    std::string name(trim(line.substr(0, comma)));
    if (name.empty()) throw ParseError(path, line_no, "empty filename");
    const long label = parse_int_token(trim(line.substr(comma + 1)), path, line_no);
    if (label < 0) throw ParseError(path, line_no, "negative label");
    rows.emplace_back(std::move(name), static_cast<int>(label));
  }
  if (rows.empty()) throw ParseError(path, line_no, "no data rows");
  return rows;
}

}  // namespace mcf::io
