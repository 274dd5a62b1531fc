#include "mcf/cli_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <vector>

#include "mcf/phase_optimizer.hpp"
#include "mcf/rng.hpp"
#include "mcf/sensor.hpp"
#include "mcf/simd.hpp"
#include "mcf/spectral.hpp"

namespace fs = std::filesystem;

namespace mcf::cli {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join17(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt17(v[i]);
  }
  return out;
}

std::vector<double> split17(const std::string& s, const std::string& what) {
  std::vector<double> out;
  if (s.empty()) return out;
  size_t at = 0;
  while (at <= s.size()) {
    size_t comma = s.find(',', at);
    std::string tok = s.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidInput(what + ": bad number \"" + tok + '"');
    }
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return out;
}

struct KeySpec {
  const char* key;
  const char* fallback;  // nullptr marks a required key
};

// Materializes defaults in the declared order and rejects unknown keys,
// so equal effective configs serialize (and hash) identically.
io::KeyValueFile effective_config(const io::KeyValueFile& user, const std::vector<KeySpec>& spec,
                                  const char* command) {
  for (const auto& [key, value] : user.entries) {
    bool known = false;
    for (const KeySpec& k : spec) known = known || key == k.key;
    if (!known)
      throw InvalidInput(std::string(command) + " config: unknown key \"" + key + '"');
  }
  io::KeyValueFile out;
  for (const KeySpec& k : spec) {
    const std::string* v = user.find(k.key);
    if (v) {
      out.set(k.key, *v);
    } else if (k.fallback) {
      out.set(k.key, k.fallback);
    } else {
      throw InvalidInput(std::string(command) + " config: key \"" + k.key + "\" is required");
    }
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create directory " + dir + ": " + ec.message());
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

KernelSet kernels_from_config(const io::KeyValueFile& cfg) {
  const std::string file = cfg.get("kernels");
  if (!file.empty()) return io::read_kernels(file);
  const std::string bank = cfg.get("bank");
  const int count = cfg.get_int("kernel_count");
  const int channels = cfg.get_int("kernel_channels");
  const uint64_t seed = cfg.get_uint64("seed");
  if (bank == "filters") return make_filter_bank(count, channels, seed);
  if (bank != "random") throw InvalidInput("config key \"bank\" must be filters or random");
  const int k = cfg.get_int("kernel_size");
  if (k < 1 || k % 2 == 0) throw InvalidInput("config key \"kernel_size\" must be odd");
  KernelSet ks;
  ks.k = k;
  ks.channels = channels;
  ks.w.assign(size_t(count), std::vector<RealGrid>(size_t(channels), RealGrid(k, k)));
  for (int j = 0; j < count; ++j)
    for (int c = 0; c < channels; ++c) {
      RealGrid& w = ks.w[size_t(j)][size_t(c)];
      const uint64_t stream = rng::stream::kKernelInit + uint64_t(j) * uint64_t(channels) + c;
      for (size_t i = 0; i < w.v.size(); ++i)
        w.v[i] = 2.0 * rng::uniform(seed, stream, i) - 1.0;
    }
  return ks;
}

const char* kCurveKeys[7] = {"pce_r", "pce_g", "pce_b", "spd_r", "spd_g", "spd_b", "ssf"};

// Empty grid when no curves are configured (identity downstream).
Grid<double> xtalk_from_config(const io::KeyValueFile& cfg) {
  int given = 0;
  std::string missing;
  for (const char* key : kCurveKeys) {
    if (cfg.get(key).empty()) {
      if (!missing.empty()) missing += ", ";
      missing += key;
    } else {
      ++given;
    }
  }
  if (given == 0) return {};
  if (given < 7)
    throw InvalidInput("cross-talk curves are all-or-none; missing: " + missing);
  std::vector<SpectralCurve> pce, spd;
  pce.push_back(load_curve(cfg.get("pce_r"), CurveKind::pce));
  pce.push_back(load_curve(cfg.get("pce_g"), CurveKind::pce));
  pce.push_back(load_curve(cfg.get("pce_b"), CurveKind::pce));
  spd.push_back(load_curve(cfg.get("spd_r"), CurveKind::spd));
  spd.push_back(load_curve(cfg.get("spd_g"), CurveKind::spd));
  spd.push_back(load_curve(cfg.get("spd_b"), CurveKind::spd));
  SpectralCurve ssf = load_curve(cfg.get("ssf"), CurveKind::ssf);
  IntegrationGrid grid;
  grid.points = cfg.get_int("grid_points");
  CrossTalkMatrix m = crosstalk_matrix(pce, spd, ssf, grid);
  if (m.degenerate)
    throw InvalidInput("configured curves have no overlapping support; cross-talk is all zero");
  return m.entries;
}

RealGrid channel_sum(const std::vector<RealGrid>& channels) {
  RealGrid sum = channels.front();
  for (size_t c = 1; c < channels.size(); ++c)
    simd::active().axpy(1.0, channels[c].data(), sum.data(), sum.size());
  return sum;
}

double montage_rel_l2(const std::vector<RealGrid>& ref, const std::vector<RealGrid>& got) {
  double num = 0.0, den = 0.0;
  for (size_t j = 0; j < ref.size(); ++j)
    for (size_t i = 0; i < ref[j].v.size(); ++i) {
      const double d = got[j].v[i] - ref[j].v[i];
      num += d * d;
      den += ref[j].v[i] * ref[j].v[i];
    }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// Kernels in capture units: the optics realizes the per-channel
// normalized tiling and the pipeline divides by the mean factor, so the
// digital twin of kernel j, channel c is w * norm_scale[c] / mean.
KernelSet capture_scaled(const KernelSet& kernels, const TileLayout& layout) {
  KernelSet out = kernels;
  for (auto& per : out.w)
    for (size_t c = 0; c < per.size(); ++c) {
      const double s = layout.norm_scale[c] / layout.norm_scale_mean;
      simd::active().scale(s, per[c].data(), per[c].size());
    }
  return out;
}

RealGrid render_loss_curve(const std::vector<double>& losses) {
  const int width = 512, height = 256;
  RealGrid img(height, width);
  if (losses.size() < 2) return img;
  double lo = losses[0], hi = losses[0];
  bool positive = true;
  for (double v : losses) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    positive = positive && v > 0.0;
  }
  const bool logscale = positive && hi / std::max(lo, 1e-300) > 10.0;
  auto project = [&](double v) {
    double t;
    if (logscale)
      t = (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    else
      t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    int row = int(std::lround((1.0 - t) * (height - 1)));
    return std::clamp(row, 0, height - 1);
  };
  int prev = -1;
  for (int x = 0; x < width; ++x) {
    const size_t idx = size_t(std::lround(double(x) * double(losses.size() - 1) / (width - 1)));
    const int row = project(losses[idx]);
    if (prev < 0) prev = row;
    for (int r = std::min(prev, row); r <= std::max(prev, row); ++r) img(r, x) = 1.0;
    prev = row;
  }
  return img;
}

NoisePolicy noise_from_config(const io::KeyValueFile& cfg) {
  NoisePolicy noise;
  noise.mean = cfg.get_double("noise_mean");
  noise.proportionality = cfg.get_double("noise_k");
  return noise;
}

struct LoadedDatasets {
  Dataset train, test;
  std::string describe;
};

LoadedDatasets datasets_from_config(const io::KeyValueFile& cfg) {
  LoadedDatasets out;
  const std::string kind = cfg.get("dataset");
  if (kind == "synthetic") {
    const int classes = cfg.get_int("classes");
    const int per_train = cfg.get_int("train_per_class");
    const int per_test = cfg.get_int("test_per_class");
    const int size = cfg.get_int("scene_size");
    const uint64_t seed = cfg.get_uint64("seed");
    out.train = make_synthetic_dataset(classes, per_train, size, seed);
    out.test = make_synthetic_dataset(classes, per_test, size, seed + 1);
    out.describe = "synthetic classes=" + std::to_string(classes) + " train=" +
                   std::to_string(out.train.count()) + " test=" +
                   std::to_string(out.test.count()) + " scene=" + std::to_string(size);
  } else if (kind == "ppm") {
    out.train = load_ppm_dataset(cfg.get("dataset_train"));
    out.test = load_ppm_dataset(cfg.get("dataset_test"));
    if (out.train.classes != out.test.classes) {
      const int classes = std::max(out.train.classes, out.test.classes);
      out.train.classes = out.test.classes = classes;
    }
    out.describe = "ppm train=" + std::to_string(out.train.count()) + " test=" +
                   std::to_string(out.test.count()) + " scene=" +
                   std::to_string(out.train.size);
  } else {
    throw InvalidInput("config key \"dataset\" must be synthetic or ppm");
  }
  return out;
}

StepRule rule_from_string(const std::string& s) {
  if (s == "adaptive") return StepRule::adaptive_moment;
  if (s == "fixed") return StepRule::fixed;
  throw InvalidInput("config key \"step2_rule\"/\"rule\" must be adaptive or fixed");
}

const std::vector<KeySpec> kDesignKeys = {
    {"kernels", ""},      {"bank", "filters"}, {"kernel_count", "48"},
    {"kernel_channels", "3"}, {"kernel_size", "3"}, {"pad", "20"},
    {"n", "512"},         {"seed", "0"},       {"wavelength", ""},
    {"focal_length", ""}, {"pixel_pitch", ""},
};

const std::vector<KeySpec> kOptimizeKeys = {
    {"target", nullptr}, {"layout", nullptr},      {"iterations", "2000"},
    {"learning_rate", "0.05"}, {"rule", "adaptive"}, {"seed", "0"},
    {"log_every", "0"},
};

const std::vector<KeySpec> kSimulateKeys = {
    {"phase", nullptr}, {"layout", nullptr},  {"scene", ""},
    {"scene_classes", "3"}, {"scene_size", "32"}, {"scene_index", "0"},
    {"kernels", ""},    {"pce_r", ""},        {"pce_g", ""},
    {"pce_b", ""},      {"spd_r", ""},        {"spd_g", ""},
    {"spd_b", ""},      {"ssf", ""},          {"grid_points", "1024"},
    {"calibrate_gain", "1"},  {"noise_mean", "0"},  {"noise_k", "0"},
    {"seed", "0"},
};

const std::vector<KeySpec> kTrainKeys = {
    {"dataset", "synthetic"}, {"dataset_train", ""},   {"dataset_test", ""},
    {"classes", "3"},         {"train_per_class", "200"}, {"test_per_class", "50"},
    {"scene_size", "32"},     {"kernel_count", "8"},   {"kernel_size", "3"},
    {"pad", "16"},            {"mask_n", "256"},       {"hidden", "64"},
    {"step1_epochs", "15"},   {"step1_lr", "0.001"},   {"step1_batch", "32"},
    {"step2_iterations", "800"}, {"step2_lr", "0.05"}, {"step2_rule", "adaptive"},
    {"step3_epochs", "3"},    {"step3_lr", "0.0001"},  {"step3_batch", "32"},
    {"step3_phase_rate", "0.005"}, {"noise_mean", "0"}, {"noise_k", "0"},
    {"pce_r", ""},            {"pce_g", ""},           {"pce_b", ""},
    {"spd_r", ""},            {"spd_g", ""},           {"spd_b", ""},
    {"ssf", ""},              {"grid_points", "1024"}, {"calibrate_gain", "1"},
    {"seed", "0"},
};

const char* kRunFiles[] = {"config.txt",   "report.txt", "trace.csv",
                           "kernels.mck",  "target.mcf", "layout.txt",
                           "phase.mcf",    "net.mcn",    "hybrid_net.mcn"};

void require_run_files(const std::string& run_dir) {
  std::string missing;
  for (const char* name : kRunFiles) {
    if (!fs::exists(fs::path(run_dir) / name)) {
      if (!missing.empty()) missing += ", ";
      missing += name;
    }
  }
  if (!missing.empty())
    throw InvalidInput("run directory " + run_dir + " is missing: " + missing);
}

std::string accuracy_table(const RunReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "step 1 digital baseline: train %.5f test %.5f\n",
                r.step1_train_accuracy, r.step1_test_accuracy);
  out += buf;
  std::snprintf(buf, sizeof buf, "step 2 hybrid pre-tune:  test %.5f\n",
                r.step2_test_accuracy);
  out += buf;
  std::snprintf(buf, sizeof buf, "step 3 hybrid tuned:     train %.5f test %.5f\n",
                r.step3_train_accuracy, r.step3_test_accuracy);
  out += buf;
  return out;
}

ExperimentSetup setup_from_config(const io::KeyValueFile& cfg) {
  ExperimentSetup setup;
  setup.kernel_count = cfg.get_int("kernel_count");
  setup.kernel_size = cfg.get_int("kernel_size");
  setup.pad = cfg.get_int("pad");
  setup.mask_n = cfg.get_int("mask_n");
  setup.hidden = cfg.get_int("hidden");
  setup.step1 = {cfg.get_int("step1_epochs"), cfg.get_double("step1_lr"),
                 cfg.get_int("step1_batch")};
  setup.step2.iterations = cfg.get_int("step2_iterations");
  setup.step2.learning_rate = cfg.get_double("step2_lr");
  setup.step2.step_rule = rule_from_string(cfg.get("step2_rule"));
  setup.step3 = {cfg.get_int("step3_epochs"), cfg.get_double("step3_lr"),
                 cfg.get_int("step3_batch")};
  setup.step3_phase_rate = cfg.get_double("step3_phase_rate");
  setup.noise = noise_from_config(cfg);
  setup.xtalk = xtalk_from_config(cfg);
  setup.calibrate_gain = cfg.get_int("calibrate_gain") != 0;
  setup.seed = cfg.get_uint64("seed");
  return setup;
}

}  // namespace

void write_layout(const std::string& path, const TileLayout& layout) {
  io::KeyValueFile kv;
  kv.set("n", std::to_string(layout.n));
  kv.set("k", std::to_string(layout.k));
  kv.set("pad", std::to_string(layout.pad));
  kv.set("kernel_count", std::to_string(layout.kernel_count));
  kv.set("tile_size", std::to_string(layout.tile_size));
  kv.set("grid_rows", std::to_string(layout.grid_rows));
  kv.set("grid_cols", std::to_string(layout.grid_cols));
  kv.set("norm_scale", join17(layout.norm_scale));
  kv.set("norm_scale_mean", fmt17(layout.norm_scale_mean));
  io::write_key_values(path, kv);
}

TileLayout read_layout(const std::string& path) {
  io::KeyValueFile kv = io::read_key_values(path);
  TileLayout layout = make_tile_layout(kv.get_int("kernel_count"), kv.get_int("k"),
                                       kv.get_int("pad"), kv.get_int("n"));
  if (kv.get_int("tile_size") != layout.tile_size || kv.get_int("grid_rows") != layout.grid_rows ||
      kv.get_int("grid_cols") != layout.grid_cols)
    throw ParseError(path, 0, "layout fields disagree with the rebuilt tiling");
  layout.norm_scale = split17(kv.get("norm_scale"), path + ": norm_scale");
  layout.norm_scale_mean = kv.get_double("norm_scale_mean");
  return layout;
}

io::KeyValueFile report_to_kv(const RunReport& r) {
  io::KeyValueFile kv;
  kv.set("completed_steps", std::to_string(r.completed_steps));
  kv.set("step1_losses", join17(r.step1_losses));
  kv.set("step1_train_accuracy", fmt17(r.step1_train_accuracy));
  kv.set("step1_test_accuracy", fmt17(r.step1_test_accuracy));
  kv.set("step2_initial_loss", fmt17(r.step2_initial_loss));
  kv.set("step2_final_loss", fmt17(r.step2_final_loss));
  kv.set("step2_test_accuracy", fmt17(r.step2_test_accuracy));
  kv.set("step3_losses", join17(r.step3_losses));
  kv.set("step3_train_accuracy", fmt17(r.step3_train_accuracy));
  kv.set("step3_test_accuracy", fmt17(r.step3_test_accuracy));
  kv.set("xtalk_rows", std::to_string(r.xtalk.rows));
  for (int i = 0; i < r.xtalk.rows; ++i) {
    std::vector<double> row(r.xtalk.row(i), r.xtalk.row(i) + r.xtalk.cols);
    kv.set("xtalk_row_" + std::to_string(i), join17(row));
  }
  return kv;
}

RunReport report_from_kv(const io::KeyValueFile& kv) {
  RunReport r;
  r.completed_steps = kv.get_int("completed_steps");
  r.step1_losses = split17(kv.get("step1_losses"), "step1_losses");
  r.step1_train_accuracy = kv.get_double("step1_train_accuracy");
  r.step1_test_accuracy = kv.get_double("step1_test_accuracy");
  r.step2_initial_loss = kv.get_double("step2_initial_loss");
  r.step2_final_loss = kv.get_double("step2_final_loss");
  r.step2_test_accuracy = kv.get_double("step2_test_accuracy");
  r.step3_losses = split17(kv.get("step3_losses"), "step3_losses");
  r.step3_train_accuracy = kv.get_double("step3_train_accuracy");
  r.step3_test_accuracy = kv.get_double("step3_test_accuracy");
  const int rows = kv.get_int("xtalk_rows");
  if (rows > 0) {
    std::vector<std::vector<double>> m;
    for (int i = 0; i < rows; ++i)
      m.push_back(split17(kv.get("xtalk_row_" + std::to_string(i)), "xtalk_row"));
    r.xtalk = Grid<double>(rows, int(m.front().size()));
    for (int i = 0; i < rows; ++i) {
      if (int(m[size_t(i)].size()) != r.xtalk.cols)
        throw InvalidInput("xtalk rows have inconsistent lengths");
      for (int j = 0; j < r.xtalk.cols; ++j) r.xtalk(i, j) = m[size_t(i)][size_t(j)];
    }
  }
  return r;
}

std::vector<io::NamedTensor> tensors_from_net(const SuffixNetwork& net) {
  net.validate();
  std::vector<io::NamedTensor> out(5);
  out[0].name = "meta";
  out[0].dims = {4};
  out[0].data = {double(net.feature_maps), double(net.feature_size), double(net.hidden),
                 double(net.classes)};
  out[1].name = "w1";
  out[1].dims = {uint32_t(net.w1.rows), uint32_t(net.w1.cols)};
  out[1].data = net.w1.v;
  out[2].name = "b1";
  out[2].dims = {uint32_t(net.b1.size())};
  out[2].data = net.b1;
  out[3].name = "w2";
  out[3].dims = {uint32_t(net.w2.rows), uint32_t(net.w2.cols)};
  out[3].data = net.w2.v;
  out[4].name = "b2";
  out[4].dims = {uint32_t(net.b2.size())};
  out[4].data = net.b2;
  return out;
}

SuffixNetwork net_from_tensors(const std::vector<io::NamedTensor>& tensors) {
  auto find = [&](const char* name) -> const io::NamedTensor& {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw InvalidInput(std::string("checkpoint is missing tensor \"") + name + '"');
  };
  const io::NamedTensor& meta = find("meta");
  if (meta.data.size() != 4) throw InvalidInput("checkpoint meta tensor must have 4 entries");
  SuffixNetwork net;
  net.feature_maps = int(meta.data[0]);
  net.feature_size = int(meta.data[1]);
  net.hidden = int(meta.data[2]);
  net.classes = int(meta.data[3]);
  const io::NamedTensor& w1 = find("w1");
  const io::NamedTensor& b1 = find("b1");
  const io::NamedTensor& w2 = find("w2");
  const io::NamedTensor& b2 = find("b2");
  if (w1.dims.size() != 2 || w2.dims.size() != 2)
    throw InvalidInput("checkpoint weight tensors must be rank 2");
  net.w1 = Grid<double>(int(w1.dims[0]), int(w1.dims[1]));
  net.w1.v = w1.data;
  net.b1 = b1.data;
  net.w2 = Grid<double>(int(w2.dims[0]), int(w2.dims[1]));
  net.w2.v = w2.data;
  net.b2 = b2.data;
  net.validate();
  return net;
}

Dataset load_ppm_dataset(const std::string& dir) {
  if (dir.empty()) throw InvalidInput("ppm dataset directory is not configured");
  const auto listing = io::read_labels_csv(path_join(dir, "labels.csv"));
  if (listing.empty()) throw InvalidInput("labels.csv in " + dir + " lists no samples");
  Dataset d;
  int max_label = 0;
  for (size_t i = 0; i < listing.size(); ++i) {
    SceneImage scene = io::read_ppm(path_join(dir, listing[i].first));
    if (i == 0) d.size = scene.size;
    d.scenes.push_back(std::move(scene));
    d.labels.push_back(listing[i].second);
    d.ids.push_back(uint64_t(i));
    max_label = std::max(max_label, listing[i].second);
  }
  d.classes = max_label + 1;
  d.validate();
  return d;
}

RealGrid feature_montage(const std::vector<RealGrid>& maps) {
  if (maps.empty()) throw InvalidInput("feature_montage: no maps");
  const int s = maps.front().rows;
  double lo = maps.front().v.front();
  for (const RealGrid& m : maps) {
    if (m.rows != s || m.cols != s) throw InvalidInput("feature_montage: maps disagree in shape");
    for (double v : m.v) lo = std::min(lo, v);
  }
  const int count = int(maps.size());
  const int cols = int(std::ceil(std::sqrt(double(count))));
  const int rows = (count + cols - 1) / cols;
  RealGrid img(rows * s + rows - 1, cols * s + cols - 1, lo);
  for (int j = 0; j < count; ++j) {
    const int r0 = (j / cols) * (s + 1);
    const int c0 = (j % cols) * (s + 1);
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) img(r0 + r, c0 + c) = maps[size_t(j)](r, c);
  }
  return img;
}

std::string run_design(const io::KeyValueFile& user_cfg, const std::string& out_dir) {
  io::KeyValueFile cfg = effective_config(user_cfg, kDesignKeys, "design");
  KernelSet kernels = kernels_from_config(cfg);
  TargetPsf target = build_target_psf(kernels, cfg.get_int("pad"), cfg.get_int("n"));

  ensure_dir(out_dir);
  io::write_key_values(path_join(out_dir, "config.txt"), cfg);
  io::write_kernels(path_join(out_dir, "kernels.mck"), kernels);
  io::write_grid_stack(path_join(out_dir, "target.mcf"), target.channels);
  write_layout(path_join(out_dir, "layout.txt"), target.layout);
  io::write_pgm16(path_join(out_dir, "target.pgm"), channel_sum(target.channels));

  std::ostringstream out;
  out << "target " << target.n << "x" << target.n << ", " << target.channels.size()
      << " channels, " << 2 * kernels.count() << " tiles in " << target.layout.grid_rows << "x"
      << target.layout.grid_cols << " grid (tile " << target.layout.tile_size << ")\n";
  if (!cfg.get("wavelength").empty() && !cfg.get("focal_length").empty() &&
      !cfg.get("pixel_pitch").empty()) {
    MaskGeometry g = mask_geometry(cfg.get_double("wavelength"), cfg.get_double("focal_length"),
                                   cfg.get_double("pixel_pitch"), target.n);
    io::KeyValueFile gkv;
    gkv.set("wavelength", fmt17(g.wavelength));
    gkv.set("focal_length", fmt17(g.focal_length));
    gkv.set("pixel_pitch", fmt17(g.pixel_pitch));
    gkv.set("n", std::to_string(g.n));
    gkv.set("mask_extent", fmt17(g.mask_extent));
    gkv.set("phase_pixel", fmt17(g.phase_pixel));
    gkv.set("nyquist_limit", fmt17(g.nyquist_limit));
    io::write_key_values(path_join(out_dir, "geometry.txt"), gkv);
    out << "mask extent " << g.mask_extent << " m, phase pixel " << g.phase_pixel << " m\n";
  }
  out << "wrote config.txt kernels.mck target.mcf layout.txt target.pgm\n";
  return out.str();
}

std::string run_optimize(const io::KeyValueFile& user_cfg, const std::string& out_dir) {
  io::KeyValueFile cfg = effective_config(user_cfg, kOptimizeKeys, "optimize-phase");
  TargetPsf target;
  target.layout = read_layout(cfg.get("layout"));
  target.n = target.layout.n;
  target.channels = io::read_grid_stack(cfg.get("target"));

  OptimizerConfig oc;
  oc.iterations = cfg.get_int("iterations");
  oc.learning_rate = cfg.get_double("learning_rate");
  oc.step_rule = rule_from_string(cfg.get("rule"));
  oc.seed = cfg.get_uint64("seed");
  oc.log_every = cfg.get_int("log_every");

  ensure_dir(out_dir);
  io::write_key_values(path_join(out_dir, "config.txt"), cfg);
  CheckpointFn checkpoint;
  if (oc.log_every > 0)
    checkpoint = [&](int iteration, const PhaseProfile& phase, double) {
      char name[48];
      std::snprintf(name, sizeof name, "phase_ckpt_%06d.mcf", iteration);
      io::write_phase(path_join(out_dir, name), phase);
    };

  try {
    auto [phase, trace] = optimize_phase(target, oc, checkpoint);
    io::write_phase(path_join(out_dir, "phase.mcf"), phase);
    io::write_trace(path_join(out_dir, "trace.csv"), trace.losses);
    std::ostringstream out;
    out << "optimized " << target.channels.size() << " channels, " << oc.iterations
        << " iterations: loss " << fmt17(trace.initial_loss) << " -> " << fmt17(trace.final_loss)
        << " (" << (trace.initial_loss / std::max(trace.final_loss, 1e-300)) << "x) in "
        << trace.wall_seconds << " s\nwrote config.txt phase.mcf trace.csv\n";
    return out.str();
  } catch (const DivergenceError& e) {
    io::write_trace(path_join(out_dir, "trace.csv"), e.trace.losses);
    throw;
  }
}

std::string run_simulate(const io::KeyValueFile& user_cfg, const std::string& out_dir) {
  io::KeyValueFile cfg = effective_config(user_cfg, kSimulateKeys, "simulate");
  PhaseProfile phase = io::read_phase(cfg.get("phase"));
  TileLayout layout = read_layout(cfg.get("layout"));
  if (phase.n != layout.n) throw InvalidInput("phase and layout disagree on the plane size");

  SceneImage scene;
  const uint64_t seed = cfg.get_uint64("seed");
  const int scene_index = cfg.get_int("scene_index");
  if (!cfg.get("scene").empty()) {
    scene = io::read_ppm(cfg.get("scene"));
  } else {
    const int classes = cfg.get_int("scene_classes");
    if (scene_index < 0) throw InvalidInput("config key \"scene_index\" must be >= 0");
    Dataset d = make_synthetic_dataset(classes, scene_index / classes + 1,
                                       cfg.get_int("scene_size"), seed);
    scene = d.scenes[size_t(scene_index)];
  }
  const int s = scene.size;
  if (s > layout.tile_size)
    throw LayoutError("scene side " + std::to_string(s) + " exceeds tile spacing " +
                      std::to_string(layout.tile_size));

  Grid<double> xtalk = resolve_xtalk(xtalk_from_config(cfg), scene.channel_count(),
                                     cfg.get_int("calibrate_gain") != 0);
  if (int(phase.channels.size()) != scene.channel_count())
    throw InvalidInput("phase channel count does not match the scene");

  HybridSystem sys;
  sys.phase = std::move(phase);
  sys.layout = layout;
  sys.xtalk = xtalk;
  sys.feature_scale = 1.0 / layout.norm_scale_mean;
  sys.scene_size = s;

  NoisePolicy noise = noise_from_config(cfg);
  OpticalPipeline pipe = build_optical_pipeline(sys.phase, CrossTalkMatrix{sys.xtalk, false});
  SceneSpectra sf = scene_spectra(scene, pipe.n);
  RealGrid clean = forward_clean(pipe.spectra, sf);
  NoiseModel nm;
  nm.mean = noise.mean;
  nm.proportionality = noise.proportionality;
  nm.seed = seed;
  nm.stream = rng::stream::kNoiseTest + uint64_t(std::max(scene_index, 0));
  SensorImage img = capture({clean}, nm);
  std::vector<RealGrid> feats = extract_feature_map(img.values, sys.layout, s);
  for (RealGrid& f : feats) simd::active().scale(sys.feature_scale, f.data(), f.size());

  ensure_dir(out_dir);
  io::write_key_values(path_join(out_dir, "config.txt"), cfg);
  io::write_ppm(path_join(out_dir, "scene.ppm"), scene);
  io::write_pgm16(path_join(out_dir, "sensor.pgm"), img.values);
  io::write_pgm16(path_join(out_dir, "features.pgm"), feature_montage(feats));
  std::vector<io::NamedTensor> tensors(feats.size());
  for (size_t j = 0; j < feats.size(); ++j) {
    tensors[j].name = "feature_" + std::to_string(j);
    tensors[j].dims = {uint32_t(s), uint32_t(s)};
    tensors[j].data = feats[j].v;
  }
  io::write_tensors(path_join(out_dir, "features.mcn"), tensors);

  std::ostringstream out;
  out << "simulated " << feats.size() << " feature maps of " << s << "x" << s << " (noise k "
      << noise.proportionality << ")\n";
  if (!cfg.get("kernels").empty()) {
    KernelSet kernels = capture_scaled(io::read_kernels(cfg.get("kernels")), layout);
    std::vector<RealGrid> digital = digital_conv_features(kernels, scene);
    io::write_pgm16(path_join(out_dir, "features_digital.pgm"), feature_montage(digital));
    const double rel = montage_rel_l2(digital, feats);
    io::KeyValueFile fid;
    fid.set_double("rel_l2", rel);
    io::write_key_values(path_join(out_dir, "fidelity.txt"), fid);
    char buf[96];
    std::snprintf(buf, sizeof buf, "digital-vs-optical relative L2: %.6f (%.2f%%)\n", rel,
                  100.0 * rel);
    out << buf;
  }
  out << "wrote config.txt scene.ppm sensor.pgm features.pgm features.mcn\n";
  return out.str();
}

std::string run_train(const io::KeyValueFile& user_cfg, const std::string& out_root,
                      std::string* run_dir_out) {
  io::KeyValueFile cfg = effective_config(user_cfg, kTrainKeys, "train");
  const std::string run_dir = path_join(out_root, io::config_hash(cfg));
  if (run_dir_out) *run_dir_out = run_dir;

  LoadedDatasets data = datasets_from_config(cfg);
  ExperimentSetup setup = setup_from_config(cfg);

  ensure_dir(run_dir);
  io::write_key_values(path_join(run_dir, "config.txt"), cfg);

  TrainedArtifacts arts;
  RunReport report;
  try {
    report = train_three_step(setup, data.train, data.test, &arts);
  } catch (const TrainingAborted& e) {
    io::write_key_values(path_join(run_dir, "report.txt"), report_to_kv(e.partial));
    throw;
  }

  io::write_kernels(path_join(run_dir, "kernels.mck"), arts.kernels);
  io::write_grid_stack(path_join(run_dir, "target.mcf"), arts.target.channels);
  write_layout(path_join(run_dir, "layout.txt"), arts.target.layout);
  io::write_phase(path_join(run_dir, "phase.mcf"), arts.system.phase);
  io::write_trace(path_join(run_dir, "trace.csv"), arts.step2_trace.losses);
  io::write_tensors(path_join(run_dir, "net.mcn"), tensors_from_net(arts.digital_net));
  io::write_tensors(path_join(run_dir, "hybrid_net.mcn"), tensors_from_net(arts.hybrid_net));
  io::write_key_values(path_join(run_dir, "report.txt"), report_to_kv(report));

  std::ostringstream out;
  out << "run " << io::config_hash(cfg) << " (" << data.describe << ")\n"
      << accuracy_table(report) << "phase fit: loss " << fmt17(report.step2_initial_loss)
      << " -> " << fmt17(report.step2_final_loss) << "\nwall " << report.wall_seconds
      << " s\nwrote " << run_dir << "\n";
  return out.str();
}

std::string run_evaluate(const std::string& run_dir) {
  require_run_files(run_dir);
  io::KeyValueFile cfg = io::read_key_values(path_join(run_dir, "config.txt"));
  RunReport report = report_from_kv(io::read_key_values(path_join(run_dir, "report.txt")));
  LoadedDatasets data = datasets_from_config(cfg);

  KernelSet kernels = io::read_kernels(path_join(run_dir, "kernels.mck"));
  SuffixNetwork net = net_from_tensors(io::read_tensors(path_join(run_dir, "net.mcn")));
  SuffixNetwork hybrid_net =
      net_from_tensors(io::read_tensors(path_join(run_dir, "hybrid_net.mcn")));
  TileLayout layout = read_layout(path_join(run_dir, "layout.txt"));

  HybridSystem sys;
  sys.phase = io::read_phase(path_join(run_dir, "phase.mcf"));
  sys.layout = layout;
  sys.xtalk = report.xtalk;
  sys.feature_scale = 1.0 / layout.norm_scale_mean;
  sys.scene_size = data.test.size;

  const uint64_t seed = cfg.get_uint64("seed");
  NoisePolicy noise = noise_from_config(cfg);
  EvalResult digital = evaluate_digital(kernels, net, data.test);
  EvalResult hybrid =
      evaluate_hybrid(sys, hybrid_net, data.test, noise, seed, rng::stream::kNoiseTest);

  char buf[256];
  std::ostringstream out;
  out << "run " << io::config_hash(cfg) << " (" << data.describe << ")\nstored report:\n"
      << accuracy_table(report);
  std::snprintf(buf, sizeof buf,
                "recomputed: digital test %.5f (loss %.5f), hybrid test %.5f (loss %.5f)\n",
                digital.accuracy, digital.mean_loss, hybrid.accuracy, hybrid.mean_loss);
  out << buf;
  return out.str();
}

std::string run_export_orientations(const std::string& phase_path, const std::string& out_csv) {
  PhaseProfile phase = io::read_phase(phase_path);
  OrientationMap map = phase_to_orientation(phase);
  io::write_orientations(out_csv, map);
  std::ostringstream out;
  out << "wrote " << out_csv << " (" << map.channels.size() << " channels of " << map.n << "x"
      << map.n << ")\n";
  return out.str();
}

std::string run_report(const std::string& run_dir) {
  require_run_files(run_dir);
  io::KeyValueFile cfg = io::read_key_values(path_join(run_dir, "config.txt"));
  RunReport report = report_from_kv(io::read_key_values(path_join(run_dir, "report.txt")));
  std::vector<double> trace = io::read_trace(path_join(run_dir, "trace.csv"));
  KernelSet kernels = io::read_kernels(path_join(run_dir, "kernels.mck"));
  TileLayout layout = read_layout(path_join(run_dir, "layout.txt"));
  PhaseProfile phase = io::read_phase(path_join(run_dir, "phase.mcf"));
  LoadedDatasets data = datasets_from_config(cfg);

  const SceneImage& scene = data.test.scenes.front();
  HybridSystem sys;
  sys.phase = std::move(phase);
  sys.layout = layout;
  sys.xtalk = report.xtalk;
  sys.feature_scale = 1.0 / layout.norm_scale_mean;
  sys.scene_size = scene.size;

  NoisePolicy off;  // feature comparison is about the optics, not noise
  OpticalPipeline pipe = build_optical_pipeline(sys.phase, CrossTalkMatrix{sys.xtalk, false});
  std::vector<RealGrid> optical = hybrid_features(pipe, sys, scene, off, 0, 0);
  std::vector<RealGrid> digital = digital_conv_features(capture_scaled(kernels, layout), scene);
  const double rel = montage_rel_l2(digital, optical);

  io::write_pgm16(path_join(run_dir, "loss_curve.pgm"), render_loss_curve(trace));
  io::write_pgm16(path_join(run_dir, "features_digital.pgm"), feature_montage(digital));
  io::write_pgm16(path_join(run_dir, "features_optical.pgm"), feature_montage(optical));

  char buf[160];
  std::ostringstream summary;
  summary << "run " << io::config_hash(cfg) << "\ndataset " << data.describe << "\n"
          << accuracy_table(report);
  std::snprintf(buf, sizeof buf, "phase fit: loss %.6g -> %.6g over %zu recorded iterations\n",
                report.step2_initial_loss, report.step2_final_loss, trace.size());
  summary << buf;
  std::snprintf(buf, sizeof buf,
                "digital-vs-optical feature relative L2 on test scene 0: %.6f (%.2f%%)\n", rel,
                100.0 * rel);
  summary << buf;
  summary << "files: loss_curve.pgm features_digital.pgm features_optical.pgm summary.txt\n";
  io::write_text_file(path_join(run_dir, "summary.txt"), summary.str());
  return summary.str();
}

}  // namespace mcf::cli
