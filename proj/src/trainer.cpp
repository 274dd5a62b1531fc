#include "mcf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mcf/rng.hpp"
#include "mcf/sensor.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

// One first-moment/second-moment pair per registered tensor, advanced in
// lockstep; update order is the registration order, so runs are
// reproducible.
class AdamGroup {
 public:
  int add(size_t n) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
    return static_cast<int>(m_.size()) - 1;
  }
  void begin_step() { ++t_; }
  void update(int slot, double lr, const double* g, double* p, size_t n) {
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    double* m = m_[static_cast<size_t>(slot)].data();
    double* v = v_[static_cast<size_t>(slot)].data();
    for (size_t i = 0; i < n; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

 private:
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::vector<int> epoch_order(int count, uint64_t seed, uint64_t epoch_stream) {
  std::vector<int> order(static_cast<size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  for (int i = count - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng::below(seed, epoch_stream, static_cast<uint64_t>(i),
                                               static_cast<uint64_t>(i) + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  return order;
}

struct SuffixGradBuffer {
  Grid<double> w1, w2;
  std::vector<double> b1, b2;

  explicit SuffixGradBuffer(const SuffixNetwork& net)
      : w1(net.hidden, net.w1.cols),
        w2(net.classes, net.hidden),
        b1(static_cast<size_t>(net.hidden), 0.0),
        b2(static_cast<size_t>(net.classes), 0.0) {}
  void clear() {
    std::fill(w1.v.begin(), w1.v.end(), 0.0);
    std::fill(w2.v.begin(), w2.v.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
  }
  void add(const SuffixGradients& g) {
    const simd::Kernels& k = simd::active();
    k.axpy(1.0, g.w1.v.data(), w1.v.data(), w1.v.size());
    k.axpy(1.0, g.w2.v.data(), w2.v.data(), w2.v.size());
    k.axpy(1.0, g.b1.data(), b1.data(), b1.size());
    k.axpy(1.0, g.b2.data(), b2.data(), b2.size());
  }
  void scale(double s) {
    const simd::Kernels& k = simd::active();
    k.scale(s, w1.v.data(), w1.v.size());
    k.scale(s, w2.v.data(), w2.v.size());
    k.scale(s, b1.data(), b1.size());
    k.scale(s, b2.data(), b2.size());
  }
};

struct SuffixAdamSlots {
  int w1, b1, w2, b2;
  SuffixAdamSlots(AdamGroup& adam, const SuffixNetwork& net)
      : w1(adam.add(net.w1.v.size())),
        b1(adam.add(net.b1.size())),
        w2(adam.add(net.w2.v.size())),
        b2(adam.add(net.b2.size())) {}
  void apply(AdamGroup& adam, double lr, const SuffixGradBuffer& g, SuffixNetwork& net) {
    adam.update(w1, lr, g.w1.v.data(), net.w1.v.data(), net.w1.v.size());
    adam.update(b1, lr, g.b1.data(), net.b1.data(), net.b1.size());
    adam.update(w2, lr, g.w2.v.data(), net.w2.v.data(), net.w2.v.size());
    adam.update(b2, lr, g.b2.data(), net.b2.data(), net.b2.size());
  }
};

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

Grid<double> identity_matrix(int c) {
  Grid<double> m(c, c);
  for (int i = 0; i < c; ++i) m(i, i) = 1.0;
  return m;
}

Grid<double> effective_xtalk(const ExperimentSetup& setup, int channels) {
  return resolve_xtalk(setup.xtalk, channels, setup.calibrate_gain);
}

void check_dataset_pair(const Dataset& train, const Dataset& test) {
  train.validate();
  test.validate();
  if (train.classes != test.classes || train.size != test.size)
    throw InvalidInput("train and test splits disagree on shape or classes");
  if (train.scenes.front().channel_count() != test.scenes.front().channel_count())
    throw InvalidInput("train and test splits disagree on channel count");
}

}  // namespace

void Dataset::validate() const {
  if (size < 1 || classes < 2) throw InvalidInput("dataset needs size >= 1 and >= 2 classes");
  if (scenes.empty()) throw InvalidInput("dataset is empty");
  if (scenes.size() != labels.size() || scenes.size() != ids.size())
    throw InvalidInput("dataset arrays disagree in length");
  const int channels = scenes.front().channel_count();
  for (const SceneImage& s : scenes) {
    s.validate();
    if (s.size != size || s.channel_count() != channels)
      throw InvalidInput("dataset scenes disagree in shape");
  }
  for (int l : labels)
    if (l < 0 || l >= classes) throw InvalidInput("dataset label out of range");
}

Dataset make_synthetic_dataset(int num_classes, int samples_per_class, int size,
                               uint64_t seed) {
  if (size < 8) throw InvalidInput("scenes must be at least 8 pixels across");
  if (num_classes < 2 || num_classes > 6)
    throw InvalidInput("synthetic dataset supports 2 to 6 classes");
  if (samples_per_class < 1) throw InvalidInput("need at least one sample per class");

  Dataset d;
  d.size = size;
  d.classes = num_classes;
  const int total = num_classes * samples_per_class;
  d.scenes.reserve(static_cast<size_t>(total));
  d.labels.reserve(static_cast<size_t>(total));
  d.ids.reserve(static_cast<size_t>(total));

  for (int i = 0; i < total; ++i) {
    const int label = i % num_classes;
    // Class identity = (shape, dominant channel). Classes two apart share
    // a shape and differ only in color, so channel-blind processing
    // cannot separate them.
    const int shape = label % 2;       // 0 square, 1 circle
    const int channel = label % 3;
    const uint64_t stream = rng::stream::kDataset + static_cast<uint64_t>(i);
    uint64_t ctr = 0;
    auto draw = [&] { return rng::uniform(seed, stream, ctr++); };

    SceneImage scene;
    scene.size = size;
    scene.provenance = "synthetic";
    scene.channels.assign(3, RealGrid(size, size));
    for (RealGrid& ch : scene.channels)
      for (double& v : ch.v) v = 0.12 * draw();

    const double dominant = 0.75 + 0.2 * draw();
    const double off_a = 0.06 + 0.06 * draw();
    const double off_b = 0.06 + 0.06 * draw();

    auto paint = [&](int r, int c) {
      for (int ch = 0; ch < 3; ++ch)
        scene.channels[static_cast<size_t>(ch)](r, c) =
            ch == channel ? dominant : (ch == (channel + 1) % 3 ? off_a : off_b);
    };

    if (shape == 0) {
      const int side = std::min(10 + static_cast<int>(draw() * 7.0), size - 2);
      const int r0 = 1 + static_cast<int>(draw() * (size - side - 1));
      const int c0 = 1 + static_cast<int>(draw() * (size - side - 1));
      for (int r = r0; r < r0 + side; ++r)
        for (int c = c0; c < c0 + side; ++c) paint(r, c);
    } else {
      const int rad = std::min(5 + static_cast<int>(draw() * 4.0), (size - 2) / 2);
      const int cr = rad + static_cast<int>(draw() * (size - 2 * rad));
      const int cc = rad + static_cast<int>(draw() * (size - 2 * rad));
      for (int r = cr - rad; r <= cr + rad; ++r)
        for (int c = cc - rad; c <= cc + rad; ++c)
          if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) paint(r, c);
    }

    d.scenes.push_back(std::move(scene));
    d.labels.push_back(label);
    d.ids.push_back(static_cast<uint64_t>(i));
  }
  return d;
}

Dataset grayscale_collapse(const Dataset& data) {
  data.validate();
  Dataset out;
  out.size = data.size;
  out.classes = data.classes;
  out.labels = data.labels;
  out.ids = data.ids;
  out.scenes.reserve(data.scenes.size());
  for (const SceneImage& s : data.scenes) {
    SceneImage g;
    g.size = s.size;
    g.provenance = s.provenance + " collapsed";
    g.channels.assign(1, s.channels.front());
    for (size_t c = 1; c < s.channels.size(); ++c)
      simd::active().axpy(1.0, s.channels[c].data(), g.channels[0].data(),
                          g.channels[0].size());
    out.scenes.push_back(std::move(g));
  }
  return out;
}

Grid<double> resolve_xtalk(const Grid<double>& given, int channels, bool calibrate_gain) {
  if (given.rows == 0) return identity_matrix(channels);
  if (given.rows != channels || given.cols != channels)
    throw InvalidInput("cross-talk matrix does not match the channel count");
  Grid<double> m = given;
  if (calibrate_gain) {
    double diag = 0.0;
    for (int i = 0; i < channels; ++i) diag += m(i, i);
    diag /= channels;
    if (!(diag > 0.0)) throw InvalidInput("cross-talk diagonal must be positive to calibrate");
    simd::active().scale(1.0 / diag, m.v.data(), m.v.size());
  }
  return m;
}

EvalResult evaluate_digital(const KernelSet& kernels, const SuffixNetwork& net,
                            const Dataset& data) {
  data.validate();
  EvalResult res;
  res.confusion = Grid<int>(data.classes, data.classes);
  int correct = 0;
  for (int i = 0; i < data.count(); ++i) {
    const auto probs = digital_baseline_forward(kernels, net, data.scenes[static_cast<size_t>(i)]);
    const int pred = argmax(probs);
    const int label = data.labels[static_cast<size_t>(i)];
    res.confusion(label, pred) += 1;
    if (pred == label) ++correct;
    res.mean_loss += log_loss(probs, label);
  }
  res.accuracy = static_cast<double>(correct) / data.count();
  res.mean_loss /= data.count();
  return res;
}

std::vector<RealGrid> hybrid_features(const OpticalPipeline& pipe, const HybridSystem& sys,
                                      const SceneImage& scene, const NoisePolicy& noise,
                                      uint64_t seed, uint64_t stream) {
  SceneSpectra sf = scene_spectra(scene, pipe.n);
  RealGrid clean = forward_clean(pipe.spectra, sf);
  NoiseModel nm;
  nm.mean = noise.mean;
  nm.proportionality = noise.proportionality;
  nm.seed = seed;
  nm.stream = stream;
  SensorImage img = capture({std::move(clean)}, nm);
  std::vector<RealGrid> feats = extract_feature_map(img.values, sys.layout, sys.scene_size);
  for (RealGrid& f : feats) simd::active().scale(sys.feature_scale, f.data(), f.size());
  return feats;
}

EvalResult evaluate_hybrid(const HybridSystem& sys, const SuffixNetwork& net,
                           const Dataset& data, const NoisePolicy& noise, uint64_t seed,
                           uint64_t stream_base) {
  data.validate();
  OpticalPipeline pipe = build_optical_pipeline(sys.phase, CrossTalkMatrix{sys.xtalk, false});
  EvalResult res;
  res.confusion = Grid<int>(data.classes, data.classes);
  int correct = 0;
  for (int i = 0; i < data.count(); ++i) {
    const auto feats = hybrid_features(pipe, sys, data.scenes[static_cast<size_t>(i)], noise,
                                       seed, stream_base + data.ids[static_cast<size_t>(i)]);
    const auto probs = suffix_forward(net, feats);
    const int pred = argmax(probs);
    const int label = data.labels[static_cast<size_t>(i)];
    res.confusion(label, pred) += 1;
    if (pred == label) ++correct;
    res.mean_loss += log_loss(probs, label);
  }
  res.accuracy = static_cast<double>(correct) / data.count();
  res.mean_loss /= data.count();
  return res;
}

RunReport train_three_step(const ExperimentSetup& setup, const Dataset& train,
                           const Dataset& test, TrainedArtifacts* artifacts) {
  const auto t0 = std::chrono::steady_clock::now();
  check_dataset_pair(train, test);
  if (setup.kernel_count < 1 || setup.kernel_size < 1 || setup.pad < 0)
    throw InvalidInput("kernel geometry must be positive");
  if (setup.step1.epochs < 1 || setup.step1.batch < 1 || setup.step3.batch < 1 ||
      setup.step3.epochs < 0)
    throw InvalidInput("schedule epochs/batch sizes are out of range");
  if (train.size > setup.kernel_size + 2 * setup.pad)
    throw LayoutError("scene windows exceed the tile spacing; increase pad");

  const int channels = train.scenes.front().channel_count();
  const int s = train.size;
  const int classes = train.classes;
  const uint64_t seed = setup.seed;

  RunReport report;
  report.xtalk = effective_xtalk(setup, channels);

  // ---- step 1: all-digital pre-training -------------------------------
  KernelSet kernels;
  kernels.k = setup.kernel_size;
  kernels.channels = channels;
  kernels.w.assign(static_cast<size_t>(setup.kernel_count),
                   std::vector<RealGrid>(static_cast<size_t>(channels),
                                         RealGrid(setup.kernel_size, setup.kernel_size)));
  for (int j = 0; j < setup.kernel_count; ++j)
    for (int c = 0; c < channels; ++c) {
      RealGrid& w = kernels.w[static_cast<size_t>(j)][static_cast<size_t>(c)];
      const uint64_t stream =
          rng::stream::kKernelInit + static_cast<uint64_t>(j) * channels + c;
      for (size_t i = 0; i < w.v.size(); ++i)
        w.v[i] = 0.2 * (2.0 * rng::uniform(seed, stream, i) - 1.0);
    }

  SuffixNetwork net = make_suffix_net(setup.kernel_count, s, setup.hidden, classes, seed);

  AdamGroup adam1;
  std::vector<int> kernel_slots;
  for (const auto& per : kernels.w)
    for (const RealGrid& w : per) kernel_slots.push_back(adam1.add(w.v.size()));
  SuffixAdamSlots net_slots(adam1, net);

  SuffixGradBuffer net_grad(net);
  KernelSet kernel_grad = kernels;  // shape template, zeroed per batch

  int epoch_counter = 0;
  for (int epoch = 0; epoch < setup.step1.epochs; ++epoch, ++epoch_counter) {
    const auto order = epoch_order(train.count(), seed,
                                   rng::stream::kShuffle + static_cast<uint64_t>(epoch_counter));
    double epoch_loss = 0.0;
    for (int at = 0; at < train.count(); at += setup.step1.batch) {
      const int m = std::min(setup.step1.batch, train.count() - at);
      net_grad.clear();
      for (auto& per : kernel_grad.w)
        for (RealGrid& w : per) std::fill(w.v.begin(), w.v.end(), 0.0);
      for (int b = 0; b < m; ++b) {
        const int idx = order[static_cast<size_t>(at + b)];
        const SceneImage& scene = train.scenes[static_cast<size_t>(idx)];
        const int label = train.labels[static_cast<size_t>(idx)];
        const auto feats = digital_conv_features(kernels, scene);
        epoch_loss += log_loss(suffix_forward(net, feats), label);
        SuffixGradients sg = suffix_backward(net, feats, label);
        KernelSet kg = digital_conv_backward(kernels, scene, sg.features);
        net_grad.add(sg);
        for (size_t t = 0; t < kernel_grad.w.size(); ++t)
          for (size_t c = 0; c < kernel_grad.w[t].size(); ++c)
            simd::active().axpy(1.0, kg.w[t][c].v.data(), kernel_grad.w[t][c].v.data(),
                                kg.w[t][c].v.size());
      }
      const double inv = 1.0 / m;
      net_grad.scale(inv);
      adam1.begin_step();
      int slot = 0;
      for (size_t t = 0; t < kernels.w.size(); ++t)
        for (size_t c = 0; c < kernels.w[t].size(); ++c, ++slot) {
          simd::active().scale(inv, kernel_grad.w[t][c].v.data(), kernel_grad.w[t][c].v.size());
          adam1.update(kernel_slots[static_cast<size_t>(slot)], setup.step1.learning_rate,
                       kernel_grad.w[t][c].v.data(), kernels.w[t][c].v.data(),
                       kernels.w[t][c].v.size());
        }
      net_slots.apply(adam1, setup.step1.learning_rate, net_grad, net);
    }
    report.step1_losses.push_back(epoch_loss / train.count());
  }
  report.step1_train_accuracy = evaluate_digital(kernels, net, train).accuracy;
  report.step1_test_accuracy = evaluate_digital(kernels, net, test).accuracy;
  report.completed_steps = 1;

  // ---- step 2: phase fit to the trained first layer -------------------
  TargetPsf target = build_target_psf(kernels, setup.pad, setup.mask_n);
  OptimizerConfig phase_cfg = setup.step2;
  phase_cfg.seed = seed;

  HybridSystem sys;
  sys.layout = target.layout;
  sys.xtalk = report.xtalk;
  sys.feature_scale = 1.0 / target.layout.norm_scale_mean;
  sys.scene_size = s;

  OptimizationTrace trace;
  try {
    auto [phase, tr] = optimize_phase(target, phase_cfg);
    sys.phase = std::move(phase);
    trace = std::move(tr);
  } catch (const DivergenceError& e) {
    report.step2_initial_loss = e.trace.initial_loss;
    report.step2_final_loss = e.trace.losses.empty() ? 0.0 : e.trace.losses.back();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    throw TrainingAborted(std::string("phase optimization diverged: ") + e.what(), report);
  }
  report.step2_initial_loss = trace.initial_loss;
  report.step2_final_loss = trace.final_loss;
  report.step2_test_accuracy =
      evaluate_hybrid(sys, net, test, setup.noise, seed, rng::stream::kNoiseTest).accuracy;
  report.completed_steps = 2;

  // ---- step 3: joint fine-tune through the simulated optics -----------
  SuffixNetwork hybrid_net = net;
  AdamGroup adam3;
  std::vector<int> phase_slots;
  for (const RealGrid& ch : sys.phase.channels) phase_slots.push_back(adam3.add(ch.v.size()));
  SuffixAdamSlots hybrid_slots(adam3, hybrid_net);
  SuffixGradBuffer hybrid_grad(hybrid_net);
  std::vector<RealGrid> phase_grad(sys.phase.channels.size(),
                                   RealGrid(setup.mask_n, setup.mask_n));

  const CrossTalkMatrix xtalk_mix{sys.xtalk, false};
  for (int epoch = 0; epoch < setup.step3.epochs; ++epoch, ++epoch_counter) {
    const auto order = epoch_order(train.count(), seed,
                                   rng::stream::kShuffle + static_cast<uint64_t>(epoch_counter));
    double epoch_loss = 0.0;
    for (int at = 0; at < train.count(); at += setup.step3.batch) {
      const int m = std::min(setup.step3.batch, train.count() - at);
      OpticalPipeline pipe = build_optical_pipeline(sys.phase, xtalk_mix);
      hybrid_grad.clear();
      for (RealGrid& g : phase_grad) std::fill(g.v.begin(), g.v.end(), 0.0);
      for (int b = 0; b < m; ++b) {
        const int idx = order[static_cast<size_t>(at + b)];
        const SceneImage& scene = train.scenes[static_cast<size_t>(idx)];
        const int label = train.labels[static_cast<size_t>(idx)];
        const uint64_t noise_stream =
            rng::stream::kNoiseTrain + train.ids[static_cast<size_t>(idx)];
        SceneSpectra sf = scene_spectra(scene, pipe.n);
        RealGrid clean = forward_clean(pipe.spectra, sf);
        NoiseModel nm;
        nm.mean = setup.noise.mean;
        nm.proportionality = setup.noise.proportionality;
        nm.seed = seed;
        nm.stream = noise_stream;
        SensorImage img = capture({std::move(clean)}, nm);
        std::vector<RealGrid> feats = extract_feature_map(img.values, sys.layout, s);
        for (RealGrid& f : feats)
          simd::active().scale(sys.feature_scale, f.data(), f.size());
        epoch_loss += log_loss(suffix_forward(hybrid_net, feats), label);
        SuffixGradients sg = suffix_backward(hybrid_net, feats, label);
        hybrid_grad.add(sg);
        // chain through the de-normalization, then back onto the sensor
        for (RealGrid& f : sg.features)
          simd::active().scale(sys.feature_scale, f.data(), f.size());
        RealGrid up = scatter_feature_gradient(sg.features, sys.layout, s);
        std::vector<RealGrid> dphase = pipeline_backward(pipe, sf, up);
        for (size_t c = 0; c < dphase.size(); ++c)
          simd::active().axpy(1.0, dphase[c].v.data(), phase_grad[c].v.data(),
                              phase_grad[c].v.size());
      }
      const double inv = 1.0 / m;
      hybrid_grad.scale(inv);
      adam3.begin_step();
      for (size_t c = 0; c < phase_grad.size(); ++c) {
        simd::active().scale(inv, phase_grad[c].v.data(), phase_grad[c].v.size());
        adam3.update(phase_slots[c], setup.step3_phase_rate, phase_grad[c].v.data(),
                     sys.phase.channels[c].v.data(), sys.phase.channels[c].v.size());
      }
      hybrid_slots.apply(adam3, setup.step3.learning_rate, hybrid_grad, hybrid_net);
    }
    report.step3_losses.push_back(epoch_loss / train.count());
  }
  report.step3_train_accuracy =
      evaluate_hybrid(sys, hybrid_net, train, setup.noise, seed, rng::stream::kNoiseTrain)
          .accuracy;
  report.step3_test_accuracy =
      evaluate_hybrid(sys, hybrid_net, test, setup.noise, seed, rng::stream::kNoiseTest)
          .accuracy;
  report.completed_steps = 3;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (artifacts) {
    artifacts->kernels = std::move(kernels);
    artifacts->digital_net = std::move(net);
    artifacts->target = std::move(target);
    artifacts->step2_trace = std::move(trace);
    artifacts->system = std::move(sys);
    artifacts->hybrid_net = std::move(hybrid_net);
  }
  return report;
}

}  // namespace mcf
