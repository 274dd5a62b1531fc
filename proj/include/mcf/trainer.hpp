#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcf/errors.hpp"
#include "mcf/grid.hpp"
#include "mcf/kernel_layout.hpp"
#include "mcf/optical_layer.hpp"
#include "mcf/phase_optimizer.hpp"
#include "mcf/suffix_net.hpp"

namespace mcf {

struct Dataset {
  int size = 0;     // scene side length
  int classes = 0;  // labels are 0 .. classes-1
  std::vector<SceneImage> scenes;
  std::vector<int> labels;
  std::vector<uint64_t> ids;  // stable per-sample ids; noise streams key on these

  int count() const { return static_cast<int>(scenes.size()); }
  void validate() const;
};

// Colored geometric shapes on a dim noisy background. Classes are
// (shape, dominant channel) pairs, so channel-aware processing is needed
// to separate classes that share a shape.
Dataset make_synthetic_dataset(int num_classes, int samples_per_class, int size,
                               uint64_t seed);

// Channel-summed single-channel copy; ablation tool for showing that the
// color information carries class signal.
Dataset grayscale_collapse(const Dataset& data);

struct NoisePolicy {
  double mean = 0.0;
  double proportionality = 0.0;  // 0 disables sensor noise
};

struct StepSchedule {
  int epochs = 0;
  double learning_rate = 0.0;
  int batch = 32;
};

struct ExperimentSetup {
  int kernel_count = 8;
  int kernel_size = 3;
  int pad = 16;
  int mask_n = 256;
  int hidden = 64;

  StepSchedule step1{15, 1e-3, 32};
  OptimizerConfig step2;            // iterations/learning rate for the phase fit
  StepSchedule step3{3, 1e-4, 32};  // suffix fine-tune rate
  double step3_phase_rate = 0.005;  // phase fine-tune rate

  NoisePolicy noise;       // hybrid path, training and evaluation
  Grid<double> xtalk;      // empty means identity
  bool calibrate_gain = true;  // divide the matrix by its mean diagonal entry

  uint64_t seed = 0;

  ExperimentSetup() {
    step2.iterations = 800;
    step2.seed = 0;
  }
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  Grid<int> confusion;  // [true][predicted]
};

// Everything the simulated capture path needs at inference time.
struct HybridSystem {
  PhaseProfile phase;
  TileLayout layout;
  Grid<double> xtalk;
  double feature_scale = 1.0;  // undoes the target normalization
  int scene_size = 0;
};

struct TrainedArtifacts {
  KernelSet kernels;          // step-1 first layer
  SuffixNetwork digital_net;  // step-1 suffix (the all-digital baseline)
  TargetPsf target;
  OptimizationTrace step2_trace;
  HybridSystem system;        // phase after step 3 (or step 2 if epochs = 0)
  SuffixNetwork hybrid_net;   // suffix after step 3
};

struct RunReport {
  int completed_steps = 0;

  std::vector<double> step1_losses;  // per-epoch mean training loss
  double step1_train_accuracy = 0.0;
  double step1_test_accuracy = 0.0;  // the all-digital baseline accuracy

  double step2_initial_loss = 0.0;
  double step2_final_loss = 0.0;
  double step2_test_accuracy = 0.0;  // hybrid before fine-tuning

  std::vector<double> step3_losses;
  double step3_train_accuracy = 0.0;
  double step3_test_accuracy = 0.0;  // hybrid after fine-tuning

  Grid<double> xtalk;  // matrix actually applied (after calibration)
  double wall_seconds = 0.0;
};

// Carries whatever was measured before the aborting step.
struct TrainingAborted : RuntimeFailure {
  RunReport partial;
  TrainingAborted(const std::string& msg, RunReport report)
      : RuntimeFailure(msg), partial(std::move(report)) {}
};

// The three-step protocol: digital pre-training, phase fit to the trained
// first layer, then joint fine-tune of phase and suffix through the
// simulated optics. Noise streams are keyed per sample id, frozen across
// epochs; the cross-talk matrix is held fixed throughout.
RunReport train_three_step(const ExperimentSetup& setup, const Dataset& train,
                           const Dataset& test, TrainedArtifacts* artifacts = nullptr);

EvalResult evaluate_digital(const KernelSet& kernels, const SuffixNetwork& net,
                            const Dataset& data);

// The matrix the pipeline actually applies: empty input means identity;
// calibration divides by the mean diagonal entry (gain trim).
Grid<double> resolve_xtalk(const Grid<double>& m, int channels, bool calibrate_gain);

// stream_base selects the noise realization family (train or test);
// per-sample streams are stream_base + sample id, so the result does not
// depend on dataset ordering.
EvalResult evaluate_hybrid(const HybridSystem& sys, const SuffixNetwork& net,
                           const Dataset& data, const NoisePolicy& noise, uint64_t seed,
                           uint64_t stream_base);

// One capture through the simulated optics: forward, noise, extraction,
// de-normalization. Exposed for inspection tools.
std::vector<RealGrid> hybrid_features(const OpticalPipeline& pipe, const HybridSystem& sys,
                                      const SceneImage& scene, const NoisePolicy& noise,
                                      uint64_t seed, uint64_t stream);

}  // namespace mcf
