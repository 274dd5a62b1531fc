#pragma once

#include <cstdint>
#include <vector>

#include "mcf/grid.hpp"
#include "mcf/kernel_layout.hpp"
#include "mcf/optical_layer.hpp"

namespace mcf {

// Classifier head shared by the digital reference path and the simulated
// optical path: flatten -> dense(hidden, ReLU) -> dense(classes) -> softmax.
struct SuffixNetwork {
  int feature_maps = 0;  // K input planes
  int feature_size = 0;  // side of each plane
  int hidden = 64;
  int classes = 0;
  Grid<double> w1;         // hidden x (K * S * S)
  std::vector<double> b1;  // hidden
  Grid<double> w2;         // classes x hidden
  std::vector<double> b2;  // classes

  int input_size() const { return feature_maps * feature_size * feature_size; }
  void validate() const;
};

// Glorot-uniform weights, zero biases, reproducible from the seed.
SuffixNetwork make_suffix_net(int feature_maps, int feature_size, int hidden,
                              int classes, uint64_t seed);

std::vector<double> suffix_forward(const SuffixNetwork& net,
                                   const std::vector<RealGrid>& features);

// -ln(probs[label]), probability clamped below at 1e-12.
double log_loss(const std::vector<double>& probs, int label);

struct SuffixGradients {
  Grid<double> w1;
  std::vector<double> b1;
  Grid<double> w2;
  std::vector<double> b2;
  std::vector<RealGrid> features;  // d(loss)/d(input features)
};

// Gradients of log_loss(suffix_forward(net, features), label) with
// respect to every parameter and to the features themselves.
SuffixGradients suffix_backward(const SuffixNetwork& net,
                                const std::vector<RealGrid>& features, int label);

// Layer-1 of the all-digital reference: per kernel, channel-summed true
// convolution with same-size zero padding.
std::vector<RealGrid> digital_conv_features(const KernelSet& kernels,
                                            const SceneImage& scene);

// d(loss)/d(kernels) given d(loss)/d(features) from the same scene.
KernelSet digital_conv_backward(const KernelSet& kernels, const SceneImage& scene,
                                const std::vector<RealGrid>& dfeatures);

// The complete digital reference path: exact convolution plus the same
// suffix network the optical path uses.
std::vector<double> digital_baseline_forward(const KernelSet& kernels,
                                             const SuffixNetwork& net,
                                             const SceneImage& scene);

}  // namespace mcf
