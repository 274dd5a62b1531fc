#include "mcf/suffix_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mcf/errors.hpp"
#include "mcf/rng.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

void check_finite(const double* p, size_t n, const char* what) {
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) throw InvalidInput(std::string(what) + " contains a non-finite value");
  }
}

std::vector<double> flatten(const SuffixNetwork& net,
                            const std::vector<RealGrid>& features) {
  if (static_cast<int>(features.size()) != net.feature_maps)
    throw InvalidInput("feature map count does not match the network input");
  const int s = net.feature_size;
  std::vector<double> x(static_cast<size_t>(net.input_size()));
  size_t at = 0;
  for (const RealGrid& f : features) {
    if (f.rows != s || f.cols != s)
      throw InvalidInput("feature map shape does not match the network input");
    std::copy(f.v.begin(), f.v.end(), x.begin() + at);
    at += f.v.size();
  }
  return x;
}

struct ForwardState {
  std::vector<double> x;      // flattened input
  std::vector<double> pre;    // hidden pre-activation
  std::vector<double> h;      // hidden post-ReLU
  std::vector<double> probs;  // softmax output
};

ForwardState run_forward(const SuffixNetwork& net,
                         const std::vector<RealGrid>& features) {
  net.validate();
  ForwardState st;
  st.x = flatten(net, features);
  const simd::Kernels& k = simd::active();

  st.pre.resize(static_cast<size_t>(net.hidden));
  st.h.resize(static_cast<size_t>(net.hidden));
  const size_t in = st.x.size();
  for (int j = 0; j < net.hidden; ++j) {
    const double a = k.dot(net.w1.row(j), st.x.data(), in) + net.b1[static_cast<size_t>(j)];
    st.pre[static_cast<size_t>(j)] = a;
    st.h[static_cast<size_t>(j)] = a > 0.0 ? a : 0.0;
  }

  std::vector<double> logits(static_cast<size_t>(net.classes));
  for (int c = 0; c < net.classes; ++c)
    logits[static_cast<size_t>(c)] =
        k.dot(net.w2.row(c), st.h.data(), st.h.size()) + net.b2[static_cast<size_t>(c)];

  const double hi = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  st.probs.resize(logits.size());
  for (size_t c = 0; c < logits.size(); ++c) {
    st.probs[c] = std::exp(logits[c] - hi);
    z += st.probs[c];
  }
  for (double& p : st.probs) p /= z;
  return st;
}

}  // namespace

void SuffixNetwork::validate() const {
  if (feature_maps <= 0 || feature_size <= 0) throw InvalidInput("suffix network input shape must be positive");
  if (hidden <= 0) throw InvalidInput("suffix network hidden width must be positive");
  if (classes < 2) throw InvalidInput("suffix network needs at least two classes");
  if (w1.rows != hidden || w1.cols != input_size() || static_cast<int>(b1.size()) != hidden)
    throw InvalidInput("first dense layer has the wrong shape");
  if (w2.rows != classes || w2.cols != hidden || static_cast<int>(b2.size()) != classes)
    throw InvalidInput("second dense layer has the wrong shape");
  check_finite(w1.v.data(), w1.v.size(), "dense layer 1 weights");
  check_finite(b1.data(), b1.size(), "dense layer 1 bias");
  check_finite(w2.v.data(), w2.v.size(), "dense layer 2 weights");
  check_finite(b2.data(), b2.size(), "dense layer 2 bias");
}

SuffixNetwork make_suffix_net(int feature_maps, int feature_size, int hidden,
                              int classes, uint64_t seed) {
  SuffixNetwork net;
  net.feature_maps = feature_maps;
  net.feature_size = feature_size;
  net.hidden = hidden;
  net.classes = classes;
  const int in = net.input_size();
  net.w1 = Grid<double>(hidden, in);
  net.b1.assign(static_cast<size_t>(hidden), 0.0);
  net.w2 = Grid<double>(classes, hidden);
  net.b2.assign(static_cast<size_t>(classes), 0.0);

  const double a1 = std::sqrt(6.0 / (in + hidden));
  for (size_t i = 0; i < net.w1.v.size(); ++i)
    net.w1.v[i] = a1 * (2.0 * rng::uniform(seed, rng::stream::kNetInit, i) - 1.0);
  const double a2 = std::sqrt(6.0 / (hidden + classes));
  for (size_t i = 0; i < net.w2.v.size(); ++i)
    net.w2.v[i] = a2 * (2.0 * rng::uniform(seed, rng::stream::kNetInit + 1, i) - 1.0);
  net.validate();
  return net;
}

std::vector<double> suffix_forward(const SuffixNetwork& net,
                                   const std::vector<RealGrid>& features) {
  return run_forward(net, features).probs;
}

double log_loss(const std::vector<double>& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size()))
    throw InvalidInput("class label out of range");
  return -std::log(std::max(probs[static_cast<size_t>(label)], 1e-12));
}

SuffixGradients suffix_backward(const SuffixNetwork& net,
                                const std::vector<RealGrid>& features, int label) {
  if (label < 0 || label >= net.classes) throw InvalidInput("class label out of range");
  const ForwardState st = run_forward(net, features);
  const simd::Kernels& k = simd::active();

  SuffixGradients g;
  g.w1 = Grid<double>(net.hidden, net.w1.cols);
  g.b1.assign(static_cast<size_t>(net.hidden), 0.0);
  g.w2 = Grid<double>(net.classes, net.hidden);
  g.b2.assign(static_cast<size_t>(net.classes), 0.0);

  // Softmax + log loss collapse to probs - onehot(label).
  std::vector<double> dlogits = st.probs;
  dlogits[static_cast<size_t>(label)] -= 1.0;

  std::vector<double> dh(static_cast<size_t>(net.hidden), 0.0);
  for (int c = 0; c < net.classes; ++c) {
    const double d = dlogits[static_cast<size_t>(c)];
    g.b2[static_cast<size_t>(c)] = d;
    k.axpy(d, st.h.data(), g.w2.row(c), st.h.size());
    k.axpy(d, net.w2.row(c), dh.data(), dh.size());
  }

  std::vector<double> dx(st.x.size(), 0.0);
  for (int j = 0; j < net.hidden; ++j) {
    if (st.pre[static_cast<size_t>(j)] <= 0.0) continue;
    const double d = dh[static_cast<size_t>(j)];
    g.b1[static_cast<size_t>(j)] = d;
    k.axpy(d, st.x.data(), g.w1.row(j), st.x.size());
    k.axpy(d, net.w1.row(j), dx.data(), dx.size());
  }

  const int s = net.feature_size;
  g.features.assign(static_cast<size_t>(net.feature_maps), RealGrid(s, s));
  size_t at = 0;
  for (RealGrid& f : g.features) {
    std::copy(dx.begin() + at, dx.begin() + at + f.v.size(), f.v.begin());
    at += f.v.size();
  }
  return g;
}

std::vector<RealGrid> digital_conv_features(const KernelSet& kernels,
                                            const SceneImage& scene) {
  kernels.validate();
  scene.validate();
  if (scene.channel_count() != kernels.channels)
    throw InvalidInput("scene channel count does not match the kernel set");
  const int s = scene.size;
  const int half = kernels.k / 2;
  std::vector<RealGrid> out(static_cast<size_t>(kernels.count()), RealGrid(s, s));
  for (int j = 0; j < kernels.count(); ++j) {
    RealGrid& f = out[static_cast<size_t>(j)];
    for (int c = 0; c < kernels.channels; ++c) {
      const RealGrid& w = kernels.w[static_cast<size_t>(j)][static_cast<size_t>(c)];
      const RealGrid& img = scene.channels[static_cast<size_t>(c)];
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          double acc = 0.0;
          for (int dr = -half; dr <= half; ++dr) {
            const int sy = y - dr;
            if (sy < 0 || sy >= s) continue;
            for (int dc = -half; dc <= half; ++dc) {
              const int sx = x - dc;
              if (sx < 0 || sx >= s) continue;
              acc += w(half + dr, half + dc) * img(sy, sx);
            }
          }
          f(y, x) += acc;
        }
    }
  }
  return out;
}

KernelSet digital_conv_backward(const KernelSet& kernels, const SceneImage& scene,
                                const std::vector<RealGrid>& dfeatures) {
  kernels.validate();
  scene.validate();
  if (scene.channel_count() != kernels.channels)
    throw InvalidInput("scene channel count does not match the kernel set");
  if (static_cast<int>(dfeatures.size()) != kernels.count())
    throw InvalidInput("feature gradient count does not match the kernel set");
  const int s = scene.size;
  const int half = kernels.k / 2;
  KernelSet g;
  g.k = kernels.k;
  g.channels = kernels.channels;
  g.w.assign(static_cast<size_t>(kernels.count()),
             std::vector<RealGrid>(static_cast<size_t>(kernels.channels),
                                   RealGrid(kernels.k, kernels.k)));
  for (int j = 0; j < kernels.count(); ++j) {
    const RealGrid& df = dfeatures[static_cast<size_t>(j)];
    if (df.rows != s || df.cols != s)
      throw InvalidInput("feature gradient shape does not match the scene");
    for (int c = 0; c < kernels.channels; ++c) {
      const RealGrid& img = scene.channels[static_cast<size_t>(c)];
      RealGrid& gw = g.w[static_cast<size_t>(j)][static_cast<size_t>(c)];
      for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc) {
          double acc = 0.0;
          for (int y = 0; y < s; ++y) {
            const int sy = y - dr;
            if (sy < 0 || sy >= s) continue;
            for (int x = 0; x < s; ++x) {
              const int sx = x - dc;
              if (sx < 0 || sx >= s) continue;
              acc += df(y, x) * img(sy, sx);
            }
          }
          gw(half + dr, half + dc) = acc;
        }
    }
  }
  return g;
}

std::vector<double> digital_baseline_forward(const KernelSet& kernels,
                                             const SuffixNetwork& net,
                                             const SceneImage& scene) {
  return suffix_forward(net, digital_conv_features(kernels, scene));
}

}  // namespace mcf
