#include "mcf/sensor.hpp"

#include <cmath>

#include "mcf/errors.hpp"
#include "mcf/rng.hpp"
#include "mcf/simd.hpp"

namespace mcf {

void NoiseModel::validate() const {
  if (!(proportionality >= 0.0) || !std::isfinite(proportionality))
    throw InvalidInput("noise model: proportionality must be finite and >= 0");
  if (!std::isfinite(mean)) throw InvalidInput("noise model: mean must be finite");
}

RealGrid sample_noise(const RealGrid& signal, const NoiseModel& noise) {
  noise.validate();
  RealGrid out(signal.rows, signal.cols);
  const double k = noise.proportionality;
  const double mu = noise.mean;
  if (k == 0.0) {
    for (auto& v : out.v) v = mu;
    return out;
  }
  for (size_t i = 0; i < signal.size(); ++i) {
    double z = rng::gaussian(noise.seed, noise.stream, i);
    out.v[i] = mu + k * std::abs(signal.v[i]) * z;
  }
  return out;
}

SensorImage capture(const std::vector<RealGrid>& channel_contributions,
                    const NoiseModel& noise) {
  noise.validate();
  if (channel_contributions.empty())
    throw InvalidInput("capture: need at least one channel contribution");
  const RealGrid& first = channel_contributions.front();
  for (const auto& g : channel_contributions) {
    if (!g.same_shape(first)) throw InvalidInput("capture: channel shape mismatch");
    for (double v : g.v)
      if (!std::isfinite(v)) throw InvalidInput("capture: non-finite contribution");
  }

  SensorImage img;
  img.values = first;
  for (size_t c = 1; c < channel_contributions.size(); ++c)
    simd::active().axpy(1.0, channel_contributions[c].data(), img.values.data(),
                        img.values.size());

  if (noise.proportionality != 0.0 || noise.mean != 0.0) {
    RealGrid n = sample_noise(img.values, noise);
    simd::active().axpy(1.0, n.data(), img.values.data(), img.values.size());
  }
  if (noise.clamp_negative)
    for (auto& v : img.values.v)
      if (v < 0.0) v = 0.0;

  img.seed = noise.seed;
  img.stream = noise.stream;
  img.noise_mean = noise.mean;
  img.noise_proportionality = noise.proportionality;
  return img;
}

}  // namespace mcf
