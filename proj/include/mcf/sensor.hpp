#pragma once

#include <cstdint>
#include <vector>

#include "mcf/grid.hpp"

namespace mcf {

// Signal-proportional Gaussian noise: each element receives an independent
// draw with mean `mean` and sigma = proportionality * |signal|. A zero
// proportionality disables the random part exactly.
struct NoiseModel {
  double mean = 0.0;
  double proportionality = 0.01;
  uint64_t seed = 0;
  uint64_t stream = 0;
  bool clamp_negative = false;

  void validate() const;
};

struct SensorImage {
  RealGrid values;
  double normalization = 1.0;
  uint64_t seed = 0;
  uint64_t stream = 0;
  double noise_mean = 0.0;
  double noise_proportionality = 0.0;
};

// One Gaussian draw per element, keyed by (seed, stream, element index);
// evaluation order never changes the result.
RealGrid sample_noise(const RealGrid& signal, const NoiseModel& noise);

// Sums the per-channel planes (the detector sees one monochrome image)
// and applies the noise model to the summed signal.
SensorImage capture(const std::vector<RealGrid>& channel_contributions,
                    const NoiseModel& noise);

}  // namespace mcf
