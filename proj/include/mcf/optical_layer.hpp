#pragma once

#include <string>
#include <vector>

#include "mcf/fourier_optics.hpp"
#include "mcf/grid.hpp"
#include "mcf/sensor.hpp"
#include "mcf/spectral.hpp"

namespace mcf {

// Multi-channel input intensity, square planes of side size.
struct SceneImage {
  int size = 0;
  std::vector<RealGrid> channels;
  std::string provenance;

  int channel_count() const { return int(channels.size()); }
  void validate() const;
};

// Per input channel c: sum over sensed channels cp of xtalk(cp, c) times
// that channel's PSF. This is the kernel the scene channel is actually
// convolved with on the detector.
struct EffectivePsfSet {
  int n = 0;
  std::vector<RealGrid> values;
};

EffectivePsfSet mix_psfs(const std::vector<RealGrid>& raw_psfs,
                         const CrossTalkMatrix& xtalk);
EffectivePsfSet effective_psfs(const PhaseProfile& phase,
                               const CrossTalkMatrix& xtalk);

// Frequency-domain effective PSFs on the zero-padded (2n) plane, fixed
// per phase profile and reused across scenes.
struct PsfSpectra {
  int n = 0;
  int padded = 0;
  std::vector<CplxGrid> spectra;
};

PsfSpectra precompute_psf_spectra(const EffectivePsfSet& psfs);

// Frequency-domain scene channels, zero-embedded at the centre of the
// n plane and zero-padded to 2n. Reused by forward and backward.
struct SceneSpectra {
  int n = 0;
  int padded = 0;
  std::vector<CplxGrid> fwd;
};

SceneSpectra scene_spectra(const SceneImage& scene, int n);

// Noise-free detector plane: per channel, linear (zero-padded, not
// circular) convolution of the embedded scene with its effective PSF,
// all channels summed. Output side n covers every tile window.
RealGrid forward_clean(const PsfSpectra& psfs, const SceneSpectra& scene);

// Everything the backward pass needs that does not depend on the scene.
struct OpticalPipeline {
  int n = 0;
  int meta_channels = 0;
  int input_channels = 0;
  std::vector<ChannelField> fields;  // per sensed channel: t, u
  Grid<double> xtalk;
  PsfSpectra spectra;
};

OpticalPipeline build_optical_pipeline(const PhaseProfile& phase,
                                       const CrossTalkMatrix& xtalk);

SensorImage optical_forward(const SceneImage& scene, const PhaseProfile& phase,
                            const CrossTalkMatrix& xtalk, const NoiseModel& noise);

// d(loss)/d(phase) for a loss whose gradient with respect to the clean
// detector plane is `upstream`. Backpropagates through the channel sum,
// the cross-talk mixing, the linear convolution (adjoint: correlation
// with the embedded scene) and the PSF-from-phase map. Additive noise
// passes gradients straight through.
std::vector<RealGrid> pipeline_backward(const OpticalPipeline& pipe,
                                        const SceneSpectra& scene,
                                        const RealGrid& upstream);

std::vector<RealGrid> optical_backward(const SceneImage& scene,
                                       const PhaseProfile& phase,
                                       const CrossTalkMatrix& xtalk,
                                       const RealGrid& upstream);

}  // namespace mcf
