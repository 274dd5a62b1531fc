#include "mcf/optical_layer.hpp"

#include <cmath>

#include "mcf/errors.hpp"
#include "mcf/fft.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

void check_xtalk(const CrossTalkMatrix& xtalk, int meta_channels, int input_channels) {
  if (xtalk.entries.rows != meta_channels || xtalk.entries.cols != input_channels)
    throw InvalidInput("cross-talk matrix shape does not match channel counts");
}

int embed_offset(int n, int s) {
  if (s < 1 || s > n) throw InvalidInput("scene does not fit the output plane");
  if ((n - s) % 2 != 0) throw InvalidInput("scene and plane sizes differ by an odd margin");
  return (n - s) / 2;
}

}  // namespace

void SceneImage::validate() const {
  if (size < 1) throw InvalidInput("scene: empty");
  if (channels.empty()) throw InvalidInput("scene: no channels");
  for (const auto& ch : channels) {
    if (ch.rows != size || ch.cols != size)
      throw InvalidInput("scene: channel plane is not size x size");
    for (double v : ch.v) {
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidInput("scene: intensities must be finite and nonnegative");
    }
  }
}

EffectivePsfSet mix_psfs(const std::vector<RealGrid>& raw_psfs,
                         const CrossTalkMatrix& xtalk) {
  if (raw_psfs.empty()) throw InvalidInput("mix_psfs: no PSF channels");
  const int meta = int(raw_psfs.size());
  const int inputs = xtalk.entries.cols;
  check_xtalk(xtalk, meta, inputs);
  const int n = raw_psfs.front().rows;
  for (const auto& p : raw_psfs)
    if (p.rows != n || p.cols != n) throw InvalidInput("mix_psfs: PSF shape mismatch");

  EffectivePsfSet out;
  out.n = n;
  out.values.assign(std::size_t(inputs), RealGrid(n, n));
  for (int c = 0; c < inputs; ++c)
    for (int cp = 0; cp < meta; ++cp)
      simd::active().axpy(xtalk.entries(cp, c), raw_psfs[std::size_t(cp)].data(),
                          out.values[std::size_t(c)].data(), std::size_t(n) * n);
  return out;
}

EffectivePsfSet effective_psfs(const PhaseProfile& phase, const CrossTalkMatrix& xtalk) {
  PsfImage psf = psf_from_phase(phase);
  return mix_psfs(psf.channels, xtalk);
}

PsfSpectra precompute_psf_spectra(const EffectivePsfSet& psfs) {
  PsfSpectra out;
  out.n = psfs.n;
  out.padded = 2 * psfs.n;
  out.spectra.reserve(psfs.values.size());
  for (const auto& p : psfs.values) {
    CplxGrid g(out.padded, out.padded);
    for (int r = 0; r < psfs.n; ++r)
      for (int c = 0; c < psfs.n; ++c) g(r, c) = p(r, c);
    fft::fft2d(g, fft::Dir::forward);
    out.spectra.push_back(std::move(g));
  }
  return out;
}

SceneSpectra scene_spectra(const SceneImage& scene, int n) {
  scene.validate();
  const int e = embed_offset(n, scene.size);
  SceneSpectra out;
  out.n = n;
  out.padded = 2 * n;
  out.fwd.reserve(scene.channels.size());
  for (const auto& ch : scene.channels) {
    CplxGrid g(out.padded, out.padded);
    for (int r = 0; r < scene.size; ++r)
      for (int c = 0; c < scene.size; ++c) g(e + r, e + c) = ch(r, c);
    fft::fft2d(g, fft::Dir::forward);
    out.fwd.push_back(std::move(g));
  }
  return out;
}

RealGrid forward_clean(const PsfSpectra& psfs, const SceneSpectra& scene) {
  if (psfs.n != scene.n || psfs.padded != scene.padded)
    throw InvalidInput("forward_clean: plane size mismatch");
  if (psfs.spectra.size() != scene.fwd.size())
    throw InvalidInput("forward_clean: channel count mismatch");

  const int m = psfs.padded;
  const std::size_t sz = std::size_t(m) * m;
  CplxGrid acc(m, m);
  CplxGrid tmp(m, m);
  for (std::size_t c = 0; c < psfs.spectra.size(); ++c) {
    simd::active().cplx_mul(reinterpret_cast<const double*>(psfs.spectra[c].data()),
                            reinterpret_cast<const double*>(scene.fwd[c].data()),
                            reinterpret_cast<double*>(tmp.data()), sz);
    simd::active().axpy(1.0, reinterpret_cast<const double*>(tmp.data()),
                        reinterpret_cast<double*>(acc.data()), 2 * sz);
  }
  fft::fft2d(acc, fft::Dir::inverse);

  const int n = psfs.n;
  const int h = n / 2;
  RealGrid out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out(y, x) = acc(y + h, x + h).real() * double(m);
  return out;
}

OpticalPipeline build_optical_pipeline(const PhaseProfile& phase,
                                       const CrossTalkMatrix& xtalk) {
  phase.validate("optical pipeline phase");
  check_xtalk(xtalk, phase.channel_count(), xtalk.entries.cols);

  OpticalPipeline pipe;
  pipe.n = phase.n;
  pipe.meta_channels = phase.channel_count();
  pipe.input_channels = xtalk.entries.cols;
  pipe.xtalk = xtalk.entries;

  std::vector<RealGrid> shifted;
  shifted.reserve(std::size_t(pipe.meta_channels));
  for (const auto& ch : phase.channels) {
    ChannelField f = psf_channel_fields(ch);
    shifted.push_back(fft::fftshift(f.psf_corner));
    pipe.fields.push_back(std::move(f));
  }
  pipe.spectra = precompute_psf_spectra(mix_psfs(shifted, xtalk));
  return pipe;
}

SensorImage optical_forward(const SceneImage& scene, const PhaseProfile& phase,
                            const CrossTalkMatrix& xtalk, const NoiseModel& noise) {
  phase.validate("optical_forward phase");
  if (int(scene.channels.size()) != xtalk.entries.cols)
    throw InvalidInput("optical_forward: scene channels do not match cross-talk matrix");
  check_xtalk(xtalk, phase.channel_count(), xtalk.entries.cols);

  PsfSpectra psfs = precompute_psf_spectra(effective_psfs(phase, xtalk));
  RealGrid clean = forward_clean(psfs, scene_spectra(scene, phase.n));
  return capture({clean}, noise);
}

std::vector<RealGrid> pipeline_backward(const OpticalPipeline& pipe,
                                        const SceneSpectra& scene,
                                        const RealGrid& upstream) {
  const int n = pipe.n;
  if (upstream.rows != n || upstream.cols != n)
    throw InvalidInput("pipeline_backward: upstream gradient is not n x n");
  if (int(scene.fwd.size()) != pipe.input_channels || scene.n != n)
    throw InvalidInput("pipeline_backward: scene does not match pipeline");

  const int m = pipe.spectra.padded;
  const std::size_t sz = std::size_t(m) * m;
  const int h = n / 2;

  CplxGrid ghat(m, m);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) ghat(r, c) = upstream(r, c);
  fft::fft2d(ghat, fft::Dir::forward);

  // Adjoint of the convolution: correlate the upstream gradient with each
  // embedded scene channel, then fold the cross-talk weights back onto the
  // sensed channels.
  std::vector<RealGrid> dpsf_shifted(std::size_t(pipe.meta_channels), RealGrid(n, n));
  CplxGrid corr(m, m);
  for (int c = 0; c < pipe.input_channels; ++c) {
    simd::active().cplx_mul_conj(reinterpret_cast<const double*>(scene.fwd[std::size_t(c)].data()),
                                 reinterpret_cast<const double*>(ghat.data()),
                                 reinterpret_cast<double*>(corr.data()), sz);
    fft::fft2d(corr, fft::Dir::inverse);
    RealGrid deff(n, n);
    for (int a = 0; a < n; ++a) {
      int ra = a - h;
      if (ra < 0) ra += m;
      for (int b = 0; b < n; ++b) {
        int rb = b - h;
        if (rb < 0) rb += m;
        deff(a, b) = corr(ra, rb).real() * double(m);
      }
    }
    for (int cp = 0; cp < pipe.meta_channels; ++cp)
      simd::active().axpy(pipe.xtalk(cp, c), deff.data(),
                          dpsf_shifted[std::size_t(cp)].data(), std::size_t(n) * n);
  }

  // Pull each sensed channel's PSF gradient back through |F^-1 exp(i*phase)|^2.
  std::vector<RealGrid> dphase;
  dphase.reserve(std::size_t(pipe.meta_channels));
  CplxGrid w(n, n);
  for (int cp = 0; cp < pipe.meta_channels; ++cp) {
    RealGrid dcorner = fft::fftshift(dpsf_shifted[std::size_t(cp)]);
    const ChannelField& f = pipe.fields[std::size_t(cp)];
    simd::active().cplx_scale_real(reinterpret_cast<const double*>(f.u.data()),
                                   dcorner.data(), reinterpret_cast<double*>(w.data()),
                                   std::size_t(n) * n);
    fft::fft2d(w, fft::Dir::forward);
    RealGrid g(n, n);
    simd::active().imag_conj_mul(reinterpret_cast<const double*>(f.t.data()),
                                 reinterpret_cast<const double*>(w.data()), 2.0,
                                 g.data(), std::size_t(n) * n);
    dphase.push_back(std::move(g));
  }
  return dphase;
}

std::vector<RealGrid> optical_backward(const SceneImage& scene,
                                       const PhaseProfile& phase,
                                       const CrossTalkMatrix& xtalk,
                                       const RealGrid& upstream) {
  OpticalPipeline pipe = build_optical_pipeline(phase, xtalk);
  return pipeline_backward(pipe, scene_spectra(scene, phase.n), upstream);
}

}  // namespace mcf
