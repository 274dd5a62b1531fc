#pragma once

#include <vector>

#include "mcf/grid.hpp"

namespace mcf {

// Per-channel phase mask in radians, n a power of two (one plane per
// output colour channel of the conv layer being encoded).
struct PhaseProfile {
    int n = 0;
    std::vector<RealGrid> channels;

    int channel_count() const { return int(channels.size()); }
    void validate(const char* what = "PhaseProfile") const;
};

// Point-spread function intensity, optical axis at pixel (n/2, n/2).
struct PsfImage {
    int n = 0;
    std::vector<RealGrid> channels;

    int channel_count() const { return int(channels.size()); }
};

// Meta-element rotation angles in [0, pi): geometric phase doubles the
// rotation, so orientation = phase/2 (mod pi).
struct OrientationMap {
    int n = 0;
    std::vector<RealGrid> channels;
};

// Physical scale of the Fourier-plane mask for a 4f arrangement with
// focal length f and sensor pixel pitch d. All lengths in metres.
struct MaskGeometry {
    double wavelength = 0.0;
    double focal_length = 0.0;
    double pixel_pitch = 0.0;
    int n = 0;
    double mask_extent = 0.0;        // lambda*f/d
    double phase_pixel = 0.0;        // lambda*f/(n*d)
    double nyquist_limit = 0.0;      // 1/(2d), cycles per metre
};

// PSF = |inverse FFT of exp(i*phase)|^2 per channel, unitary transform,
// so every channel sums to exactly n^2 (up to rounding).
PsfImage psf_from_phase(const PhaseProfile& phase);

MaskGeometry mask_geometry(double wavelength, double focal_length, double pixel_pitch, int n);

OrientationMap phase_to_orientation(const PhaseProfile& phase);

// Intermediates for one channel, corner-indexed (no fftshift): transfer
// function t = exp(i*phase), field u = F^-1 t, intensity |u|^2. The
// optimizer and the training backward pass reuse these.
struct ChannelField {
    CplxGrid t;
    CplxGrid u;
    RealGrid psf_corner;
};
ChannelField psf_channel_fields(const RealGrid& phase);

// exp(i*phase) into an interleaved complex grid.
void phase_to_transfer(const RealGrid& phase, CplxGrid& out);

}  // namespace mcf
