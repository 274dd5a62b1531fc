#include "mcf/fourier_optics.hpp"

#include <cmath>

#include "mcf/fft.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

void PhaseProfile::validate(const char* what) const {
    if (n < 2 || !is_pow2(n))
        throw InvalidInput(std::string(what) + ": n must be a power of two >= 2");
    if (channels.empty()) throw InvalidInput(std::string(what) + ": needs at least one channel");
    for (const auto& ch : channels)
        if (ch.rows != n || ch.cols != n)
            throw InvalidInput(std::string(what) + ": channel shape mismatch");
}

void phase_to_transfer(const RealGrid& phase, CplxGrid& out) {
    out = CplxGrid(phase.rows, phase.cols);
    const double* p = phase.data();
    double* t = reinterpret_cast<double*>(out.data());
    for (std::size_t i = 0; i < phase.size(); ++i) {
        t[2 * i] = std::cos(p[i]);
        t[2 * i + 1] = std::sin(p[i]);
    }
}

ChannelField psf_channel_fields(const RealGrid& phase) {
    ChannelField f;
    phase_to_transfer(phase, f.t);
    f.u = f.t;
    fft::fft2d(f.u, fft::Dir::inverse);
    f.psf_corner = RealGrid(phase.rows, phase.cols);
    simd::active().sq_modulus(reinterpret_cast<const double*>(f.u.data()), f.psf_corner.data(),
                              f.u.size());
    return f;
}

PsfImage psf_from_phase(const PhaseProfile& phase) {
    phase.validate("psf_from_phase");
    PsfImage psf;
    psf.n = phase.n;
    psf.channels.reserve(phase.channels.size());
    for (const auto& ch : phase.channels) {
        ChannelField f = psf_channel_fields(ch);
        psf.channels.push_back(fft::fftshift(f.psf_corner));
    }
    return psf;
}

MaskGeometry mask_geometry(double wavelength, double focal_length, double pixel_pitch, int n) {
    if (wavelength <= 0 || focal_length <= 0 || pixel_pitch <= 0)
        throw InvalidInput("mask_geometry: lengths must be positive");
    if (n < 1) throw InvalidInput("mask_geometry: n must be positive");
    MaskGeometry g;
    g.wavelength = wavelength;
    g.focal_length = focal_length;
    g.pixel_pitch = pixel_pitch;
    g.n = n;
    g.mask_extent = wavelength * focal_length / pixel_pitch;
    g.phase_pixel = wavelength * focal_length / (double(n) * pixel_pitch);
    g.nyquist_limit = 1.0 / (2.0 * pixel_pitch);
    return g;
}

OrientationMap phase_to_orientation(const PhaseProfile& phase) {
    phase.validate("phase_to_orientation");
    OrientationMap m;
    m.n = phase.n;
    m.channels.reserve(phase.channels.size());
    for (const auto& ch : phase.channels) {
        RealGrid a(ch.rows, ch.cols);
        for (std::size_t i = 0; i < ch.size(); ++i) {
            double r = std::fmod(ch.data()[i], kTwoPi);
            if (r < 0) r += kTwoPi;
            a.data()[i] = r / 2.0;
        }
        m.channels.push_back(std::move(a));
    }
    return m;
}

}  // namespace mcf
