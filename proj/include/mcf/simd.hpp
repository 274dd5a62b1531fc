#pragma once

#include <cstddef>
#include <string>

namespace mcf::simd {

// Hot elementwise loops shared by the FFT, the optical pipeline and the
// optimizer. Complex arrays are interleaved (re,im) doubles, i.e. the
// in-memory layout of std::complex<double>.
//
// Reductions (dot/sum/sq_sum) may reassociate, so scalar and vector
// variants agree to rounding, not bitwise.
struct Kernels {
    // out[i] = a[i] * b[i]                (complex)
    void (*cplx_mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = conj(a[i]) * b[i]          (complex)
    void (*cplx_mul_conj)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = a[i] * r[i]                (complex a, real r)
    void (*cplx_scale_real)(const double* a, const double* r, double* out, std::size_t n);
    // out[i] = |a[i]|^2                   (complex a, real out)
    void (*sq_modulus)(const double* a, double* out, std::size_t n);
    // out[i] = alpha * Im(conj(t[i]) * g[i])
    void (*imag_conj_mul)(const double* t, const double* g, double alpha, double* out,
                          std::size_t n);
    // y[i] += a * x[i]                    (real)
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x[i] *= a                           (real; complex via n*2)
    void (*scale)(double a, double* x, std::size_t n);
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum_i a[i]
    double (*sum)(const double* a, std::size_t n);
    // sum_i (p[i] - w[i])^2, r[i] = p[i] - w[i]; r may be null
    double (*residual_sq_sum)(const double* p, const double* w, double* r, std::size_t n);
    // complex rows, constant twiddle: t = w*b[i]; b[i] = a[i]-t; a[i] += t
    void (*butterfly_rows)(double* a, double* b, double wre, double wim, std::size_t n);
    // complex rows, per-element twiddle: t = w[i]*b[i]; b[i] = a[i]-t; a[i] += t
    void (*butterfly_span)(double* a, double* b, const double* w, std::size_t n);
};

enum class Isa { scalar, avx2, neon };

const Kernels& scalar_kernels();

// Table for a specific instruction set; nullptr when unsupported here.
const Kernels* kernels_for(Isa isa);

// Runtime-selected table: best supported set, overridable with
// MCF_KERNELS=scalar|avx2|neon (unsupported values fall back to scalar).
const Kernels& active();
Isa active_isa();
std::string isa_name(Isa isa);

}  // namespace mcf::simd
