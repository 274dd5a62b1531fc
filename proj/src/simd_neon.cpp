// NEON kernel variants (aarch64). One complex double per 128-bit
// register; vcombine/vget pairs handle the interleaved layout.

#include "mcf/simd.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace mcf::simd {
namespace {

inline float64x2_t cplx_mul_f64(float64x2_t a, float64x2_t b) {
    // [ar*br - ai*bi, ar*bi + ai*br]
    float64x2_t ar = vdupq_laneq_f64(a, 0);
    float64x2_t ai = vdupq_laneq_f64(a, 1);
    float64x2_t bs = vextq_f64(b, b, 1);  // [bi, br]
    float64x2_t re_im = vmulq_f64(ar, b);
    float64x2_t cross = vmulq_f64(ai, bs);
    // even lane subtract, odd lane add
    float64x2_t signs = {-1.0, 1.0};
    return vfmaq_f64(re_im, cross, signs);
}

void kernel_cplx_mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t va = vld1q_f64(a + 2 * i);
        float64x2_t vb = vld1q_f64(b + 2 * i);
        vst1q_f64(out + 2 * i, cplx_mul_f64(va, vb));
    }
}

void kernel_cplx_mul_conj_neon(const double* a, const double* b, double* out, std::size_t n) {
    float64x2_t conj_mask = {1.0, -1.0};
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t va = vmulq_f64(vld1q_f64(a + 2 * i), conj_mask);
        float64x2_t vb = vld1q_f64(b + 2 * i);
        vst1q_f64(out + 2 * i, cplx_mul_f64(va, vb));
    }
}

void kernel_cplx_scale_real_neon(const double* a, const double* r, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t va = vld1q_f64(a + 2 * i);
        vst1q_f64(out + 2 * i, vmulq_n_f64(va, r[i]));
    }
}

void kernel_sq_modulus_neon(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v1 = vld1q_f64(a + 2 * i);
        float64x2_t v2 = vld1q_f64(a + 2 * i + 2);
        v1 = vmulq_f64(v1, v1);
        v2 = vmulq_f64(v2, v2);
        float64x2_t s = vpaddq_f64(v1, v2);  // [|c0|^2, |c1|^2]
        vst1q_f64(out + i, s);
    }
    // Tail in scalar code.
    for (; i < n; ++i) {
        double re = a[2 * i], im = a[2 * i + 1];
        out[i] = re * re + im * im;
    }
}

void kernel_imag_conj_mul_neon(const double* t, const double* g, double alpha, double* out,
                               std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t vt = vld1q_f64(t + 2 * i);
        float64x2_t vg = vld1q_f64(g + 2 * i);
        float64x2_t gs = vextq_f64(vg, vg, 1);     // [gi, gr]
        float64x2_t p = vmulq_f64(vt, gs);         // [tr*gi, ti*gr]
        out[i] = alpha * (vgetq_lane_f64(p, 0) - vgetq_lane_f64(p, 1));
    }
}

void kernel_axpy_neon(double a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vy = vld1q_f64(y + i);
        vy = vfmaq_n_f64(vy, vld1q_f64(x + i), a);
        vst1q_f64(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void kernel_scale_neon(double a, double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), a));
    for (; i < n; ++i) x[i] *= a;
}

double kernel_dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double kernel_sum_neon(const double* a, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double kernel_residual_sq_sum_neon(const double* p, const double* w, double* r, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(p + i), vld1q_f64(w + i));
        if (r) vst1q_f64(r + i, d);
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) {
        double d = p[i] - w[i];
        if (r) r[i] = d;
        s += d * d;
    }
    return s;
}

void kernel_butterfly_rows_neon(double* a, double* b, double wre, double wim, std::size_t n) {
    float64x2_t w = {wre, wim};
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t vb = vld1q_f64(b + 2 * i);
        float64x2_t t = cplx_mul_f64(w, vb);
        float64x2_t va = vld1q_f64(a + 2 * i);
        vst1q_f64(b + 2 * i, vsubq_f64(va, t));
        vst1q_f64(a + 2 * i, vaddq_f64(va, t));
    }
}

void kernel_butterfly_span_neon(double* a, double* b, const double* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t vw = vld1q_f64(w + 2 * i);
        float64x2_t vb = vld1q_f64(b + 2 * i);
        float64x2_t t = cplx_mul_f64(vw, vb);
        float64x2_t va = vld1q_f64(a + 2 * i);
        vst1q_f64(b + 2 * i, vsubq_f64(va, t));
        vst1q_f64(a + 2 * i, vaddq_f64(va, t));
    }
}

}  // namespace

const Kernels* neon_kernels_impl() {
    static const Kernels k = {
        kernel_cplx_mul_neon,        kernel_cplx_mul_conj_neon,
        kernel_cplx_scale_real_neon, kernel_sq_modulus_neon,
        kernel_imag_conj_mul_neon,   kernel_axpy_neon,
        kernel_scale_neon,           kernel_dot_neon,
        kernel_sum_neon,             kernel_residual_sq_sum_neon,
        kernel_butterfly_rows_neon,  kernel_butterfly_span_neon,
    };
    return &k;
}

}  // namespace mcf::simd

#else

namespace mcf::simd {
const Kernels* neon_kernels_impl() { return nullptr; }
}  // namespace mcf::simd

#endif
