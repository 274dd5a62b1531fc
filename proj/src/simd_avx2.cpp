// AVX2 kernel variants. Two complex doubles per 256-bit register; the
// complex product uses the movedup/permute/addsub idiom. Main loops run
// on full vectors, tails fall back to scalar code.

#include "mcf/simd.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace mcf::simd {
namespace {

inline __m256d cplx_mul_pd(__m256d a, __m256d b) {
    __m256d ar = _mm256_movedup_pd(a);        // [ar0 ar0 ar1 ar1]
    __m256d ai = _mm256_permute_pd(a, 0xF);   // [ai0 ai0 ai1 ai1]
    __m256d bs = _mm256_permute_pd(b, 0x5);   // [bi0 br0 bi1 br1]
    return _mm256_addsub_pd(_mm256_mul_pd(ar, b), _mm256_mul_pd(ai, bs));
}

inline __m256d cplx_mul_conj_pd(__m256d a, __m256d b) {
    __m256d ar = _mm256_movedup_pd(a);
    __m256d ai = _mm256_permute_pd(a, 0xF);
    __m256d neg = _mm256_set1_pd(-0.0);
    ai = _mm256_xor_pd(ai, neg);              // conj(a)
    __m256d bs = _mm256_permute_pd(b, 0x5);
    return _mm256_addsub_pd(_mm256_mul_pd(ar, b), _mm256_mul_pd(ai, bs));
}

void kernel_cplx_mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d va = _mm256_loadu_pd(a + 2 * i);
        __m256d vb = _mm256_loadu_pd(b + 2 * i);
        _mm256_storeu_pd(out + 2 * i, cplx_mul_pd(va, vb));
    }
    for (; i < n; ++i) {
        double ar = a[2 * i], ai = a[2 * i + 1];
        double br = b[2 * i], bi = b[2 * i + 1];
        out[2 * i] = ar * br - ai * bi;
        out[2 * i + 1] = ar * bi + ai * br;
    }
}

void kernel_cplx_mul_conj_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d va = _mm256_loadu_pd(a + 2 * i);
        __m256d vb = _mm256_loadu_pd(b + 2 * i);
        _mm256_storeu_pd(out + 2 * i, cplx_mul_conj_pd(va, vb));
    }
    for (; i < n; ++i) {
        double ar = a[2 * i], ai = -a[2 * i + 1];
        double br = b[2 * i], bi = b[2 * i + 1];
        out[2 * i] = ar * br - ai * bi;
        out[2 * i + 1] = ar * bi + ai * br;
    }
}

void kernel_cplx_scale_real_avx2(const double* a, const double* r, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m128d rr = _mm_loadu_pd(r + i);
        __m256d rd = _mm256_permute4x64_pd(_mm256_castpd128_pd256(rr), 0x50);  // [r0 r0 r1 r1]
        __m256d va = _mm256_loadu_pd(a + 2 * i);
        _mm256_storeu_pd(out + 2 * i, _mm256_mul_pd(va, rd));
    }
    for (; i < n; ++i) {
        out[2 * i] = a[2 * i] * r[i];
        out[2 * i + 1] = a[2 * i + 1] * r[i];
    }
}

void kernel_sq_modulus_avx2(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v1 = _mm256_loadu_pd(a + 2 * i);
        __m256d v2 = _mm256_loadu_pd(a + 2 * i + 4);
        v1 = _mm256_mul_pd(v1, v1);
        v2 = _mm256_mul_pd(v2, v2);
        __m256d h = _mm256_hadd_pd(v1, v2);            // [c0 c2 c1 c3]
        _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(h, 0xD8));
    }
    for (; i < n; ++i) {
        double re = a[2 * i], im = a[2 * i + 1];
        out[i] = re * re + im * im;
    }
}

void kernel_imag_conj_mul_avx2(const double* t, const double* g, double alpha, double* out,
                               std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t1 = _mm256_loadu_pd(t + 2 * i);
        __m256d t2 = _mm256_loadu_pd(t + 2 * i + 4);
        __m256d g1 = _mm256_permute_pd(_mm256_loadu_pd(g + 2 * i), 0x5);      // [gi gr]
        __m256d g2 = _mm256_permute_pd(_mm256_loadu_pd(g + 2 * i + 4), 0x5);
        __m256d p1 = _mm256_mul_pd(t1, g1);            // [tr*gi ti*gr]
        __m256d p2 = _mm256_mul_pd(t2, g2);
        __m256d h = _mm256_hsub_pd(p1, p2);            // [c0 c2 c1 c3]
        h = _mm256_permute4x64_pd(h, 0xD8);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, h));
    }
    for (; i < n; ++i) {
        double tr = t[2 * i], ti = t[2 * i + 1];
        double gr = g[2 * i], gi = g[2 * i + 1];
        out[i] = alpha * (tr * gi - ti * gr);
    }
}

void kernel_axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void kernel_scale_avx2(double a, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

inline double hsum_pd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double kernel_dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum_pd(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double kernel_sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum_pd(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double kernel_residual_sq_sum_avx2(const double* p, const double* w, double* r, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(w + i));
        if (r) _mm256_storeu_pd(r + i, d);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum_pd(acc);
    for (; i < n; ++i) {
        double d = p[i] - w[i];
        if (r) r[i] = d;
        s += d * d;
    }
    return s;
}

void kernel_butterfly_rows_avx2(double* a, double* b, double wre, double wim, std::size_t n) {
    __m256d vwr = _mm256_set1_pd(wre);
    __m256d vwi = _mm256_set1_pd(wim);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d vb = _mm256_loadu_pd(b + 2 * i);
        __m256d bs = _mm256_permute_pd(vb, 0x5);
        __m256d t = _mm256_addsub_pd(_mm256_mul_pd(vwr, vb), _mm256_mul_pd(vwi, bs));
        __m256d va = _mm256_loadu_pd(a + 2 * i);
        _mm256_storeu_pd(b + 2 * i, _mm256_sub_pd(va, t));
        _mm256_storeu_pd(a + 2 * i, _mm256_add_pd(va, t));
    }
    for (; i < n; ++i) {
        double br = b[2 * i], bi = b[2 * i + 1];
        double tr = br * wre - bi * wim;
        double ti = br * wim + bi * wre;
        double ar = a[2 * i], ai = a[2 * i + 1];
        b[2 * i] = ar - tr;
        b[2 * i + 1] = ai - ti;
        a[2 * i] = ar + tr;
        a[2 * i + 1] = ai + ti;
    }
}

void kernel_butterfly_span_avx2(double* a, double* b, const double* w, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d vw = _mm256_loadu_pd(w + 2 * i);
        __m256d vb = _mm256_loadu_pd(b + 2 * i);
        __m256d t = cplx_mul_pd(vw, vb);
        __m256d va = _mm256_loadu_pd(a + 2 * i);
        _mm256_storeu_pd(b + 2 * i, _mm256_sub_pd(va, t));
        _mm256_storeu_pd(a + 2 * i, _mm256_add_pd(va, t));
    }
    for (; i < n; ++i) {
        double br = b[2 * i], bi = b[2 * i + 1];
        double wre = w[2 * i], wim = w[2 * i + 1];
        double tr = br * wre - bi * wim;
        double ti = br * wim + bi * wre;
        double ar = a[2 * i], ai = a[2 * i + 1];
        b[2 * i] = ar - tr;
        b[2 * i + 1] = ai - ti;
        a[2 * i] = ar + tr;
        a[2 * i + 1] = ai + ti;
    }
}

}  // namespace

const Kernels* avx2_kernels_impl() {
    static const Kernels k = {
        kernel_cplx_mul_avx2,        kernel_cplx_mul_conj_avx2,
        kernel_cplx_scale_real_avx2, kernel_sq_modulus_avx2,
        kernel_imag_conj_mul_avx2,   kernel_axpy_avx2,
        kernel_scale_avx2,           kernel_dot_avx2,
        kernel_sum_avx2,             kernel_residual_sq_sum_avx2,
        kernel_butterfly_rows_avx2,  kernel_butterfly_span_avx2,
    };
    return &k;
}

}  // namespace mcf::simd

#else

namespace mcf::simd {
const Kernels* avx2_kernels_impl() { return nullptr; }
}  // namespace mcf::simd

#endif
