// Scalar reference kernels. These define the semantics; the vector
// variants must match them to rounding.

#include "mcf/simd.hpp"

namespace mcf::simd {
namespace {

void kernel_cplx_mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double ar = a[2 * i], ai = a[2 * i + 1];
        double br = b[2 * i], bi = b[2 * i + 1];
        out[2 * i] = ar * br - ai * bi;
        out[2 * i + 1] = ar * bi + ai * br;
    }
}

void kernel_cplx_mul_conj_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double ar = a[2 * i], ai = -a[2 * i + 1];
        double br = b[2 * i], bi = b[2 * i + 1];
        out[2 * i] = ar * br - ai * bi;
        out[2 * i + 1] = ar * bi + ai * br;
    }
}

void kernel_cplx_scale_real_scalar(const double* a, const double* r, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = a[2 * i] * r[i];
        out[2 * i + 1] = a[2 * i + 1] * r[i];
    }
}

void kernel_sq_modulus_scalar(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double re = a[2 * i], im = a[2 * i + 1];
        out[i] = re * re + im * im;
    }
}

void kernel_imag_conj_mul_scalar(const double* t, const double* g, double alpha, double* out,
                                 std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double tr = t[2 * i], ti = t[2 * i + 1];
        double gr = g[2 * i], gi = g[2 * i + 1];
        out[i] = alpha * (tr * gi - ti * gr);
    }
}

void kernel_axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void kernel_scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double kernel_dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double kernel_sum_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

double kernel_residual_sq_sum_scalar(const double* p, const double* w, double* r, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = p[i] - w[i];
        if (r) r[i] = d;
        s += d * d;
    }
    return s;
}

void kernel_butterfly_rows_scalar(double* a, double* b, double wre, double wim, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
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

void kernel_butterfly_span_scalar(double* a, double* b, const double* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
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

const Kernels& scalar_kernels() {
    static const Kernels k = {
        kernel_cplx_mul_scalar,        kernel_cplx_mul_conj_scalar,
        kernel_cplx_scale_real_scalar, kernel_sq_modulus_scalar,
        kernel_imag_conj_mul_scalar,   kernel_axpy_scalar,
        kernel_scale_scalar,           kernel_dot_scalar,
        kernel_sum_scalar,             kernel_residual_sq_sum_scalar,
        kernel_butterfly_rows_scalar,  kernel_butterfly_span_scalar,
    };
    return k;
}

}  // namespace mcf::simd
