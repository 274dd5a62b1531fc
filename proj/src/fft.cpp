// Iterative radix-2 unitary FFT. Rows transform in place per row; the
// column pass runs whole-row butterflies with a constant twiddle, which
// is where the vector kernels pay off. Plans (bit-reversal permutation
// plus per-stage twiddle tables) are cached per size.

#include "mcf/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "mcf/simd.hpp"

namespace mcf::fft {
namespace {

constexpr double kPi = 3.141592653589793238462643383279;

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

struct Plan {
    int n = 0;
    std::vector<int> bitrev;
    // stage s handles blocks of length 2^(s+1); tables are contiguous
    // interleaved complexes of length 2^s
    std::vector<std::vector<double>> tw_fwd;
    std::vector<std::vector<double>> tw_inv;

    explicit Plan(int size) : n(size) {
        bitrev.resize(n);
        int bits = 0;
        while ((1 << bits) < n) ++bits;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < bits; ++b)
                if (i & (1 << b)) r |= 1 << (bits - 1 - b);
            bitrev[i] = r;
        }
        for (int len = 2; len <= n; len <<= 1) {
            int half = len / 2;
            std::vector<double> fwd(2 * half), inv(2 * half);
            for (int j = 0; j < half; ++j) {
                double ang = -2.0 * kPi * j / len;
                fwd[2 * j] = std::cos(ang);
                fwd[2 * j + 1] = std::sin(ang);
                inv[2 * j] = fwd[2 * j];
                inv[2 * j + 1] = -fwd[2 * j + 1];
            }
            tw_fwd.push_back(std::move(fwd));
            tw_inv.push_back(std::move(inv));
        }
    }
};

const Plan& plan_for(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Plan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan>(n)).first;
    return *it->second;
}

// Unscaled 1-D transform of one contiguous row.
void fft_row(cplx* row, const Plan& plan, Dir dir) {
    const auto& k = simd::active();
    double* d = reinterpret_cast<double*>(row);
    for (int i = 0; i < plan.n; ++i) {
        int j = plan.bitrev[i];
        if (i < j) std::swap(row[i], row[j]);
    }
    const auto& tables = (dir == Dir::forward) ? plan.tw_fwd : plan.tw_inv;
    int stage = 0;
    for (int len = 2; len <= plan.n; len <<= 1, ++stage) {
        int half = len / 2;
        const double* tw = tables[stage].data();
        for (int b = 0; b < plan.n; b += len)
            k.butterfly_span(d + 2 * b, d + 2 * (b + half), tw, half);
    }
}

// Unscaled transform down the columns: butterflies act on whole rows.
void fft_cols(CplxGrid& g, const Plan& plan, Dir dir) {
    const auto& k = simd::active();
    int n = plan.n;
    std::vector<cplx> tmp(n);
    for (int i = 0; i < n; ++i) {
        int j = plan.bitrev[i];
        if (i < j) {
            std::copy(g.row(i), g.row(i) + n, tmp.data());
            std::copy(g.row(j), g.row(j) + n, g.row(i));
            std::copy(tmp.data(), tmp.data() + n, g.row(j));
        }
    }
    const auto& tables = (dir == Dir::forward) ? plan.tw_fwd : plan.tw_inv;
    int stage = 0;
    for (int len = 2; len <= n; len <<= 1, ++stage) {
        int half = len / 2;
        const double* tw = tables[stage].data();
        for (int b = 0; b < n; b += len) {
            for (int j = 0; j < half; ++j) {
                double* ra = reinterpret_cast<double*>(g.row(b + j));
                double* rb = reinterpret_cast<double*>(g.row(b + j + half));
                k.butterfly_rows(ra, rb, tw[2 * j], tw[2 * j + 1], n);
            }
        }
    }
}

}  // namespace

void fft2d(CplxGrid& g, Dir dir) {
    if (g.rows != g.cols) throw InvalidInput("fft2d: grid must be square");
    if (!is_pow2(g.rows)) throw InvalidInput("fft2d: size must be a power of two");
    int n = g.rows;
    if (n == 1) return;
    const Plan& plan = plan_for(n);
    for (int r = 0; r < n; ++r) fft_row(g.row(r), plan, dir);
    fft_cols(g, plan, dir);
    simd::active().scale(1.0 / n, reinterpret_cast<double*>(g.data()), 2 * g.size());
}

}  // namespace mcf::fft
