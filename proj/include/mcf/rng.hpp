#pragma once

#include <cmath>
#include <cstdint>

namespace mcf::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, index), so values never depend on evaluation order
// and any element can be regenerated in isolation.

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t key(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t h = mix64(seed ^ 0x8f462907535ecb39ULL);
    h = mix64(h ^ stream);
    return mix64(h ^ index);
}

// Uniform in (0, 1]; never returns 0 so log() stays finite.
inline double uniform_pos(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t r = key(seed, stream, index);
    return double((r >> 11) + 1) * 0x1.0p-53;
}

// Uniform in [0, 1).
inline double uniform(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t r = key(seed, stream, index);
    return double(r >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; one value per (seed, stream, index).
inline double gaussian(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t k = key(seed, stream, index);
    double u1 = double((k >> 11) + 1) * 0x1.0p-53;
    double u2 = double(mix64(k) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Uniform integer in [0, n).
inline uint64_t below(uint64_t seed, uint64_t stream, uint64_t index, uint64_t n) {
    return key(seed, stream, index) % n;
}

// Stream ids reserved by the pipeline. Keeping them distinct guarantees
// that phase init, net init, data synthesis and per-scene noise never
// share draws even under one run seed.
namespace stream {
inline constexpr uint64_t kPhaseInit = 0x100000000000ULL;   // + channel
inline constexpr uint64_t kNetInit = 0x200000000000ULL;     // + tensor id
inline constexpr uint64_t kDataset = 0x300000000000ULL;     // + sample id
inline constexpr uint64_t kShuffle = 0x400000000000ULL;     // + epoch
inline constexpr uint64_t kKernelInit = 0x500000000000ULL;  // + kernel id
inline constexpr uint64_t kNoiseTrain = 0x0ULL;             // + scene index
inline constexpr uint64_t kNoiseTest = 0x80000000ULL;       // + scene index
}  // namespace stream

}  // namespace mcf::rng
