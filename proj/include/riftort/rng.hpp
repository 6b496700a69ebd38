#pragma once

#include <cmath>
#include <cstdint>

namespace riftort {

// Counter-based generator built on the SplitMix64 finalizer.  Instead of
// mutating internal state, every draw is a pure function of (key, index):
//
//     out(i) = mix(key + (i+1) * GAMMA)
//
// so the same (seed, stream, index) triple yields the same bits on any
// platform, in any evaluation order, from any number of threads.  The only
// usage rule is that a given stream must be consumed through one method
// family (uniform *or* normal), because normal(i) burns indices 2i and 2i+1.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    // Decorrelated child stream.  Streams with distinct ids never overlap in
    // practice: the finalizer is a bijection with full avalanche.
    static CounterRng derive(std::uint64_t seed, std::uint64_t stream) {
        return CounterRng(mix(mix(seed) + (stream + 1) * kGamma));
    }

    std::uint64_t bits(std::uint64_t i) const { return mix(key_ + (i + 1) * kGamma); }

    // uniform on [0, 1); 53 mantissa bits
    double uniform(std::uint64_t i) const {
        return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
    }

    // uniform on [0, 2*pi)
    double angle(std::uint64_t i) const { return uniform(i) * 2.0 * kPi; }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t i, std::uint64_t n) const {
        return static_cast<std::uint64_t>(uniform(i) * static_cast<double>(n)) % n;
    }

    // standard normal via Box-Muller; consumes counter slots 2i and 2i+1
    double normal(std::uint64_t i) const {
        const double u1 = uniform(2 * i);      // in [0,1) so 1-u1 in (0,1]
        const double u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * kPi * u2);
    }

  private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
};

// Stream ids used across the library.  Centralised so two call sites never
// accidentally share a stream.
namespace streams {
constexpr std::uint64_t kSampleDraw = 1;      // distribution sampling
constexpr std::uint64_t kSampleComponent = 2; // mixture component choice
constexpr std::uint64_t kPermutation = 3;     // independent-coupling shuffle
constexpr std::uint64_t kFreqX = 4;           // feature spatial frequencies
constexpr std::uint64_t kFreqT = 5;           // feature time frequencies
constexpr std::uint64_t kPhase = 6;           // feature phases
constexpr std::uint64_t kTestFunction = 7;    // marginal-preservation probes
constexpr std::uint64_t kSubsample = 8;       // bandwidth heuristic subsample
constexpr std::uint64_t kReflowBase = 1000;   // + iteration index
}  // namespace streams

}  // namespace riftort
