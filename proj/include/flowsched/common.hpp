#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace flowsched {

// Thrown when data violates a structural rule (cycles, bad runtimes, ...).
class validation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a file cannot be parsed; message carries the offending context.
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a computation produces a non-finite value.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using rng_t = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
}

// Kahan compensated summation. Sums of per-step log-probabilities feed loss
// differences, so accumulation drift has to stay below the loss scale.
inline double kahan_sum(std::span<const double> xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

}  // namespace flowsched
