#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace relunet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Raised for caller errors (bad sizes, violated preconditions).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot produce a valid answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream derivation: derive_seed(master, {replicate, job}) gives
// the same child seed regardless of how jobs are scheduled.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive_seed(master, path));
}

// Standard normal draw. std::normal_distribution caches its second sample, so
// a fresh one per call keeps every draw a pure function of the engine state.
inline double gaussian(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t size) {
    std::uniform_int_distribution<std::uint64_t> u(0, size - 1);
    return u(rng);
}

}  // namespace relunet
