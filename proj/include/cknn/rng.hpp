#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cknn/errors.hpp"

namespace cknn {

/// Default seed used by the CLI and anywhere a seed is not specified.
inline constexpr std::uint64_t kDefaultSeed = 12345;

/// splitmix64 mixing step; also the basis for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic derivation of an independent stream seed from a master seed.
/// Streams with distinct tags are decorrelated by two mixing rounds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ (0xA0761D6478BD642FULL * (stream + 1)));
}

/// Random generator with fully specified output. All distribution transforms
/// are implemented here (not via std:: distributions, whose streams are
/// implementation-defined), so results are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, bound), unbiased via rejection.
    int uniform_int(int bound) {
        if (bound <= 0) throw InvalidArgumentError("uniform_int: bound must be positive");
        const auto b = static_cast<std::uint64_t>(bound);
        const std::uint64_t zone = (UINT64_MAX / b) * b;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= zone);
        return static_cast<int>(x % b);
    }

    /// Fisher-Yates shuffle with the explicit draw above.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = uniform_int(i + 1);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cknn
