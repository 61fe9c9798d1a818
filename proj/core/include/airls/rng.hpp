#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace airls {

// Deterministic random number generation with bit-identical streams across
// platforms and standard library implementations: the mt19937_64 engine is
// specified exactly, and every distribution below is hand-derived from its
// raw 64-bit output instead of going through std:: distributions (whose
// algorithms are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent child stream: the (seed, stream) pair is mixed through a
    // splitmix64 round so nearby ids do not produce correlated engines.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix(mix(seed) ^ mix(stream_id ^ 0x9e3779b97f4a7c15ULL)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a logarithm argument.
    double uniform01_open() { return 1.0 - uniform01(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        // Rejection to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Standard normal via the Box-Muller transform (one value per call; the
    // companion value is discarded to keep the stream position predictable).
    double normal() {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double exponential(double rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("Rng::exponential: rate must be positive");
        return -std::log(uniform01_open()) / rate;
    }

    // Zero-mode Laplace with density proportional to exp(-|y| / scale).
    double laplace(double scale) {
        if (!(scale > 0.0)) throw std::invalid_argument("Rng::laplace: scale must be positive");
        const double mag = scale * exponential(1.0);
        return (uniform01() < 0.5) ? -mag : mag;
    }

    // Zero-mode asymmetric Laplace, density proportional to
    // exp(-(rate_pos * max(y,0) + rate_neg * max(-y,0))); mass b/(a+b) above 0.
    double asym_laplace(double rate_pos, double rate_neg) {
        if (!(rate_pos > 0.0) || !(rate_neg > 0.0)) {
            throw std::invalid_argument("Rng::asym_laplace: rates must be positive");
        }
        const double p_positive = rate_neg / (rate_pos + rate_neg);
        if (uniform01() < p_positive) return exponential(rate_pos);
        return -exponential(rate_neg);
    }

    // Gamma(shape, 1) via the Marsaglia-Tsang squeeze; shapes below 1 are
    // boosted through Gamma(shape + 1) * U^(1/shape).
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = uniform01_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double z = normal();
            const double t = 1.0 + c * z;
            if (t <= 0.0) continue;
            const double v = t * t * t;
            const double u = uniform01_open();
            const double z2 = z * z;
            if (u < 1.0 - 0.0331 * z2 * z2) return d * v;
            if (std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Draw from the zero-mode generalized normal with density
    // proportional to exp(-q |y|^q): |y|^q is Gamma(1/q, 1)/q, the sign is a
    // fair coin. q = 1 and q = 2 use their exact closed forms.
    double gnd(double q) {
        if (!(q > 0.0)) throw std::invalid_argument("Rng::gnd: q must be positive");
        if (q == 1.0) {
            return laplace(1.0);
        }
        if (q == 2.0) {
            return 0.5 * normal();  // exponent -2y^2 means variance 1/4
        }
        const double mag = std::pow(gamma(1.0 / q) / q, 1.0 / q);
        return (uniform01() < 0.5) ? -mag : mag;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace airls
