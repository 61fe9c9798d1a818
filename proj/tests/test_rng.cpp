#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "airls/rng.hpp"

using namespace airls;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

template <typename Draw>
Moments sample_moments(Draw draw, int n) {
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = draw();
        sum += y;
        sumsq += y * y;
    }
    const double mean = sum / n;
    return {mean, sumsq / n - mean * mean};
}

}  // namespace

TEST_CASE("raw stream is the standard 64-bit Mersenne twister") {
    // The engine and its seeding are fully specified by the C++ standard, so
    // every conforming platform reproduces these draws bit for bit.
    Rng rng(42);
    std::mt19937_64 reference(42);
    for (int i = 0; i < 64; ++i) CHECK(rng.next_u64() == reference());
}

TEST_CASE("uniform01 uses the top 53 bits of the raw stream") {
    Rng a(7), b(7);
    for (int i = 0; i < 32; ++i) {
        const double expected = static_cast<double>(b.next_u64() >> 11) * 0x1.0p-53;
        CHECK(a.uniform01() == expected);
    }
}

TEST_CASE("identical seeds give identical sequences across all distributions") {
    Rng a(12345), b(12345);
    for (int i = 0; i < 200; ++i) {
        CHECK(a.normal() == b.normal());
        CHECK(a.gamma(0.7) == b.gamma(0.7));
        CHECK(a.gnd(1.5) == b.gnd(1.5));
        CHECK(a.asym_laplace(2.0, 3.0) == b.asym_laplace(2.0, 3.0));
        CHECK(a.below(17) == b.below(17));
    }
}

TEST_CASE("child streams are deterministic and distinct") {
    Rng a = Rng::stream(5, 0);
    Rng b = Rng::stream(5, 1);
    Rng a2 = Rng::stream(5, 0);
    CHECK(a.next_u64() != b.next_u64());
    Rng a3 = Rng::stream(5, 0);
    CHECK(a2.next_u64() == a3.next_u64());
    // Nearby (seed, stream) pairs must not collide.
    CHECK(Rng::stream(5, 1).next_u64() != Rng::stream(6, 0).next_u64());
    CHECK(Rng::stream(5, 2).next_u64() != Rng::stream(5, 3).next_u64());
}

TEST_CASE("uniform helpers stay in range") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.uniform01_open();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        const double w = rng.uniform(-2.0, 3.0);
        CHECK(w >= -2.0);
        CHECK(w <= 3.0);
        CHECK(rng.below(7) < 7);
    }
    CHECK_THROWS(rng.below(0));
}

TEST_CASE("normal moments") {
    Rng rng(100);
    const Moments m = sample_moments([&] { return rng.normal(); }, 200000);
    CHECK(std::abs(m.mean) < 0.01);
    CHECK(m.var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("exponential and laplace moments") {
    Rng rng(101);
    const Moments e = sample_moments([&] { return rng.exponential(2.0); }, 200000);
    CHECK(e.mean == doctest::Approx(0.5).epsilon(0.02));
    const Moments l = sample_moments([&] { return rng.laplace(1.5); }, 200000);
    CHECK(std::abs(l.mean) < 0.02);
    CHECK(l.var == doctest::Approx(2.0 * 1.5 * 1.5).epsilon(0.05));
}

TEST_CASE("gamma moments") {
    Rng rng(102);
    const Moments big = sample_moments([&] { return rng.gamma(3.0); }, 200000);
    CHECK(big.mean == doctest::Approx(3.0).epsilon(0.02));
    CHECK(big.var == doctest::Approx(3.0).epsilon(0.05));
    const Moments small = sample_moments([&] { return rng.gamma(0.3); }, 200000);
    CHECK(small.mean == doctest::Approx(0.3).epsilon(0.03));
    CHECK(small.var == doctest::Approx(0.3).epsilon(0.08));
}

TEST_CASE("generalized normal draws match the density's variance") {
    // Var = Gamma(3/q) / (q^{2/q} Gamma(1/q)): 2 at q=1, 1/4 at q=2,
    // 1920 at q=1/2.
    Rng rng(103);
    const Moments q1 = sample_moments([&] { return rng.gnd(1.0); }, 200000);
    CHECK(std::abs(q1.mean) < 0.02);
    CHECK(q1.var == doctest::Approx(2.0).epsilon(0.05));
    const Moments q2 = sample_moments([&] { return rng.gnd(2.0); }, 200000);
    CHECK(std::abs(q2.mean) < 0.01);
    CHECK(q2.var == doctest::Approx(0.25).epsilon(0.05));
    const Moments q15 = sample_moments([&] { return rng.gnd(1.5); }, 200000);
    // Gamma(2) / (1.5^{4/3} Gamma(2/3)) = 0.43403...
    CHECK(q15.var == doctest::Approx(0.434032).epsilon(0.05));
    const Moments qhalf = sample_moments([&] { return rng.gnd(0.5); }, 400000);
    CHECK(qhalf.var == doctest::Approx(1920.0).epsilon(0.15));
}

TEST_CASE("asymmetric laplace moments") {
    // mean = (b - a) / (ab), second moment = 2 (a^3 + b^3) / (a^2 b^2 (a+b)).
    Rng rng(104);
    const double a = 205.0, b = 5.0;
    const Moments m = sample_moments([&] { return rng.asym_laplace(a, b); }, 200000);
    CHECK(m.mean == doctest::Approx((b - a) / (a * b)).epsilon(0.02));
    const double second = 2.0 * (a * a * a + b * b * b) / (a * a * b * b * (a + b));
    CHECK(m.var == doctest::Approx(second - std::pow((b - a) / (a * b), 2)).epsilon(0.05));
    // Sign frequencies follow the tail rates: P(y > 0) = b / (a + b).
    int positive = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) positive += rng.asym_laplace(a, b) > 0.0 ? 1 : 0;
    CHECK(static_cast<double>(positive) / n == doctest::Approx(b / (a + b)).epsilon(0.10));
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Rng rng(55);
    rng.shuffle(v);
    std::vector<int> w(50);
    std::iota(w.begin(), w.end(), 0);
    Rng rng2(55);
    rng2.shuffle(w);
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    for (int i = 0; i < 50; ++i) CHECK(v[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("distribution argument validation") {
    Rng rng(1);
    CHECK_THROWS(rng.exponential(0.0));
    CHECK_THROWS(rng.laplace(-1.0));
    CHECK_THROWS(rng.asym_laplace(0.0, 1.0));
    CHECK_THROWS(rng.gamma(0.0));
    CHECK_THROWS(rng.gnd(-2.0));
}
