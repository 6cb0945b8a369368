#include "hjbverify/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace hjbv;

TEST_CASE("philox known-answer vectors") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniforms lie strictly inside (0,1)") {
    CHECK(uniform_open(0, 0) > 0.0);
    CHECK(uniform_open(0xffffffff, 0xffffffff) < 1.0);
}

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    CHECK(std::isfinite(normal_quantile(uniform_open(0, 0))));
}

TEST_CASE("streams are pure functions of their address") {
    const StreamAddress a(42);
    const StreamAddress b(42);
    const StreamAddress c(43);
    CHECK(a.uniforms(7, 3, Substream::increments) == b.uniforms(7, 3, Substream::increments));
    CHECK(a.uniforms(7, 3, Substream::increments) != c.uniforms(7, 3, Substream::increments));
    CHECK(a.uniforms(7, 3, Substream::increments) != a.uniforms(7, 3, Substream::bridge));
    CHECK(a.uniforms(7, 3, Substream::increments) != a.uniforms(7, 4, Substream::increments));
    CHECK(a.uniforms(7, 3, Substream::increments) != a.uniforms(8, 3, Substream::increments));
}

TEST_CASE("gaussian moments") {
    const StreamAddress rng(1);
    double s1 = 0.0;
    double s2 = 0.0;
    const int n = 200000;
    for (int p = 0; p < n / 2; ++p) {
        rng.normals(p, 0, 2, [&](int, double g) {
            s1 += g;
            s2 += g * g;
        });
    }
    CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
}
