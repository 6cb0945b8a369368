#pragma once

#include <array>
#include <cstdint>

namespace hjbv {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block of four
/// 32-bit words is a pure function of (counter, key), so any (path, step)
/// stream can be generated independently of scheduling order.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Named substreams within one (path, step) cell.
enum class Substream : std::uint32_t {
    increments = 0,
    bridge = 1,
    probe = 2,
};

/// Uniform on the open interval (0,1) from two 32-bit words (53-bit mantissa).
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile.
double normal_quantile(double u);

/// Deterministic random draws addressed by (seed, path, step, substream).
class StreamAddress {
public:
    explicit StreamAddress(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Two uniforms in (0,1) from one Philox block.
    std::array<double, 2> uniforms(std::uint64_t path, std::uint32_t step, Substream stream,
                                   std::uint32_t block = 0) const {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                                      step, (static_cast<std::uint32_t>(stream) << 16) | block};
        const auto out = Philox4x32::generate(ctr, key_);
        return {uniform_open(out[0], out[1]), uniform_open(out[2], out[3])};
    }

    /// Fills `count` standard normals for the (path, step) increment stream.
    template <typename Out>
    void normals(std::uint64_t path, std::uint32_t step, int count, Out&& out) const {
        for (int j = 0; j < count; j += 2) {
            const auto u = uniforms(path, step, Substream::increments, static_cast<std::uint32_t>(j / 2));
            out(j, normal_quantile(u[0]));
            if (j + 1 < count) {
                out(j + 1, normal_quantile(u[1]));
            }
        }
    }

private:
    Philox4x32::Key key_;
};

} // namespace hjbv
