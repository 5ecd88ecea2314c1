#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mssde {

/// Philox4x32-10 counter-based generator.
///
/// Output is a pure function of (key, counter), so a stream is fully
/// determined by the values fed into the constructor. Streams derived from
/// distinct (seed, stream, substream) triples are independent for all
/// practical purposes, which makes per-path reproducibility independent of
/// thread count and batch order.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter round10(Counter ctr, Key key);
};

/// One reproducible random stream, addressed by (seed, stream, substream).
///
/// Typical use: stream = path index, substream = role of the noise within
/// the path (0 = driving Brownian motion / chain clocks, 1 = auxiliary
/// independent Brownian motion). All draws are consumed sequentially; the
/// stream owns no shared state.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01();

    /// Uniform on (0, 1]; safe to pass to log().
    double uniform_pos() { return 1.0 - uniform01(); }

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

    /// Exponential with the given rate (rate > 0).
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    std::uint64_t next_u64();

private:
    void refill();

    Philox4x32::Key key_;
    std::array<std::uint32_t, 2> stream_words_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;  // empty
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

}  // namespace mssde
