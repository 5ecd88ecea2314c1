#include "mssde/rng.hpp"

namespace mssde {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMultA = 0xD2511F53u;
constexpr std::uint32_t kMultB = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline void one_round(Philox4x32::Counter& ctr, const Philox4x32::Key& key) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMultA, ctr[0], hi0, lo0);
    mulhilo(kMultB, ctr[2], hi1, lo1);
    Philox4x32::Counter out;
    out[0] = hi1 ^ ctr[1] ^ key[0];
    out[1] = lo1;
    out[2] = hi0 ^ ctr[3] ^ key[1];
    out[3] = lo0;
    ctr = out;
}

// splitmix64, used only to whiten the (seed, substream) pair into a key.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

Philox4x32::Counter Philox4x32::round10(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
        one_round(ctr, key);
        key[0] += kWeylA;
        key[1] += kWeylB;
    }
    return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
    std::uint64_t k = mix64(seed ^ mix64(substream));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    stream_words_ = {static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32)};
}

void RngStream::refill() {
    Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block_),
                               static_cast<std::uint32_t>(block_ >> 32),
                               stream_words_[0], stream_words_[1]};
    buf_ = Philox4x32::round10(ctr, key_);
    ++block_;
    buf_pos_ = 0;
}

std::uint64_t RngStream::next_u64() {
    if (buf_pos_ > 2) refill();
    std::uint64_t lo = buf_[static_cast<std::size_t>(buf_pos_)];
    std::uint64_t hi = buf_[static_cast<std::size_t>(buf_pos_ + 1)];
    buf_pos_ += 2;
    return (hi << 32) | lo;
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform_pos();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
}

}  // namespace mssde
