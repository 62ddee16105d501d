#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace wr {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: draw k of stream `key` is mix64(key + (k+1) * golden gamma),
// i.e. splitmix64 addressed by counter. Streams are split by hashing (key, index).
class CounterRng {
public:
    using result_type = std::uint64_t;
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ + (++counter_) * kGamma); }

    // Uniform on the open interval (0, 1).
    double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

    CounterRng split(std::uint64_t index) const {
        return CounterRng(mix64(key_ ^ mix64(index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

// Fixed draw counts per variate keep coupled streams aligned across parameter changes.
inline double exponentialDraw(CounterRng& r, double rate) { return -std::log(r.uniform()) / rate; }

inline double normalDraw(CounterRng& r) {
    double u1 = r.uniform(), u2 = r.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace wr
