#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fedlab::rng {

// Counter-based stream: every draw is a pure function of (key, counter), so
// results do not depend on execution order or thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

inline std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Stream {
public:
    Stream(std::uint64_t master_seed, std::string_view purpose,
           std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0)
        : key_(mix(mix(mix(mix(master_seed, tag_hash(purpose)), a), b), c)) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x2545f4914f6cdd1dULL * (++counter_)); }

    // uniform in (0,1)
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    bool next_bernoulli(double p) { return next_uniform() < p; }

    // uniform integer in [0, n)
    std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fedlab::rng
