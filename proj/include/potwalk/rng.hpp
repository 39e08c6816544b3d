#pragma once

#include <cstdint>
#include <cmath>

namespace potwalk {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream keyed by (seed, replica, site coordinates).
// The draw at a site depends only on that key, never on the enclosing
// window, so resampling any sub-window reproduces identical values.
class CounterRng {
public:
    CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() {
        return splitmix64(key_ ^ splitmix64(ctr_++ * 0x632be59bd9b4e019ULL));
    }

    // uniform in (0,1), never exactly 0 or 1
    double next_u01() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        if (u <= 0.0) u = 0x1.0p-53;
        if (u >= 1.0) u = 1.0 - 0x1.0p-53;
        return u;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace potwalk
