#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace spectra {

/// Deterministic, platform-independent PRNG (splitmix64 core).
///
/// Every random draw in the project flows from one root seed through named
/// sub-streams, e.g. Rng(seed, "shuffle/epoch3"): the same (seed, name) pair
/// always yields the same sequence, independent of call order elsewhere.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view stream);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform01();

    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (cached spare).
    double normal();
    double normal(double mu, double sigma);

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const int j = uniform_int(0, static_cast<int>(i));
            std::swap(v[i], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a over a byte string; also used for content checksums.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace spectra
