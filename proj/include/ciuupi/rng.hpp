#pragma once

// Reproducible random number streams.
//
// RngStream is a counter-based generator: draw n of stream (seed, k) is a
// pure function of (seed, k, n), so simulation run k can use stream k and
// results do not depend on scheduling. The state advance is the SplitMix64
// sequence with a per-stream start derived by mixing seed and stream index.

#include <cstdint>
#include <utility>
#include <vector>

#include "ciuupi/normal.hpp"

namespace ciuupi {

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}
}  // namespace detail

class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t base_seed, std::uint64_t stream_index)
        : base_seed_(base_seed), stream_index_(stream_index) {
        state_ = detail::mix64(detail::mix64(base_seed + 0x9E3779B97F4A7C15ULL) ^
                               detail::mix64(stream_index + 0xD1B54A32D192ED03ULL));
    }

    std::uint64_t base_seed() const { return base_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(state_);
    }

    // uniform on the open interval (0,1)
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal by inversion (platform-independent given IEEE doubles)
    double normal() { return norm_quantile(uniform()); }

  private:
    std::uint64_t base_seed_, stream_index_, state_;
};

// Cumulative distribution table of Binomial(n, p); cdf[k] = P(X <= k).
inline std::vector<double> binomial_cdf_table(int n, double p) {
    // work on min(p, 1-p) so the pmf recurrence cannot underflow at k = 0
    const bool flip = p > 0.5;
    const double q = flip ? 1.0 - p : p;
    std::vector<double> pmf(n + 1);
    double f = 1.0;
    for (int i = 0; i < n; ++i) f *= (1.0 - q);
    pmf[0] = f;
    const double odds = q / (1.0 - q);
    for (int k = 0; k < n; ++k) pmf[k + 1] = pmf[k] * odds * (n - k) / (k + 1);
    if (flip) {
        for (int k = 0; k <= n / 2; ++k) std::swap(pmf[k], pmf[n - k]);
    }
    std::vector<double> cdf(n + 1);
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
        acc += pmf[k];
        cdf[k] = acc;
    }
    cdf[n] = 1.0;
    return cdf;
}

// Inversion sampling against a cdf table: smallest k with cdf[k] >= u.
inline int invert_binomial_cdf(const std::vector<double>& cdf, double u) {
    int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
    while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (cdf[mid] >= u) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

inline int draw_binomial(RngStream& rng, int n, double p) {
    return invert_binomial_cdf(binomial_cdf_table(n, p), rng.uniform());
}

}  // namespace ciuupi
