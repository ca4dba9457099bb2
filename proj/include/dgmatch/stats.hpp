#ifndef DGMATCH_STATS_HPP
#define DGMATCH_STATS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace dgmatch {

struct Percentiles {
    double p10 = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double p90 = 0.0;
};

/// Percentile by linear interpolation between order statistics. `sorted`
/// must be ascending; p in [0, 1].
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile: empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline Percentiles percentiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {percentile_sorted(values, 0.10), percentile_sorted(values, 0.25),
            percentile_sorted(values, 0.50), percentile_sorted(values, 0.75),
            percentile_sorted(values, 0.90)};
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, 0.50);
}

} // namespace dgmatch

#endif // DGMATCH_STATS_HPP
