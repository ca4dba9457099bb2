#ifndef DGMATCH_NOISE_HPP
#define DGMATCH_NOISE_HPP

#include <cmath>
#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "dgmatch/rng.hpp"

namespace dgmatch {

// Measurement-noise models. Each one is a location family: the density is
// centered on the true edge length d, and the remaining parameters control
// the spread. Parameter conventions:
//   Gaussian  — theta is the VARIANCE (not the standard deviation)
//   Laplace   — theta is the scale; the variance works out to 2*theta^2
//   Nsst      — Student's t scaled by b; variance b^2*nu/(nu-2), needs nu > 2

struct Gaussian {
    double theta = 1.0; // variance
};

struct Laplace {
    double theta = 1.0; // scale
};

struct Nsst {
    int nu = 3;     // degrees of freedom, positive integer
    double b = 1.0; // scale
};

using NoiseModel = std::variant<Gaussian, Laplace, Nsst>;

enum class NoiseFamily { gaussian, laplace, nsst };

inline NoiseFamily family_of(const NoiseModel& model) {
    return static_cast<NoiseFamily>(model.index());
}

inline std::string_view family_name(NoiseFamily family) {
    switch (family) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::laplace: return "laplace";
        case NoiseFamily::nsst: return "nsst";
    }
    throw std::invalid_argument("unknown noise family");
}

inline std::optional<NoiseFamily> parse_family(std::string_view name) {
    if (name == "gaussian") return NoiseFamily::gaussian;
    if (name == "laplace") return NoiseFamily::laplace;
    if (name == "nsst") return NoiseFamily::nsst;
    return std::nullopt;
}

/// Validating constructors. Aggregate initialization stays available for
/// code that knowingly builds out-of-contract models (tests do).
inline NoiseModel make_gaussian(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw std::invalid_argument("gaussian: theta (variance) must be positive and finite");
    return Gaussian{theta};
}

inline NoiseModel make_laplace(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw std::invalid_argument("laplace: theta (scale) must be positive and finite");
    return Laplace{theta};
}

inline NoiseModel make_nsst(int nu, double b) {
    if (nu < 3)
        throw std::invalid_argument("nsst: nu must be an integer >= 3 (finite variance needs nu > 2)");
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("nsst: b (scale) must be positive and finite");
    return Nsst{nu, b};
}

inline double variance(const NoiseModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return m.theta;
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return 2.0 * m.theta * m.theta;
            } else {
                return m.b * m.b * static_cast<double>(m.nu) / static_cast<double>(m.nu - 2);
            }
        },
        model);
}

/// SNR target: snr_db relative to the squared mean edge length of the
/// structure under measurement.
struct SnrSpec {
    double snr_db = 0.0;
    double sigma_x = 1.0; // mean edge length of the target structure, > 0
};

/// Noise variance sigma^2 implied by SNR = 10*log10(sigma_x^2 / sigma^2).
inline double snr_to_sigma2(const SnrSpec& spec) {
    if (!(spec.sigma_x > 0.0) || !std::isfinite(spec.snr_db))
        throw std::invalid_argument("snr spec: sigma_x must be > 0 and snr_db finite");
    return spec.sigma_x * spec.sigma_x * std::pow(10.0, -spec.snr_db / 10.0);
}

/// Invert the variance formulas so sampled noise hits a target variance.
inline NoiseModel model_from_target_variance(NoiseFamily family, double sigma2,
                                             std::optional<int> nu = std::nullopt) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw std::invalid_argument("model_from_target_variance: sigma2 must be positive and finite");
    switch (family) {
        case NoiseFamily::gaussian:
            return make_gaussian(sigma2);
        case NoiseFamily::laplace:
            return make_laplace(std::sqrt(sigma2 / 2.0));
        case NoiseFamily::nsst: {
            if (!nu.has_value())
                throw std::invalid_argument("model_from_target_variance: nsst requires nu");
            if (*nu < 3)
                throw std::invalid_argument("model_from_target_variance: nsst nu must be >= 3");
            const double n = static_cast<double>(*nu);
            return make_nsst(*nu, std::sqrt(sigma2) * std::sqrt((n - 2.0) / n));
        }
    }
    throw std::invalid_argument("unknown noise family");
}

namespace detail {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112; // log(2*pi)
constexpr double kLogPi = 1.1447298858494001741434273513531;    // log(pi)

/// log of the standard Student's t density at w with nu degrees of freedom.
inline double log_student_t_pdf(double w, int nu) {
    const double n = static_cast<double>(nu);
    return std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0) -
           0.5 * (std::log(n) + kLogPi) - 0.5 * (n + 1.0) * std::log1p(w * w / n);
}

} // namespace detail

/// Natural log of the density at measurement y given location d.
inline double log_pdf(const NoiseModel& model, double y, double d) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            const double r = y - d;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return -0.5 * (detail::kLogTwoPi + std::log(m.theta)) - r * r / (2.0 * m.theta);
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return -std::log(2.0 * m.theta) - std::abs(r) / m.theta;
            } else {
                return -std::log(m.b) + detail::log_student_t_pdf(r / m.b, m.nu);
            }
        },
        model);
}

/// Derivative of log_pdf with respect to the location d. The Laplace kink at
/// y = d takes the subgradient midpoint 0, which keeps optimizer gradients
/// finite everywhere.
inline double dlogpdf_dd(const NoiseModel& model, double y, double d) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            const double r = y - d;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return r / m.theta;
            } else if constexpr (std::is_same_v<T, Laplace>) {
                if (r > 0.0) return 1.0 / m.theta;
                if (r < 0.0) return -1.0 / m.theta;
                return 0.0;
            } else {
                const double w = r / m.b;
                const double n = static_cast<double>(m.nu);
                return (n + 1.0) / m.b * w / (n + w * w);
            }
        },
        model);
}

/// Student's t draw with integer nu: Z / sqrt(V/nu) where V is a chi-squared
/// variable built as a sum of nu squared standard normals. Exact, no
/// rejection loop.
inline double sample_student_t(int nu, Rng& rng) {
    const double z = rng.normal();
    double v = 0.0;
    for (int k = 0; k < nu; ++k) {
        const double g = rng.normal();
        v += g * g;
    }
    return z / std::sqrt(v / static_cast<double>(nu));
}

/// One measurement draw with location d. Draws may be negative at very low
/// SNR; the densities have full support and the likelihood stays valid.
inline double sample(const NoiseModel& model, double d, Rng& rng) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return d + std::sqrt(m.theta) * rng.normal();
            } else if constexpr (std::is_same_v<T, Laplace>) {
                // Inverse CDF on u in (0,1): x = -theta * sgn(u-1/2) * log(1-2|u-1/2|)
                const double u = rng.open_unit() - 0.5;
                const double mag = -m.theta * std::log(1.0 - 2.0 * std::abs(u));
                return d + (u < 0.0 ? -mag : mag);
            } else {
                return d + m.b * sample_student_t(m.nu, rng);
            }
        },
        model);
}

// Textual encoding used by config files and the CLI:
//   gaussian:theta=<f>   laplace:theta=<f>   nsst:nu=<int>,b=<f>

inline std::string format_noise_model(const NoiseModel& model) {
    char buf[64];
    return std::visit(
        [&](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, m.theta);
                return "gaussian:theta=" + std::string(buf, p);
            } else if constexpr (std::is_same_v<T, Laplace>) {
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, m.theta);
                return "laplace:theta=" + std::string(buf, p);
            } else {
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, m.b);
                return "nsst:nu=" + std::to_string(m.nu) + ",b=" + std::string(buf, p);
            }
        },
        model);
}

namespace detail {

inline double parse_double_token(std::string_view token, std::string_view what) {
    double value = 0.0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || p != token.data() + token.size())
        throw std::invalid_argument("noise model: bad " + std::string(what) + " value '" +
                                    std::string(token) + "'");
    return value;
}

inline int parse_int_token(std::string_view token, std::string_view what) {
    int value = 0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || p != token.data() + token.size())
        throw std::invalid_argument("noise model: bad " + std::string(what) + " value '" +
                                    std::string(token) + "'");
    return value;
}

inline std::string_view expect_prefix(std::string_view s, std::string_view prefix,
                                      std::string_view spec) {
    if (s.substr(0, prefix.size()) != prefix)
        throw std::invalid_argument("noise model: expected '" + std::string(prefix) +
                                    "' in '" + std::string(spec) + "'");
    return s.substr(prefix.size());
}

} // namespace detail

/// Parse the full parametric encoding, e.g. "laplace:theta=0.5".
inline NoiseModel parse_noise_model(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string_view head = spec.substr(0, colon);
    const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
    const auto family = parse_family(head);
    if (!family)
        throw std::invalid_argument("noise model: unknown family '" + std::string(head) + "'");
    switch (*family) {
        case NoiseFamily::gaussian:
            return make_gaussian(detail::parse_double_token(
                detail::expect_prefix(rest, "theta=", spec), "theta"));
        case NoiseFamily::laplace:
            return make_laplace(detail::parse_double_token(
                detail::expect_prefix(rest, "theta=", spec), "theta"));
        case NoiseFamily::nsst: {
            const auto comma = rest.find(',');
            if (comma == std::string_view::npos)
                throw std::invalid_argument("noise model: nsst needs 'nu=<int>,b=<f>' in '" +
                                            std::string(spec) + "'");
            const int nu = detail::parse_int_token(
                detail::expect_prefix(rest.substr(0, comma), "nu=", spec), "nu");
            const double b = detail::parse_double_token(
                detail::expect_prefix(rest.substr(comma + 1), "b=", spec), "b");
            return make_nsst(nu, b);
        }
    }
    throw std::invalid_argument("unknown noise family");
}

} // namespace dgmatch

#endif // DGMATCH_NOISE_HPP
