#pragma once

// Beam geometry, transmit power, achievable rate and the detection-driven
// beam-training power for a base station covering a straight road link.
//
// Unit conventions: angles in radians, distances in metres, power in watts,
// bandwidth and frequencies in hertz, noise density in W/Hz. Conversions from
// dBm and degrees happen at the config boundary only.

#include "beampomdp/errors.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

namespace beampomdp {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

inline double watts_to_dbm(double watts) {
    if (!(watts > 0.0)) throw ConfigError("", "power must be positive to express in dBm");
    return 10.0 * std::log10(watts * 1e3);
}

inline double dbm_to_milliwatts(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double milliwatts_to_dbm(double mw) {
    if (!(mw > 0.0)) throw ConfigError("", "power must be positive to express in dBm");
    return 10.0 * std::log10(mw);
}

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

struct RadioConfig {
    double coverage_angle = degrees_to_radians(120.0); ///< total angular coverage, rad
    double distance = 10.0;                           ///< BS to road distance d0, m
    std::size_t num_sublinks = 10;
    double bandwidth = 400e6;           ///< W_tot, Hz
    double carrier_frequency = 60e9;    ///< Hz
    double antenna_efficiency = 1.0;    ///< xi in (0, 1]
    double noise_psd = dbm_to_watts(-174.0); ///< N0, W/Hz
    double micro_slot = 10e-6;          ///< Delta_t, s

    /// Length of one road sub-link, 2 d0 tan(Theta/2) / S.
    double sublink_length() const {
        return 2.0 * distance * std::tan(coverage_angle / 2.0) / static_cast<double>(num_sublinks);
    }

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }

    void validate() const {
        if (!(coverage_angle > 0.0 && coverage_angle < std::numbers::pi))
            throw ConfigError("radio.coverage_angle_deg", "must lie strictly between 0 and 180 degrees");
        if (!(distance > 0.0)) throw ConfigError("radio.distance_m", "must be positive");
        if (num_sublinks < 1) throw ConfigError("radio.num_sublinks", "must be at least 1");
        if (!(bandwidth > 0.0)) throw ConfigError("radio.bandwidth_hz", "must be positive");
        if (!(carrier_frequency > 0.0))
            throw ConfigError("radio.carrier_frequency_hz", "must be positive");
        if (!(antenna_efficiency > 0.0 && antenna_efficiency <= 1.0))
            throw ConfigError("radio.antenna_efficiency", "must lie in (0, 1]");
        if (!(noise_psd > 0.0)) throw ConfigError("radio.noise_psd_dbm_per_hz", "must be finite");
        if (!(micro_slot > 0.0)) throw ConfigError("radio.micro_slot_s", "must be positive");
    }
};

/// Target false-alarm and mis-detection probabilities for beam training.
struct DetectionSpec {
    double p_fa = 1e-3;
    double p_md = 1e-3;

    static DetectionSpec from_epsilon(double eps) { return {eps, eps}; }

    double p_detect() const { return 1.0 - p_md; }

    void validate() const {
        if (!(p_fa > 0.0 && p_fa < 1.0)) throw ConfigError("detection.p_fa", "must lie strictly in (0, 1)");
        if (!(p_md > 0.0 && p_md < 1.0)) throw ConfigError("detection.p_md", "must lie strictly in (0, 1)");
    }
};

/**
 * SNR scaling factor Gamma = lambda_w^2 xi / (8 pi N0 W_tot).
 *
 * The wavelength is c / fc. Writing it as fc / c gives a quantity in 1/m and
 * an SNR that is not dimensionless.
 */
inline double gamma_factor(const RadioConfig& cfg) {
    cfg.validate();
    const double lw = cfg.wavelength();
    return lw * lw * cfg.antenna_efficiency /
           (8.0 * std::numbers::pi * cfg.noise_psd * cfg.bandwidth);
}

struct AngleInterval {
    double lower = 0.0;
    double upper = 0.0;
    double width() const { return upper - lower; }
};

/// Angular support of the beam serving sub-link `s` (1-based).
inline AngleInterval beam_angles(const RadioConfig& cfg, std::size_t s) {
    cfg.validate();
    if (s < 1 || s > cfg.num_sublinks)
        throw std::out_of_range("beam index " + std::to_string(s) + " outside 1.." +
                                std::to_string(cfg.num_sublinks));
    const double half_road = cfg.distance * std::tan(cfg.coverage_angle / 2.0);
    const double ds = cfg.sublink_length();
    const auto edge = [&](std::size_t k) {
        return std::atan((-half_road + static_cast<double>(k) * ds) / cfg.distance);
    };
    return {edge(s - 1), edge(s)};
}

/// Total transmit power (W) that holds `target_snr` over `n_beams` sub-links.
/// Independent of which sub-links are covered.
inline double total_power(const RadioConfig& cfg, double target_snr, std::size_t n_beams) {
    if (!(target_snr >= 0.0)) throw ConfigError("", "target SNR must be non-negative");
    if (n_beams < 1 || n_beams > cfg.num_sublinks)
        throw std::out_of_range("beam count outside 1..S");
    return target_snr * cfg.sublink_length() * cfg.distance * static_cast<double>(n_beams) /
           gamma_factor(cfg);
}

/// Achievable rate in bit/s when `p_total` watts are spread over `n_beams`.
inline double achievable_rate(const RadioConfig& cfg, double p_total, std::size_t n_beams) {
    if (!(p_total >= 0.0)) throw ConfigError("", "transmit power must be non-negative");
    if (n_beams < 1) throw std::out_of_range("beam count must be at least 1");
    const double snr = gamma_factor(cfg) * p_total /
                       (cfg.sublink_length() * cfg.distance * static_cast<double>(n_beams));
    return cfg.bandwidth * std::log2(1.0 + snr);
}

/// Gaussian tail probability Q(x) = P[N(0,1) > x].
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Acklam's rational approximation of the standard normal lower-tail quantile,
// relative error about 1.15e-9 before refinement.
inline double normal_quantile_approx(double p) {
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

} // namespace detail

/// Inverse of q_function on (0, 1).
inline double q_inverse(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("", "Q^-1 argument must lie strictly in (0, 1)");
    // Work on the upper tail (x >= 0) where Q is computed with full relative precision.
    if (p > 0.5) return -q_inverse(1.0 - p);
    double x = -detail::normal_quantile_approx(p);
    for (int k = 0; k < 2; ++k) {
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        x += (q_function(x) - p) / pdf;
    }
    return x;
}

/// Linear SNR that meets the false-alarm / detection targets,
/// (Q^-1(P_FA) - Q^-1(P_D))^2 with P_D = 1 - P_MD.
inline double detection_snr(const DetectionSpec& spec) {
    spec.validate();
    // Q^-1(1 - P_MD) = -Q^-1(P_MD); avoids forming 1 - P_MD in floating point.
    const double spread = q_inverse(spec.p_fa) + q_inverse(spec.p_md);
    return spread * spread;
}

/// Per-beam power (W) required for beam training at the detection targets.
inline double min_bt_power(const RadioConfig& cfg, const DetectionSpec& spec) {
    return detection_snr(spec) * cfg.sublink_length() * cfg.distance / gamma_factor(cfg);
}

} // namespace beampomdp
