#pragma once

// Point-target FMCW baseband synthesis (stop-and-hop model).

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "radmat/core.hpp"

namespace radmat {

struct SimTarget {
    double range_m = 1.0;
    double velocity_mps = 0.0; // positive = approaching
    double angle_rad = 0.0;
    double rcs_m2 = 0.01;
    std::string label;
};

struct NoiseSpec {
    double noise_power = 0.0; // linear, per complex sample
    std::uint64_t rng_seed = 1;
};

/// Noise at the receiver's thermal level k*Tn*B.
inline NoiseSpec thermal_noise(const RadarConfig& cfg, std::uint64_t seed) {
    return {cfg.thermal_noise_power(), seed};
}

/// Throws Rejected naming the offending field; never aliases silently.
inline void validate_target(const RadarConfig& cfg, const SimTarget& t) {
    const std::string who = t.label.empty() ? std::string("target") : "target '" + t.label + "'";
    if (!(t.range_m > 0.0) || !(t.range_m < max_unambiguous_range(cfg)))
        throw Error(ErrorKind::Rejected, who + ": range " + format_double(t.range_m) +
                                             " m outside (0, " + format_double(max_unambiguous_range(cfg)) + ") m");
    if (!(std::abs(t.velocity_mps) < max_unambiguous_velocity(cfg)))
        throw Error(ErrorKind::Rejected, who + ": velocity " + format_double(t.velocity_mps) +
                                             " m/s beyond +/-" + format_double(max_unambiguous_velocity(cfg)) + " m/s");
    if (!(std::abs(t.angle_rad) <= kPi / 2))
        throw Error(ErrorKind::Rejected, who + ": angle must lie within +/-90 deg");
    if (!(t.rcs_m2 > 0.0) || !std::isfinite(t.rcs_m2))
        throw Error(ErrorKind::Rejected, who + ": rcs must be positive");
}

/// Received power from the radar equation, same units as the noise power.
inline double received_power(const RadarConfig& cfg, double range_m, double rcs_m2) {
    const double lambda = wavelength(cfg);
    const double r2 = range_m * range_m;
    return cfg.pt_gt_gr * lambda * lambda * rcs_m2 / (detail::kFourPiCubed * r2 * r2);
}

/// RCS that yields the given per-sample SNR (relative to `noise_power`) at a range.
inline double rcs_for_snr(const RadarConfig& cfg, double range_m, double snr_linear, double noise_power) {
    return snr_linear * noise_power / received_power(cfg, range_m, 1.0);
}

struct SphereRcs {
    double sigma_m2 = 0.0;
    bool optical_regime = true; // false when diameter < 10 wavelengths
};

/// Optical-regime sphere RCS: its geometric cross-section.
inline SphereRcs sphere_rcs(double diameter_m, double wavelength_m = kSpeedOfLight / 60e9) {
    if (!(diameter_m > 0.0) || !std::isfinite(diameter_m))
        throw Error(ErrorKind::Domain, "sphere diameter must be positive");
    const double r = diameter_m / 2.0;
    return {kPi * r * r, diameter_m >= 10.0 * wavelength_m};
}

inline RadarCube synthesize_cube(const RadarConfig& cfg, std::span<const SimTarget> targets, const NoiseSpec& noise) {
    cfg.validate();
    if (!(noise.noise_power >= 0.0) || !std::isfinite(noise.noise_power))
        throw Error(ErrorKind::InvalidInput, "noise power must be non-negative");
    for (const auto& t : targets) validate_target(cfg, t);

    RadarCube cube(cfg);
    const double lambda = wavelength(cfg);
    const std::size_t nm = cfg.n_channels, nn = cfg.n_chirps, nk = cfg.n_samples;

    std::vector<std::complex<double>> fast(nk), slow(nn), spatial(nm);
    for (const auto& t : targets) {
        const double amp = std::sqrt(received_power(cfg, t.range_m, t.rcs_m2));
        const double f_beat = 2.0 * t.range_m * cfg.slope / kSpeedOfLight;
        const double carrier_phase = 4.0 * kPi * t.range_m / lambda;
        const double doppler_step = 4.0 * kPi * t.velocity_mps * cfg.chirp_interval / lambda;
        const double spatial_step = kPi * std::sin(t.angle_rad); // d = lambda/2
        for (std::size_t k = 0; k < nk; ++k)
            fast[k] = std::polar(amp, 2.0 * kPi * f_beat * static_cast<double>(k) / cfg.fs + carrier_phase);
        for (std::size_t n = 0; n < nn; ++n) slow[n] = std::polar(1.0, doppler_step * static_cast<double>(n));
        for (std::size_t m = 0; m < nm; ++m) spatial[m] = std::polar(1.0, spatial_step * static_cast<double>(m));

        for (std::size_t m = 0; m < nm; ++m)
            for (std::size_t n = 0; n < nn; ++n) {
                const auto rot = spatial[m] * slow[n];
                for (std::size_t k = 0; k < nk; ++k) cube.at(m, n, k) += rot * fast[k];
            }
    }

    if (noise.noise_power > 0.0) {
        std::mt19937_64 rng(noise.rng_seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise.noise_power / 2.0));
        for (auto& v : cube.data()) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v += std::complex<double>(re, im);
        }
    }
    return cube;
}

inline RadarCube synthesize_cube(const RadarConfig& cfg, std::initializer_list<SimTarget> targets,
                                 const NoiseSpec& noise) {
    return synthesize_cube(cfg, std::span<const SimTarget>(targets.begin(), targets.size()), noise);
}

} // namespace radmat
