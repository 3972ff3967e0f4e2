#pragma once

// Shared domain types and unit conventions. Everything is SI internally
// (Hz, m, s, linear power); decibels only appear at I/O boundaries.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "radmat/error.hpp"
#include "radmat/kv.hpp"

namespace radmat {

inline constexpr double kSpeedOfLight = 299'792'458.0; // m/s
inline constexpr double kBoltzmann = 1.380649e-23;     // J/K
inline constexpr double kPi = std::numbers::pi;

namespace detail {
// (4*pi)^3 appears in the radar equation.
inline constexpr double kFourPiCubed = (4.0 * kPi) * (4.0 * kPi) * (4.0 * kPi);

// Combined Pt*Gt*Gr for which a 0.0031 m^2 sphere at 1 m gives 40 dB
// per-sample SNR with the default 60 GHz carrier and 290 K / 10 MHz noise.
inline constexpr double default_pt_gt_gr() {
    constexpr double lambda = kSpeedOfLight / 60e9;
    constexpr double k_system = 1.0e4 / 0.0031;
    return k_system * kFourPiCubed * kBoltzmann * 290.0 * 10e6 / (lambda * lambda);
}
} // namespace detail

struct RadarConfig {
    double f0 = 60e9;              // carrier, Hz
    double slope = 66e12;          // chirp slope, Hz/s (66 MHz/us)
    double bandwidth = 3.96e9;     // swept bandwidth, Hz
    double fs = 10e6;              // ADC rate, Hz
    std::size_t n_samples = 600;   // fast-time samples per chirp
    std::size_t n_chirps = 128;    // chirps per frame
    std::size_t n_channels = 8;    // virtual ULA channels, lambda/2 spacing
    double chirp_interval = 100e-6; // s
    double pt_gt_gr = detail::default_pt_gt_gr();
    double tn = 290.0;             // effective noise temperature, K
    double noise_bandwidth = 10e6; // Hz

    bool operator==(const RadarConfig&) const = default;

    /// Throws InvalidConfig when a structural invariant fails.
    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
        auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!finite_pos(f0)) fail("f0 must be positive");
        if (!finite_pos(fs)) fail("fs must be positive");
        if (!finite_pos(slope)) fail("slope must be positive");
        if (!finite_pos(bandwidth)) fail("bandwidth must be positive");
        if (!finite_pos(chirp_interval)) fail("chirp_interval must be positive");
        if (!finite_pos(pt_gt_gr)) fail("pt_gt_gr must be positive");
        if (!finite_pos(tn)) fail("tn must be positive");
        if (!finite_pos(noise_bandwidth)) fail("noise_bandwidth must be positive");
        if (n_samples < 2) fail("n_samples must be at least 2");
        if (n_chirps < 1) fail("n_chirps must be at least 1");
        if (n_channels < 1) fail("n_channels must be at least 1");
        const double swept = slope * (static_cast<double>(n_samples) / fs);
        if (std::abs(swept - bandwidth) > 1e-3 * bandwidth)
            fail("bandwidth must equal slope * n_samples / fs within 0.1%");
    }

    /// Thermal noise power k*Tn*B per complex sample.
    double thermal_noise_power() const { return kBoltzmann * tn * noise_bandwidth; }
};

inline double wavelength(const RadarConfig& cfg) {
    if (!(cfg.f0 > 0.0) || !std::isfinite(cfg.f0))
        throw Error(ErrorKind::InvalidConfig, "f0 must be positive");
    return kSpeedOfLight / cfg.f0;
}

inline double db_from_linear(double x) {
    if (!(x > 0.0)) throw Error(ErrorKind::Domain, "dB of a non-positive power ratio");
    return 10.0 * std::log10(x);
}

inline double linear_from_db(double db) { return std::pow(10.0, db / 10.0); }

inline double deg_from_rad(double r) { return r * 180.0 / kPi; }
inline double rad_from_deg(double d) { return d * kPi / 180.0; }

/// Range resolution c/(2B).
inline double range_bin_size(const RadarConfig& cfg) {
    cfg.validate();
    return kSpeedOfLight / (2.0 * cfg.bandwidth);
}

/// Velocity resolution lambda/(2 N T).
inline double doppler_bin_size(const RadarConfig& cfg) {
    cfg.validate();
    return wavelength(cfg) / (2.0 * static_cast<double>(cfg.n_chirps) * cfg.chirp_interval);
}

/// Largest range whose beat frequency stays below fs.
inline double max_unambiguous_range(const RadarConfig& cfg) {
    return cfg.fs * kSpeedOfLight / (2.0 * cfg.slope);
}

/// Doppler phase step must stay within (-pi, pi).
inline double max_unambiguous_velocity(const RadarConfig& cfg) {
    return wavelength(cfg) / (4.0 * cfg.chirp_interval);
}

/// `n_points` angles spanning [-pi/2, pi/2], uniform in sin(theta), ascending.
inline std::vector<double> angle_grid(std::size_t n_points) {
    if (n_points < 2) throw Error(ErrorKind::InvalidInput, "angle grid needs at least 2 points");
    std::vector<double> grid(n_points);
    const double step = 2.0 / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        // Mirror the upper half so the grid is exactly symmetric.
        const std::size_t j = std::min(i, n_points - 1 - i);
        const double s = -1.0 + step * static_cast<double>(j);
        grid[i] = (i == j) ? std::asin(s) : -std::asin(s);
    }
    if (n_points % 2 == 1) grid[n_points / 2] = 0.0;
    return grid;
}

inline std::vector<double> angle_grid(const RadarConfig& cfg, std::size_t n_points) {
    cfg.validate();
    return angle_grid(n_points);
}

// --- config text format ----------------------------------------------------

inline KvRecord to_record(const RadarConfig& cfg) {
    KvRecord r;
    r.set("f0", cfg.f0);
    r.set("slope", cfg.slope);
    r.set("bandwidth", cfg.bandwidth);
    r.set("fs", cfg.fs);
    r.set("n_samples", std::to_string(cfg.n_samples));
    r.set("n_chirps", std::to_string(cfg.n_chirps));
    r.set("n_channels", std::to_string(cfg.n_channels));
    r.set("chirp_interval", cfg.chirp_interval);
    r.set("pt_gt_gr", cfg.pt_gt_gr);
    r.set("tn", cfg.tn);
    r.set("noise_bandwidth", cfg.noise_bandwidth);
    return r;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RadarConfig radar_config_from_record(const KvRecord& r) {
    static const std::array<std::string_view, 11> known = {
        "f0", "slope", "bandwidth", "fs", "n_samples", "n_chirps",
        "n_channels", "chirp_interval", "pt_gt_gr", "tn", "noise_bandwidth"};
    for (const auto& [k, v] : r.entries()) {
        bool ok = false;
        for (auto name : known) ok = ok || k == name;
        if (!ok) throw Error(ErrorKind::InvalidConfig, "unknown config key '" + k + "'");
    }
    RadarConfig cfg;
    auto count = [&](std::string_view key, std::size_t fallback) -> std::size_t {
        if (!r.has(key)) return fallback;
        const long long v = r.get_int(key);
        if (v < 0) throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be non-negative");
        return static_cast<std::size_t>(v);
    };
    cfg.f0 = r.get_double_or("f0", cfg.f0);
    cfg.slope = r.get_double_or("slope", cfg.slope);
    cfg.bandwidth = r.get_double_or("bandwidth", cfg.bandwidth);
    cfg.fs = r.get_double_or("fs", cfg.fs);
    cfg.n_samples = count("n_samples", cfg.n_samples);
    cfg.n_chirps = count("n_chirps", cfg.n_chirps);
    cfg.n_channels = count("n_channels", cfg.n_channels);
    cfg.chirp_interval = r.get_double_or("chirp_interval", cfg.chirp_interval);
    cfg.pt_gt_gr = r.get_double_or("pt_gt_gr", cfg.pt_gt_gr);
    cfg.tn = r.get_double_or("tn", cfg.tn);
    cfg.noise_bandwidth = r.get_double_or("noise_bandwidth", cfg.noise_bandwidth);
    cfg.validate();
    return cfg;
}

inline std::string serialize_config(const RadarConfig& cfg) { return to_record(cfg).to_string(); }

inline RadarConfig parse_config(std::string_view text) {
    auto blocks = parse_kv_blocks(text);
    KvRecord merged;
    for (const auto& b : blocks)
        for (const auto& [k, v] : b.entries()) merged.set(k, v);
    return radar_config_from_record(merged);
}

inline RadarConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

// --- data types -----------------------------------------------------------

using Sample = std::complex<double>;

/// Complex baseband samples, [channel][chirp][sample] row-major.
class RadarCube {
public:
    explicit RadarCube(RadarConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        data_.assign(cfg_.n_channels * cfg_.n_chirps * cfg_.n_samples, Sample{});
    }

    RadarCube(RadarConfig cfg, std::vector<Sample> data) : cfg_(std::move(cfg)), data_(std::move(data)) {
        cfg_.validate();
        if (data_.size() != cfg_.n_channels * cfg_.n_chirps * cfg_.n_samples)
            throw Error(ErrorKind::InvalidInput, "cube data size does not match config dimensions");
        for (const auto& v : data_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw Error(ErrorKind::InvalidInput, "cube contains non-finite samples");
    }

    const RadarConfig& config() const { return cfg_; }
    std::size_t channels() const { return cfg_.n_channels; }
    std::size_t chirps() const { return cfg_.n_chirps; }
    std::size_t samples() const { return cfg_.n_samples; }

    Sample& at(std::size_t ch, std::size_t chirp, std::size_t k) {
        return data_[(ch * cfg_.n_chirps + chirp) * cfg_.n_samples + k];
    }
    const Sample& at(std::size_t ch, std::size_t chirp, std::size_t k) const {
        return data_[(ch * cfg_.n_chirps + chirp) * cfg_.n_samples + k];
    }

    const std::vector<Sample>& data() const { return data_; }
    std::vector<Sample>& data() { return data_; }

    bool operator==(const RadarCube&) const = default;

private:
    RadarConfig cfg_;
    std::vector<Sample> data_;
};

struct PeakBin {
    std::size_t range = 0;
    std::size_t doppler = 0;
    std::size_t angle = 0;
    bool operator==(const PeakBin&) const = default;
};

struct TargetDetection {
    double range_m = 0.0;
    double velocity_mps = 0.0; // positive = approaching
    double angle_rad = 0.0;    // from boresight
    double snr_linear = 0.0;   // per-sample (pre-integration) SNR
    PeakBin peak;
};

struct EMParameters {
    TargetDetection detection;
    double rcs_m2 = 0.0;
    double rho = 0.0;
    double gamma_f = 0.0;
    double epsilon_r = 1.0; // real part; +inf for a metal-like (gamma_f = 1) target
    bool metal_like = false;
    bool gamma_clamped = false;
    bool high_permittivity_warning = false;
};

} // namespace radmat
