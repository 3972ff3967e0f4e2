#pragma once

// Calibration constant, RCS recovery, peak-reflection-cell reflectivity and
// the vertical-polarization Fresnel model with its closed-form inversion.

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>

#include "radmat/core.hpp"
#include "radmat/dsp.hpp"
#include "radmat/sim.hpp"

namespace radmat {

/// Gamma_f at or above this is reported as metal-like.
inline constexpr double kMetalLikeGamma = 0.95;
/// Gamma_f at or above this still inverts but the permittivity is flagged.
inline constexpr double kHighPermittivityGamma = 0.98;
inline constexpr double kInversionTolerance = 1e-6;

class Calibration {
public:
    Calibration(double k, double rho_ref, std::string source = {})
        : k_(k), rho_ref_(rho_ref), source_(std::move(source)) {
        if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorKind::Domain, "calibration constant K must be positive");
        if (!(rho_ref > 0.0) || !std::isfinite(rho_ref))
            throw Error(ErrorKind::Domain, "reference reflectivity must be positive");
    }

    double k() const { return k_; }
    double rho_ref() const { return rho_ref_; }
    const std::string& source() const { return source_; }

    /// Same K, reflectivity reference taken from a separate perfect-reflector measurement.
    Calibration with_reference_reflectivity(double rho_ref, std::string note) const {
        return Calibration(k_, rho_ref, source_ + "; " + note);
    }

private:
    double k_;
    double rho_ref_;
    std::string source_;
};

struct Prca {
    double range_extent_m = 0.0;
    double cross_range_extent_m = 0.0;
    double area_m2 = 0.0;
};

/// Peak reflection cell: one range bin deep, one half-power beam wide.
inline Prca prca_area(double range_m, double range_bin_m, double hpbw_rad) {
    if (!(range_m > 0.0)) throw Error(ErrorKind::DegenerateGeometry, "peak reflection cell needs range > 0");
    if (!(range_bin_m > 0.0) || !(hpbw_rad > 0.0))
        throw Error(ErrorKind::DegenerateGeometry, "peak reflection cell needs positive extents");
    Prca p;
    p.range_extent_m = range_bin_m;
    p.cross_range_extent_m = range_m * hpbw_rad;
    p.area_m2 = p.range_extent_m * p.cross_range_extent_m;
    return p;
}

/// Uses the beam width of the array steered to the detection angle.
inline Prca prca_area(const TargetDetection& det, const RadarConfig& cfg) {
    return prca_area(det.range_m, range_bin_size(cfg), half_power_beamwidth(cfg.n_channels, det.angle_rad));
}

/// K = SNR * R^4 / sigma_c for an optical-regime sphere. The reference
/// reflectivity is the sphere's own per-area reflectivity at its cell.
inline Calibration calibrate(double snr_linear, double range_m, double sphere_diameter_m, const RadarConfig& cfg) {
    if (!(snr_linear > 0.0)) throw Error(ErrorKind::Domain, "calibration SNR must be positive");
    if (!(range_m > 0.0)) throw Error(ErrorKind::Domain, "calibration range must be positive");
    const auto sphere = sphere_rcs(sphere_diameter_m, wavelength(cfg));
    if (!sphere.optical_regime)
        throw Error(ErrorKind::Domain, "calibration sphere must be at least 10 wavelengths across");
    const double r2 = range_m * range_m;
    const double k = snr_linear * r2 * r2 / sphere.sigma_m2;
    const auto cell = prca_area(range_m, range_bin_size(cfg), half_power_beamwidth(cfg.n_channels, 0.0));
    std::string src = "sphere d=" + format_double(sphere_diameter_m) + " m, sigma_c=" + format_double(sphere.sigma_m2) +
                      " m2, R=" + format_double(range_m) + " m, snr=" + format_double(snr_linear);
    return Calibration(k, sphere.sigma_m2 / cell.area_m2, std::move(src));
}

inline Calibration calibrate(double snr_linear, double range_m, double sphere_diameter_m) {
    return calibrate(snr_linear, range_m, sphere_diameter_m, RadarConfig{});
}

/// Calibration from a sphere detection; the reference cell uses the beam
/// width at the sphere's measured angle.
inline Calibration calibrate(const TargetDetection& sphere, double sphere_diameter_m, const RadarConfig& cfg) {
    const auto base = calibrate(sphere.snr_linear, sphere.range_m, sphere_diameter_m, cfg);
    const auto cell = prca_area(sphere, cfg);
    const double sigma_c = sphere_rcs(sphere_diameter_m, wavelength(cfg)).sigma_m2;
    return Calibration(base.k(), sigma_c / cell.area_m2,
                       base.source() + ", angle_deg=" + format_double(deg_from_rad(sphere.angle_rad)));
}

/// K computed directly from the system constants (no measurement).
inline double system_constant(const RadarConfig& cfg) {
    const double lambda = wavelength(cfg);
    return cfg.pt_gt_gr * lambda * lambda / (detail::kFourPiCubed * cfg.thermal_noise_power());
}

inline double rcs_from_snr(double snr_linear, double range_m, const std::optional<Calibration>& cal) {
    if (!cal) throw Error(ErrorKind::MissingCalibration, "no calibration loaded");
    if (!(snr_linear > 0.0)) throw Error(ErrorKind::Domain, "SNR must be positive");
    if (!(range_m > 0.0)) throw Error(ErrorKind::Domain, "range must be positive");
    const double r2 = range_m * range_m;
    return snr_linear * r2 * r2 / cal->k();
}

inline double power_reflection(double sigma_m2, const Prca& cell) {
    if (!(cell.area_m2 > 0.0)) throw Error(ErrorKind::DegenerateGeometry, "peak reflection cell has zero area");
    if (!(sigma_m2 >= 0.0)) throw Error(ErrorKind::Domain, "RCS must be non-negative");
    return sigma_m2 / cell.area_m2;
}

struct GammaEstimate {
    double gamma_f = 0.0;
    bool clamped = false; // rho exceeded the perfect-reflector reference
};

inline GammaEstimate gamma_from_rho(double rho, const Calibration& cal) {
    const double ratio = std::max(rho, 0.0) / cal.rho_ref();
    if (!(ratio <= 1.0)) return {1.0, true};
    return {std::sqrt(ratio), false};
}

/// Vertical-polarization Fresnel coefficient. Works for real or complex
/// permittivity; only the real case is used by the inversion.
template <class T>
T fresnel_vertical(T epsilon_r, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const T a = epsilon_r * c;
    const T b = std::sqrt(epsilon_r - s * s);
    return (a - b) / (a + b);
}

inline double fresnel_forward(double epsilon_r, double theta) {
    if (!(std::abs(theta) < kPi / 2)) throw Error(ErrorKind::Domain, "incidence angle must lie within +/-90 deg");
    const double s = std::sin(theta);
    if (epsilon_r < s * s) throw Error(ErrorKind::Domain, "permittivity below sin^2(theta) has no real branch");
    return fresnel_vertical(epsilon_r, theta);
}

struct PermittivityEstimate {
    double epsilon_r = 1.0;
    double residual = 0.0; // |fresnel_forward(epsilon_r) - gamma_f|
    bool high_permittivity_warning = false;
};

/// Both roots of the squared Fresnel relation; `[0]` is the + branch.
inline std::array<double, 2> permittivity_branches(double gamma_f, double theta) {
    const double gp = gamma_f + 1.0, gm = gamma_f - 1.0;
    const double c = std::cos(theta);
    const double x = std::sin(2.0 * theta) * gm / gp;
    const double root = std::sqrt(std::max(0.0, 1.0 - x * x));
    const double scale = gp * gp / (2.0 * c * c * gm * gm);
    // 1 - sqrt(1 - x^2) written without cancellation.
    return {scale * (1.0 + root), scale * (x * x / (1.0 + root))};
}

/// Picks the branch whose forward image reproduces gamma_f best, subject to epsilon_r >= 1.
inline PermittivityEstimate permittivity_from_gamma(double gamma_f, double theta) {
    if (!(gamma_f >= 0.0)) throw Error(ErrorKind::Domain, "Fresnel coefficient must be non-negative");
    if (gamma_f >= 1.0)
        throw Error(ErrorKind::SingularInput, "Fresnel coefficient of 1 (perfect conductor): metal-like, no finite permittivity");
    if (!(std::abs(theta) < kPi / 2)) throw Error(ErrorKind::Domain, "incidence angle must lie within +/-90 deg");

    std::optional<PermittivityEstimate> best;
    for (double eps : permittivity_branches(gamma_f, theta)) {
        if (!std::isfinite(eps)) continue;
        if (eps < 1.0) {
            if (eps < 1.0 - 1e-9) continue;
            eps = 1.0;
        }
        const double res = std::abs(fresnel_vertical(eps, theta) - gamma_f);
        if (!best || res < best->residual) best = PermittivityEstimate{eps, res, false};
    }
    if (!best || !(best->residual < kInversionTolerance))
        throw Error(ErrorKind::InversionFailure, "no permittivity branch reproduces gamma_f=" + format_double(gamma_f));
    best->high_permittivity_warning = gamma_f >= kHighPermittivityGamma;
    return *best;
}

/// Full chain: RCS -> peak reflection cell -> rho -> Gamma_f -> epsilon_r.
inline EMParameters estimate_em_parameters(const TargetDetection& det, const std::optional<Calibration>& cal,
                                           const RadarConfig& cfg) {
    EMParameters p;
    p.detection = det;
    try {
        p.rcs_m2 = rcs_from_snr(det.snr_linear, det.range_m, cal);
    } catch (const Error& e) {
        Error::rethrow_with_stage(e, "rcs");
    }
    Prca cell;
    try {
        cell = prca_area(det, cfg);
    } catch (const Error& e) {
        Error::rethrow_with_stage(e, "prca");
    }
    try {
        p.rho = power_reflection(p.rcs_m2, cell);
    } catch (const Error& e) {
        Error::rethrow_with_stage(e, "reflectivity");
    }
    const auto g = gamma_from_rho(p.rho, *cal);
    p.gamma_f = g.gamma_f;
    p.gamma_clamped = g.clamped;
    p.metal_like = g.clamped || g.gamma_f >= kMetalLikeGamma;
    if (g.gamma_f >= 1.0) {
        p.epsilon_r = std::numeric_limits<double>::infinity();
        return p;
    }
    try {
        const auto eps = permittivity_from_gamma(g.gamma_f, det.angle_rad);
        p.epsilon_r = eps.epsilon_r;
        p.high_permittivity_warning = eps.high_permittivity_warning;
    } catch (const Error& e) {
        Error::rethrow_with_stage(e, "permittivity");
    }
    return p;
}

// --- text records -----------------------------------------------------------

inline KvRecord to_record(const Calibration& cal) {
    KvRecord r;
    r.set("K", cal.k());
    r.set("rho_ref", cal.rho_ref());
    r.set("source", cal.source());
    return r;
}

inline Calibration calibration_from_record(const KvRecord& r) {
    return Calibration(r.get_double("K"), r.get_double("rho_ref"), r.get_or("source", ""));
}

inline Calibration load_calibration(const std::string& path) {
    const auto blocks = parse_kv_blocks(read_text_file(path));
    if (blocks.empty()) throw Error(ErrorKind::Format, "calibration file '" + path + "' is empty");
    return calibration_from_record(blocks.front());
}

/// The nine-field parameter record exchanged with the reasoner and the CLI.
inline KvRecord to_record(const EMParameters& p) {
    KvRecord r;
    r.set("range_m", p.detection.range_m);
    r.set("velocity_mps", p.detection.velocity_mps);
    r.set("angle_deg", deg_from_rad(p.detection.angle_rad));
    r.set("snr_db", db_from_linear(p.detection.snr_linear));
    r.set("rcs_m2", p.rcs_m2);
    r.set("rho", p.rho);
    r.set("gamma_f", p.gamma_f);
    r.set("epsilon_r", p.epsilon_r);
    r.set("metal_like_flag", p.metal_like ? "1" : "0");
    return r;
}

inline EMParameters em_parameters_from_record(const KvRecord& r) {
    EMParameters p;
    p.detection.range_m = r.get_double("range_m");
    p.detection.velocity_mps = r.get_double("velocity_mps");
    p.detection.angle_rad = rad_from_deg(r.get_double("angle_deg"));
    p.detection.snr_linear = linear_from_db(r.get_double("snr_db"));
    p.rcs_m2 = r.get_double("rcs_m2");
    p.rho = r.get_double("rho");
    p.gamma_f = r.get_double("gamma_f");
    p.epsilon_r = r.get_double("epsilon_r");
    p.metal_like = r.get_bool("metal_like_flag");
    p.gamma_clamped = p.gamma_f >= 1.0;
    p.high_permittivity_warning = p.gamma_f >= kHighPermittivityGamma && p.gamma_f < 1.0;
    return p;
}

inline std::vector<EMParameters> parse_em_parameters(std::string_view text) {
    std::vector<EMParameters> out;
    for (const auto& b : parse_kv_blocks(text)) out.push_back(em_parameters_from_record(b));
    return out;
}

} // namespace radmat
