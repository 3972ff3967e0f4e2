#pragma once

// Text scenarios for the simulator and the object suite used by `report`.
//
// Scenario file:
//   [target]                 one block per target
//   label = sphere
//   range = 1.0              m
//   velocity = 0             m/s, positive approaching
//   angle_deg = 0
//   rcs = 0.003117           m^2, or sphere_diameter = 0.063
//
//   [noise]                  optional; default is thermal noise, seed 1
//   power = thermal          or a linear power, or 0
//   seed = 7

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "radmat/em.hpp"
#include "radmat/reasoner.hpp"
#include "radmat/sim.hpp"

namespace radmat {

struct Scenario {
    std::vector<SimTarget> targets;
    std::optional<double> noise_power; // empty means thermal
    std::uint64_t seed = 1;

    NoiseSpec noise(const RadarConfig& cfg) const {
        return {noise_power.value_or(cfg.thermal_noise_power()), seed};
    }
};

namespace detail {

inline void check_fields(const KvRecord& r, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [k, v] : r.entries()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || k == a;
        if (!ok) throw Error(ErrorKind::Rejected, where + ": unknown field '" + k + "'");
    }
}

inline double field_double(const KvRecord& r, std::string_view key, const std::string& where) {
    const auto* s = r.find(key);
    if (!s) throw Error(ErrorKind::Rejected, where + ": missing field '" + std::string(key) + "'");
    const auto v = parse_double(*s);
    if (!v) throw Error(ErrorKind::Rejected, where + ": field '" + std::string(key) + "' is not a number");
    return *v;
}

inline double field_double_or(const KvRecord& r, std::string_view key, double fallback, const std::string& where) {
    return r.has(key) ? field_double(r, key, where) : fallback;
}

inline std::uint64_t field_seed(const KvRecord& r, const std::string& where) {
    const long long s = r.get_int("seed");
    if (s < 0) throw Error(ErrorKind::Rejected, where + ": field 'seed' must be non-negative");
    return static_cast<std::uint64_t>(s);
}

} // namespace detail

inline Scenario parse_scenario(std::string_view text, const RadarConfig& cfg) {
    Scenario sc;
    std::size_t n = 0;
    for (const auto& b : parse_kv_blocks(text)) {
        if (b.tag() == "target") {
            ++n;
            const std::string where = "target #" + std::to_string(n);
            detail::check_fields(b, {"label", "range", "velocity", "angle_deg", "rcs", "sphere_diameter"}, where);
            SimTarget t;
            t.label = b.get_or("label", "t" + std::to_string(n));
            t.range_m = detail::field_double(b, "range", where);
            t.velocity_mps = detail::field_double_or(b, "velocity", 0.0, where);
            t.angle_rad = rad_from_deg(detail::field_double_or(b, "angle_deg", 0.0, where));
            if (b.has("rcs") == b.has("sphere_diameter"))
                throw Error(ErrorKind::Rejected, where + ": give exactly one of 'rcs' or 'sphere_diameter'");
            t.rcs_m2 = b.has("rcs") ? detail::field_double(b, "rcs", where)
                                    : sphere_rcs(detail::field_double(b, "sphere_diameter", where), wavelength(cfg)).sigma_m2;
            validate_target(cfg, t);
            sc.targets.push_back(std::move(t));
        } else if (b.tag() == "noise") {
            detail::check_fields(b, {"power", "seed"}, "noise");
            if (b.has("power") && b.get("power") != "thermal") {
                const double p = detail::field_double(b, "power", "noise");
                if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::Rejected, "noise: field 'power' must be >= 0");
                sc.noise_power = p;
            }
            if (b.has("seed")) sc.seed = detail::field_seed(b, "noise");
        } else {
            throw Error(ErrorKind::Rejected, "unknown block [" + b.tag() + "]");
        }
    }
    return sc;
}

inline std::string serialize_scenario(const Scenario& sc) {
    std::string out;
    for (const auto& t : sc.targets) {
        KvRecord r("target");
        r.set("label", t.label);
        r.set("range", t.range_m);
        r.set("velocity", t.velocity_mps);
        r.set("angle_deg", deg_from_rad(t.angle_rad));
        r.set("rcs", t.rcs_m2);
        out += r.to_string() + "\n";
    }
    KvRecord n("noise");
    n.set("power", sc.noise_power ? format_double(*sc.noise_power) : std::string("thermal"));
    n.set("seed", std::to_string(sc.seed));
    return out + n.to_string();
}

// --- object suite -------------------------------------------------------------
//
//   [calibration]
//   diameter = 0.063
//   range = 1.0
//   angle_deg = 0
//   seed = 1
//
//   [object]
//   label = bottle
//   material = glass
//   range = 1.2
//   angle_deg = 5
//   velocity = 0
//   epsilon_r = 4.0          or reflector = perfect
//   seed = 11                optional

struct SuiteObject {
    std::string label;
    MaterialClass material = MaterialClass::Unknown;
    double range_m = 1.0;
    double angle_rad = 0.0;
    double velocity_mps = 0.0;
    double epsilon_r = std::numeric_limits<double>::infinity(); // inf = perfect reflector
    std::uint64_t seed = 0;
};

struct Suite {
    double sphere_diameter_m = 0.063;
    double calibration_range_m = 1.0;
    double calibration_angle_rad = 0.0;
    std::uint64_t calibration_seed = 1;
    std::vector<SuiteObject> objects;
};

inline Suite parse_suite(std::string_view text) {
    Suite s;
    bool have_cal = false;
    for (const auto& b : parse_kv_blocks(text)) {
        if (b.tag() == "calibration") {
            detail::check_fields(b, {"diameter", "range", "angle_deg", "seed"}, "calibration");
            s.sphere_diameter_m = detail::field_double_or(b, "diameter", s.sphere_diameter_m, "calibration");
            s.calibration_range_m = detail::field_double_or(b, "range", s.calibration_range_m, "calibration");
            s.calibration_angle_rad = rad_from_deg(detail::field_double_or(b, "angle_deg", 0.0, "calibration"));
            if (b.has("seed")) s.calibration_seed = detail::field_seed(b, "calibration");
            have_cal = true;
        } else if (b.tag() == "object") {
            const std::string where = "object #" + std::to_string(s.objects.size() + 1);
            detail::check_fields(b, {"label", "material", "range", "angle_deg", "velocity", "epsilon_r", "reflector", "seed"},
                                 where);
            SuiteObject o;
            o.label = b.get_or("label", "object" + std::to_string(s.objects.size() + 1));
            const auto m = material_class_from_string(b.get_or("material", ""));
            if (!m) throw Error(ErrorKind::Rejected, where + ": field 'material' is not a known class");
            o.material = *m;
            o.range_m = detail::field_double(b, "range", where);
            o.angle_rad = rad_from_deg(detail::field_double_or(b, "angle_deg", 0.0, where));
            o.velocity_mps = detail::field_double_or(b, "velocity", 0.0, where);
            if (b.has("epsilon_r") == b.has("reflector"))
                throw Error(ErrorKind::Rejected, where + ": give exactly one of 'epsilon_r' or 'reflector'");
            if (b.has("reflector")) {
                if (b.get("reflector") != "perfect")
                    throw Error(ErrorKind::Rejected, where + ": field 'reflector' must be 'perfect'");
            } else {
                o.epsilon_r = detail::field_double(b, "epsilon_r", where);
                if (!(o.epsilon_r >= 1.0)) throw Error(ErrorKind::Rejected, where + ": field 'epsilon_r' must be >= 1");
            }
            o.seed = b.has("seed") ? detail::field_seed(b, where) : 1000 + s.objects.size();
            s.objects.push_back(std::move(o));
        } else {
            throw Error(ErrorKind::Rejected, "unknown block [" + b.tag() + "]");
        }
    }
    if (!have_cal) throw Error(ErrorKind::Rejected, "suite has no [calibration] block");
    if (s.objects.empty()) throw Error(ErrorKind::Rejected, "suite has no [object] blocks");
    return s;
}

inline Suite load_suite(const std::string& path) { return parse_suite(read_text_file(path)); }

/// Reflectivity of a perfect reflector as the calibration defines it.
inline double reference_reflectivity(const Suite& s, const RadarConfig& cfg) {
    const double sigma_c = sphere_rcs(s.sphere_diameter_m, wavelength(cfg)).sigma_m2;
    const auto cell = prca_area(s.calibration_range_m, range_bin_size(cfg),
                                half_power_beamwidth(cfg.n_channels, s.calibration_angle_rad));
    return sigma_c / cell.area_m2;
}

/// Simulated RCS for an object: Gamma_f^2 * rho_ref * A_r at its position.
inline double object_rcs(const SuiteObject& o, double rho_ref, const RadarConfig& cfg) {
    const double g = std::isinf(o.epsilon_r) ? 1.0 : fresnel_forward(o.epsilon_r, o.angle_rad);
    const auto cell = prca_area(o.range_m, range_bin_size(cfg), half_power_beamwidth(cfg.n_channels, o.angle_rad));
    return g * g * rho_ref * cell.area_m2;
}

inline SimTarget calibration_target(const Suite& s, const RadarConfig& cfg) {
    return {s.calibration_range_m, 0.0, s.calibration_angle_rad, sphere_rcs(s.sphere_diameter_m, wavelength(cfg)).sigma_m2,
            "calibration sphere"};
}

inline SimTarget object_target(const SuiteObject& o, double rho_ref, const RadarConfig& cfg) {
    return {o.range_m, o.velocity_mps, o.angle_rad, object_rcs(o, rho_ref, cfg), o.label};
}

} // namespace radmat
