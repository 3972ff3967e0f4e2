// Simulate a calibration sphere and a glass target, then identify the glass.

#include <iostream>

#include "radmat/radmat.hpp"

int main() {
    using namespace radmat;
    const RadarConfig cfg;

    const SimTarget sphere{1.0, 0.0, 0.0, sphere_rcs(0.063).sigma_m2, "sphere"};
    const auto cal = calibrate(locate_targets(synthesize_cube(cfg, {sphere}, thermal_noise(cfg, 1))).front(), 0.063, cfg);
    std::cout << "K = " << cal.k() << "\n";

    Suite suite;
    const SuiteObject glass{"pane", MaterialClass::Glass, 1.2, rad_from_deg(8.0), 0.0, 4.0, 7};
    const auto target = object_target(glass, reference_reflectivity(suite, cfg), cfg);
    const auto dets = locate_targets(synthesize_cube(cfg, {target}, thermal_noise(cfg, glass.seed)));
    const auto params = estimate_em_parameters(dets.front(), cal, cfg);
    std::cout << to_record(params).to_string();

    const auto verdict = rule_based_classify(params);
    std::cout << "material: " << to_string(verdict.canonical_class) << " (" << verdict.rationale << ")\n";
}
