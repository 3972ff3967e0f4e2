#include <gtest/gtest.h>

#include <random>

#include "radmat/dsp.hpp"
#include "radmat/sim.hpp"

using namespace radmat;

namespace {

// Closed-form sample value for one target, written independently of the simulator.
std::complex<double> expected_sample(const RadarConfig& c, const SimTarget& t, std::size_t m, std::size_t n, std::size_t k) {
    const double lambda = 299'792'458.0 / c.f0;
    const double four_pi = 4.0 * std::numbers::pi;
    const double pr = c.pt_gt_gr * lambda * lambda * t.rcs_m2 / (four_pi * four_pi * four_pi * std::pow(t.range_m, 4));
    const double fb = 2.0 * t.range_m * c.slope / 299'792'458.0;
    const double phase = 2.0 * std::numbers::pi * fb * static_cast<double>(k) / c.fs + four_pi * t.range_m / lambda +
                         four_pi * t.velocity_mps * c.chirp_interval * static_cast<double>(n) / lambda +
                         std::numbers::pi * std::sin(t.angle_rad) * static_cast<double>(m);
    return std::polar(std::sqrt(pr), phase);
}

// Hann-windowed DTFT power of one chirp at an arbitrary frequency.
double windowed_tone_power(const RadarCube& cube, std::size_t m, std::size_t n, double freq_hz) {
    const auto& c = cube.config();
    std::complex<double> acc{};
    const double N = static_cast<double>(c.n_samples);
    for (std::size_t k = 0; k < c.n_samples; ++k) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / N);
        acc += w * cube.at(m, n, k) * std::polar(1.0, -2.0 * std::numbers::pi * freq_hz * static_cast<double>(k) / c.fs);
    }
    return std::norm(acc);
}

RadarConfig small_config() {
    RadarConfig c;
    c.n_chirps = 32;
    return c;
}

} // namespace

TEST(Synthesize, MatchesClosedFormSignal) {
    const auto cfg = small_config();
    const SimTarget t{1.5, 2.0, rad_from_deg(10.0), 0.01, "t"};
    const auto cube = synthesize_cube(cfg, {t}, {0.0, 1});
    double max_err = 0.0, scale = std::abs(expected_sample(cfg, t, 0, 0, 0));
    for (std::size_t m = 0; m < cfg.n_channels; ++m)
        for (std::size_t n = 0; n < cfg.n_chirps; n += 7)
            for (std::size_t k = 0; k < cfg.n_samples; k += 13)
                max_err = std::max(max_err, std::abs(cube.at(m, n, k) - expected_sample(cfg, t, m, n, k)));
    EXPECT_LT(max_err / scale, 1e-9);
}

TEST(Synthesize, BeatFrequencyAtOnePointFiveMetres) {
    RadarConfig cfg;
    EXPECT_NEAR(2.0 * 1.5 * cfg.slope / kSpeedOfLight, 660e3, 500.0);
    const auto cube = synthesize_cube(small_config(), {SimTarget{1.5, 0.0, 0.0, 0.01, ""}}, {0.0, 1});
    const auto rd = range_doppler_map(cube);
    std::size_t best = 0;
    for (std::size_t r = 0; r < rd.n_range / 2; ++r)
        if (rd.at(r, zero_doppler_bin(cube.config())) > rd.at(best, zero_doppler_bin(cube.config()))) best = r;
    EXPECT_EQ(best, static_cast<std::size_t>(std::lround(1.5 / range_bin_size(cfg))));
}

TEST(Synthesize, EmptySceneWithoutNoiseIsZero) {
    const auto cube = synthesize_cube(small_config(), {}, {0.0, 1});
    for (const auto& v : cube.data()) ASSERT_EQ(v, Sample(0.0, 0.0));
}

TEST(Synthesize, RangeFourthPowerBetweenTwoTargets) {
    const auto cfg = small_config();
    const SimTarget a{1.0, 0.0, 0.0, 0.01, "a"}, b{2.0, 0.0, 0.0, 0.01, "b"};
    const auto cube = synthesize_cube(cfg, {a, b}, {0.0, 1});
    const double fa = 2.0 * a.range_m * cfg.slope / kSpeedOfLight;
    const double fb = 2.0 * b.range_m * cfg.slope / kSpeedOfLight;
    const double ratio_db = 10.0 * std::log10(windowed_tone_power(cube, 0, 0, fa) / windowed_tone_power(cube, 0, 0, fb));
    EXPECT_NEAR(ratio_db, 40.0 * std::log10(2.0), 0.2);
}

TEST(Synthesize, InterChannelPhaseIncrement) {
    const auto cfg = small_config();
    for (double deg : {-60.0, -10.0, 0.0, 7.5, 33.0, 80.0}) {
        const double th = rad_from_deg(deg);
        const auto cube = synthesize_cube(cfg, {SimTarget{1.2, 0.7, th, 0.01, ""}}, {0.0, 1});
        for (std::size_t m = 0; m + 1 < cfg.n_channels; ++m) {
            const double d = std::arg(cube.at(m + 1, 3, 17) / cube.at(m, 3, 17));
            EXPECT_NEAR(std::remainder(d - kPi * std::sin(th), 2.0 * kPi), 0.0, 1e-9) << deg;
        }
    }
}

TEST(Synthesize, DopplerPhaseStep) {
    const auto cfg = small_config();
    const SimTarget t{1.0, 3.0, 0.0, 0.01, ""};
    const auto cube = synthesize_cube(cfg, {t}, {0.0, 1});
    const double step = 4.0 * kPi * t.velocity_mps * cfg.chirp_interval / wavelength(cfg);
    for (std::size_t n = 0; n + 1 < cfg.n_chirps; ++n)
        EXPECT_NEAR(std::remainder(std::arg(cube.at(2, n + 1, 5) / cube.at(2, n, 5)) - step, 2 * kPi), 0.0, 1e-9);
}

TEST(Synthesize, EnergyScaling) {
    const auto cfg = small_config();
    auto peak = [&](double rcs) {
        const auto rd = range_doppler_map(synthesize_cube(cfg, {SimTarget{1.3, 0.0, 0.2, rcs, ""}}, {0.0, 1}));
        return *std::max_element(rd.power.begin(), rd.power.end());
    };
    EXPECT_NEAR(10.0 * std::log10(peak(0.02) / peak(0.01)), 3.010, 0.05);
}

TEST(Synthesize, RangeLawOnMeasuredSnr) {
    RadarConfig cfg;
    const double n0 = cfg.thermal_noise_power();
    const double rcs = rcs_for_snr(cfg, 1.0, linear_from_db(30.0), n0);
    const auto near = locate_targets(synthesize_cube(cfg, {SimTarget{1.0, 0.0, 0.0, rcs, ""}}, {n0, 3}));
    const auto far = locate_targets(synthesize_cube(cfg, {SimTarget{2.0, 0.0, 0.0, rcs, ""}}, {n0, 4}));
    ASSERT_EQ(near.size(), 1u);
    ASSERT_EQ(far.size(), 1u);
    EXPECT_NEAR(db_from_linear(near[0].snr_linear / far[0].snr_linear), 12.04, 0.3);
}

TEST(Noise, DeterministicPerSeed) {
    const auto cfg = small_config();
    const SimTarget t{1.0, 0.0, 0.0, 0.01, ""};
    const auto a = synthesize_cube(cfg, {t}, {1e-12, 42});
    const auto b = synthesize_cube(cfg, {t}, {1e-12, 42});
    const auto c = synthesize_cube(cfg, {t}, {1e-12, 43});
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
}

TEST(Noise, PowerAndCircularSymmetry) {
    const auto cfg = small_config();
    const double p = 2.5e-11;
    const auto cube = synthesize_cube(cfg, {}, {p, 7});
    double rr = 0, ii = 0, ri = 0;
    for (const auto& v : cube.data()) {
        rr += v.real() * v.real();
        ii += v.imag() * v.imag();
        ri += v.real() * v.imag();
    }
    const double n = static_cast<double>(cube.data().size());
    EXPECT_NEAR((rr + ii) / n / p, 1.0, 0.01);
    EXPECT_NEAR(rr / ii, 1.0, 0.02);
    EXPECT_NEAR(ri / n / p, 0.0, 0.01);
}

TEST(Synthesize, Superposition) {
    const auto cfg = small_config();
    const SimTarget a{0.8, 1.0, 0.1, 0.01, ""}, b{2.2, -2.0, -0.3, 0.05, ""};
    const auto ab = synthesize_cube(cfg, {a, b}, {0.0, 1});
    const auto ca = synthesize_cube(cfg, {a}, {0.0, 1});
    const auto cb = synthesize_cube(cfg, {b}, {0.0, 1});
    for (std::size_t i = 0; i < ab.data().size(); i += 31)
        EXPECT_LT(std::abs(ab.data()[i] - ca.data()[i] - cb.data()[i]), 1e-12 * std::abs(cb.data()[i]) + 1e-20);
}

TEST(Synthesize, RejectsOutOfRangeTargets) {
    RadarConfig cfg;
    EXPECT_NEAR(max_unambiguous_range(cfg), 10e6 * kSpeedOfLight / (2.0 * 66e12), 1e-9);
    auto reject = [&](SimTarget t, const std::string& field) {
        try {
            synthesize_cube(cfg, {t}, {0.0, 1});
            ADD_FAILURE() << "accepted " << field;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Rejected);
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    reject({max_unambiguous_range(cfg) + 0.1, 0, 0, 0.01, "far"}, "range");
    reject({0.0, 0, 0, 0.01, "zero"}, "range");
    reject({1.0, max_unambiguous_velocity(cfg) * 1.01, 0, 0.01, "fast"}, "velocity");
    reject({1.0, 0, 0, 0.0, "dark"}, "rcs");
    reject({1.0, 0, 2.0, 0.01, "wide"}, "angle");
}

TEST(SphereRcs, Examples) {
    EXPECT_NEAR(sphere_rcs(0.063).sigma_m2, 0.003117, 5e-7);
    EXPECT_NEAR(sphere_rcs(0.063).sigma_m2, 0.0031, 5e-5);
    EXPECT_TRUE(sphere_rcs(0.063).optical_regime);
    EXPECT_DOUBLE_EQ(sphere_rcs(2.0).sigma_m2, kPi);
    const auto small = sphere_rcs(0.040, 0.005);
    EXPECT_FALSE(small.optical_regime);
    EXPECT_GT(small.sigma_m2, 0.0);
    EXPECT_THROW(sphere_rcs(0.0), Error);
    EXPECT_THROW(sphere_rcs(-0.01), Error);
}

TEST(Synthesize, ThermalNoiseIsKTB) {
    RadarConfig cfg;
    EXPECT_DOUBLE_EQ(thermal_noise(cfg, 1).noise_power, 1.380649e-23 * 290.0 * 10e6);
}
