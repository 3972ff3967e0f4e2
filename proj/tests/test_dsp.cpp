#include <gtest/gtest.h>

#include <thread>

#include "radmat/dsp.hpp"
#include "radmat/sim.hpp"

using namespace radmat;

namespace {

const RadarConfig kCfg{};

double noise_power() { return kCfg.thermal_noise_power(); }

SimTarget target_at_snr(double r, double v, double deg, double snr_db) {
    return {r, v, rad_from_deg(deg), rcs_for_snr(kCfg, r, linear_from_db(snr_db), noise_power()), ""};
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Array-factor power computed directly from the element phasors.
double af_oracle(std::size_t n, double theta) {
    std::complex<double> acc{};
    for (std::size_t m = 0; m < n; ++m) acc += std::polar(1.0, std::numbers::pi * std::sin(theta) * static_cast<double>(m));
    return std::norm(acc) / static_cast<double>(n * n);
}

} // namespace

TEST(RangeDoppler, StaticTargetPeak) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{1.5, 0.0, 0.0, 0.01, ""}}, {0.0, 1});
    const auto rd = range_doppler_map(cube);
    ASSERT_EQ(rd.n_range, kCfg.n_samples);
    ASSERT_EQ(rd.n_doppler, kCfg.n_chirps);
    const auto idx = argmax(rd.power);
    EXPECT_EQ(idx / rd.n_doppler, static_cast<std::size_t>(std::lround(1.5 / range_bin_size(kCfg))));
    EXPECT_EQ(idx % rd.n_doppler, zero_doppler_bin(kCfg));
}

TEST(RangeDoppler, ZeroCube) {
    const auto rd = range_doppler_map(RadarCube(kCfg));
    for (double p : rd.power) ASSERT_EQ(p, 0.0);
    EXPECT_EQ(rd.noise_floor, 0.0);
    EXPECT_TRUE(detect_targets(rd, nullptr, kCfg).empty());
}

TEST(RangeDoppler, ApproachingTargetDopplerBin) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{1.0, 2.0, 0.0, 0.01, ""}}, {0.0, 1});
    const auto rd = range_doppler_map(cube);
    const auto idx = argmax(rd.power);
    const long offset = static_cast<long>(idx % rd.n_doppler) - static_cast<long>(zero_doppler_bin(kCfg));
    EXPECT_EQ(offset, std::lround(2.0 / doppler_bin_size(kCfg)));
}

TEST(RangeDoppler, NonNegativeWithNoiseFloor) {
    const auto rd = range_doppler_map(synthesize_cube(kCfg, {}, {noise_power(), 2}));
    for (double p : rd.power) ASSERT_GE(p, 0.0);
    EXPECT_GT(rd.noise_floor, 0.0);
}

TEST(RangeDoppler, LinearityUnderComplexScaling) {
    const auto cube = synthesize_cube(kCfg, {target_at_snr(1.1, 0.5, 5.0, 20.0)}, {noise_power(), 3});
    const std::complex<double> c(3.0, -4.0);
    std::vector<Sample> scaled(cube.data());
    for (auto& v : scaled) v *= c;
    const RadarCube cube2(kCfg, scaled);
    const auto a = range_doppler_map(cube), b = range_doppler_map(cube2);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.power.size(); ++i)
        if (a.power[i] > 0) worst = std::max(worst, std::abs(b.power[i] / (25.0 * a.power[i]) - 1.0));
    EXPECT_LT(worst, 1e-9);

    const auto da = locate_targets(cube), db = locate_targets(cube2);
    ASSERT_EQ(da.size(), db.size());
    for (std::size_t i = 0; i < da.size(); ++i) EXPECT_EQ(da[i].peak, db[i].peak);
}

TEST(RangeDoppler, ChannelPermutationInvariance) {
    const auto cube = synthesize_cube(kCfg, {target_at_snr(1.4, -1.0, 20.0, 25.0)}, {noise_power(), 4});
    RadarCube perm(kCfg);
    const std::size_t order[] = {3, 7, 0, 5, 1, 6, 2, 4};
    for (std::size_t m = 0; m < 8; ++m)
        for (std::size_t n = 0; n < kCfg.n_chirps; ++n)
            for (std::size_t k = 0; k < kCfg.n_samples; ++k) perm.at(m, n, k) = cube.at(order[m], n, k);
    const auto a = range_doppler_map(cube), b = range_doppler_map(perm);
    for (std::size_t i = 0; i < a.power.size(); ++i) ASSERT_NEAR(a.power[i], b.power[i], 1e-12 * a.power[i]);
}

TEST(RangeAngle, BoresightPeakAtZero) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{1.0, 0.0, 0.0, 0.01, ""}}, {0.0, 1});
    const auto grid = angle_grid(kCoarseAngleBins);
    const auto ra = range_angle_map(cube, grid);
    const std::size_t r = std::lround(1.0 / range_bin_size(kCfg));
    EXPECT_EQ(ra.angle_grid[argmax_angle(ra, r)], 0.0);
}

TEST(RangeAngle, FifteenDegrees) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{1.0, 0.0, rad_from_deg(15.0), 0.01, ""}}, {0.0, 1});
    const auto grid = angle_grid(kCoarseAngleBins);
    const auto ra = range_angle_map(cube, grid);
    const std::size_t r = std::lround(1.0 / range_bin_size(kCfg));
    const auto a = argmax_angle(ra, r);
    const double step = std::abs(grid[a + 1] - grid[a]);
    EXPECT_LE(std::abs(ra.angle_grid[a] - rad_from_deg(15.0)), step);
    for (double p : ra.power) ASSERT_GE(p, 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) ASSERT_GT(ra.angle_grid[i], ra.angle_grid[i - 1]);
}

TEST(RangeAngle, SymmetricPair) {
    const auto cube = synthesize_cube(
        kCfg, {SimTarget{1.2, 0.0, rad_from_deg(20.0), 0.01, "a"}, SimTarget{1.2, 0.0, rad_from_deg(-20.0), 0.01, "b"}},
        {0.0, 1});
    const auto grid = angle_grid(kCoarseAngleBins);
    const auto ra = range_angle_map(cube, grid);
    const std::size_t r = std::lround(1.2 / range_bin_size(kCfg));
    // the two strongest local maxima along angle
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t a = 1; a + 1 < grid.size(); ++a)
        if (ra.at(r, a) > ra.at(r, a - 1) && ra.at(r, a) >= ra.at(r, a + 1)) peaks.emplace_back(ra.at(r, a), a);
    std::sort(peaks.rbegin(), peaks.rend());
    ASSERT_GE(peaks.size(), 2u);
    const double p1 = grid[peaks[0].second], p2 = grid[peaks[1].second];
    const double step = 2.0 / (kCoarseAngleBins - 1) / std::cos(rad_from_deg(20.0));
    EXPECT_NEAR(p1, -p2, step);
    // coherent sources pull the peaks slightly inward; stay inside half a beam
    EXPECT_NEAR(std::abs(p1), rad_from_deg(20.0), half_power_beamwidth(8, rad_from_deg(20.0)) / 2);
}

TEST(RangeAngle, SingleChannelUnsupported) {
    RadarConfig c = kCfg;
    c.n_channels = 1;
    const auto cube = synthesize_cube(c, {SimTarget{1.0, 0.0, 0.0, 0.01, ""}}, {0.0, 1});
    try {
        range_angle_map(cube, angle_grid(65));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
    const auto dets = locate_targets(cube);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].angle_rad, 0.0);
}

TEST(Doa, NoiselessTenDegrees) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{1.5, 2.0, rad_from_deg(10.0), 0.01, ""}}, {0.0, 1});
    const auto dets = locate_targets(cube);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_NEAR(deg_from_rad(beamform_doa(cube, dets[0].peak)), 10.0, 0.1);
    EXPECT_NEAR(deg_from_rad(dets[0].angle_rad), 10.0, 0.1);
}

TEST(Doa, Boresight) {
    const auto cube = synthesize_cube(kCfg, {SimTarget{2.0, 0.0, 0.0, 0.01, ""}}, {0.0, 1});
    const auto dets = locate_targets(cube);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_NEAR(deg_from_rad(dets[0].angle_rad), 0.0, 0.1);
}

TEST(Doa, FlatResponseIsAmbiguous) {
    auto expect_ambiguous = [](const RadarCube& cube, const PeakBin& bins) {
        try {
            beamform_doa(cube, bins);
            ADD_FAILURE() << "resolved";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::AmbiguousDoa);
        }
    };
    expect_ambiguous(RadarCube(kCfg), PeakBin{30, 64, 0});

    // energy on a single channel has an angle-independent response
    const auto full = synthesize_cube(kCfg, {SimTarget{1.0, 0.0, 0.3, 0.01, ""}}, {0.0, 1});
    RadarCube one(kCfg);
    for (std::size_t n = 0; n < kCfg.n_chirps; ++n)
        for (std::size_t k = 0; k < kCfg.n_samples; ++k) one.at(3, n, k) = full.at(3, n, k);
    const auto rd = range_doppler_map(one);
    const auto idx = argmax(rd.power);
    expect_ambiguous(one, PeakBin{idx / rd.n_doppler, idx % rd.n_doppler, 0});
    EXPECT_NO_THROW(beamform_doa(full, PeakBin{idx / rd.n_doppler, idx % rd.n_doppler, 0}));
}

TEST(BeamPattern, HalfPowerBeamwidthMatchesMeasured) {
    const double hpbw = deg_from_rad(half_power_beamwidth(8));
    EXPECT_NEAR(hpbw, 12.8, 0.6);
    // dense numerical scan of the array factor
    double lo = 0, hi = 0;
    for (int i = 0; i <= 200000; ++i) {
        const double th = rad_from_deg(-20.0 + 40.0 * i / 200000.0);
        if (af_oracle(8, th) >= 0.5) {
            if (lo == 0) lo = th;
            hi = th;
        }
    }
    EXPECT_NEAR(hpbw, deg_from_rad(hi - lo), 1e-3);
}

TEST(BeamPattern, PeakNormalizedAndPositiveWidth) {
    const auto grid = angle_grid(kCoarseAngleBins);
    const auto bp = beam_pattern(8, 0.0, grid);
    EXPECT_DOUBLE_EQ(*std::max_element(bp.gains.begin(), bp.gains.end()), 1.0);
    EXPECT_GT(bp.hpbw, 0.0);
    for (std::size_t i = 0; i < grid.size(); i += 17) EXPECT_NEAR(bp.gains[i], af_oracle(8, grid[i]), 1e-12);
    // steering off boresight widens the beam
    EXPECT_GT(half_power_beamwidth(8, rad_from_deg(30.0)), half_power_beamwidth(8, 0.0));
}

TEST(Detection, SingleTargetAtThirtyDb) {
    const auto t = target_at_snr(1.5, 2.0, 10.0, 30.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto dets = locate_targets(synthesize_cube(kCfg, {t}, {noise_power(), seed}));
        ASSERT_EQ(dets.size(), 1u) << seed;
        EXPECT_LE(std::abs(dets[0].range_m - 1.5), range_bin_size(kCfg));
        EXPECT_LE(std::abs(dets[0].velocity_mps - 2.0), doppler_bin_size(kCfg));
        EXPECT_GT(dets[0].snr_linear, 0.0);
        EXPECT_GE(dets[0].range_m, 0.0);
        EXPECT_LE(std::abs(dets[0].angle_rad), kPi / 2);
    }
}

TEST(Detection, NoiseOnlyFalseAlarms) {
    int clean = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rd = range_doppler_map(synthesize_cube(kCfg, {}, {noise_power(), 5000 + seed}));
        clean += detect_targets(rd, nullptr, kCfg).empty() ? 1 : 0;
    }
    EXPECT_GE(clean, 99);
}

TEST(Detection, TwoTargetsFiveBinsApart) {
    const double dr = range_bin_size(kCfg);
    const auto a = target_at_snr(30 * dr, 0.0, 0.0, 25.0);
    const auto b = target_at_snr(35 * dr, 0.0, 0.0, 25.0);
    const auto dets = locate_targets(synthesize_cube(kCfg, {a, b}, {noise_power(), 8}));
    ASSERT_EQ(dets.size(), 2u);
    for (std::size_t i = 1; i < dets.size(); ++i) EXPECT_GE(dets[i - 1].snr_linear, dets[i].snr_linear);
    std::vector<double> ranges{dets[0].range_m, dets[1].range_m};
    std::sort(ranges.begin(), ranges.end());
    EXPECT_NEAR(ranges[0], 30 * dr, dr);
    EXPECT_NEAR(ranges[1], 35 * dr, dr);
}

TEST(Detection, HighSnrTargetHasNoGhosts) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto dets = locate_targets(synthesize_cube(kCfg, {target_at_snr(1.0, 0.0, 0.0, 50.0)}, {noise_power(), seed}));
        EXPECT_EQ(dets.size(), 1u) << seed;
    }
}

TEST(SnrEstimator, InjectedVersusMeasured) {
    for (double snr_db : {10.0, 20.0, 30.0, 40.0}) {
        const auto dets = locate_targets(synthesize_cube(kCfg, {target_at_snr(1.3, 0.8, -7.0, snr_db)}, {noise_power(), 21}));
        ASSERT_FALSE(dets.empty()) << snr_db;
        EXPECT_NEAR(db_from_linear(dets[0].snr_linear), snr_db, 1.5);
    }
}

TEST(SnrEstimator, MedianRatioSingleChannel) {
    EXPECT_NEAR(gamma_median_ratio(1), std::log(2.0), 1e-12);
    // Gamma(n,1) median is close to n - 1/3 for moderate n
    EXPECT_NEAR(gamma_median_ratio(8) * 8, 8 - 1.0 / 3 + 8.0 / (405 * 8), 1e-3);
}

TEST(Pipeline, ThreadIndependent) {
    const auto cube = synthesize_cube(kCfg, {target_at_snr(1.7, -0.4, 12.0, 28.0)}, {noise_power(), 9});
    const auto ref = run_pipeline(cube);
    std::vector<PipelineResult> results(4);
    std::vector<std::thread> threads;
    for (auto& r : results) threads.emplace_back([&] { r = run_pipeline(cube); });
    for (auto& t : threads) t.join();
    for (const auto& r : results) {
        EXPECT_EQ(r.rd.power, ref.rd.power);
        ASSERT_EQ(r.detections.size(), ref.detections.size());
        EXPECT_EQ(r.detections[0].snr_linear, ref.detections[0].snr_linear);
        EXPECT_EQ(r.detections[0].angle_rad, ref.detections[0].angle_rad);
    }
}
