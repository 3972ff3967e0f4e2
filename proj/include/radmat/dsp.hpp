#pragma once

// Range-Doppler / range-angle maps and target localization.
//
// Layout conventions:
//   spectra  [channel][range][doppler], Doppler fft-shifted (zero velocity at n_chirps/2)
//   RD map   [range][doppler]
//   RA map   [range][angle]

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "radmat/core.hpp"
#include "radmat/fft.hpp"

namespace radmat {

// --- spectra --------------------------------------------------------------

class RangeDopplerSpectra {
public:
    explicit RangeDopplerSpectra(const RadarConfig& cfg)
        : cfg_(cfg), data_(cfg.n_channels * cfg.n_samples * cfg.n_chirps) {}

    const RadarConfig& config() const { return cfg_; }
    std::size_t channels() const { return cfg_.n_channels; }
    std::size_t range_bins() const { return cfg_.n_samples; }
    std::size_t doppler_bins() const { return cfg_.n_chirps; }

    std::complex<double>& at(std::size_t ch, std::size_t r, std::size_t d) {
        return data_[(ch * range_bins() + r) * doppler_bins() + d];
    }
    const std::complex<double>& at(std::size_t ch, std::size_t r, std::size_t d) const {
        return data_[(ch * range_bins() + r) * doppler_bins() + d];
    }

private:
    RadarConfig cfg_;
    std::vector<std::complex<double>> data_;
};

inline std::size_t zero_doppler_bin(const RadarConfig& cfg) { return cfg.n_chirps / 2; }

/// Hann-windowed FFT over fast time, then over slow time, per channel.
inline RangeDopplerSpectra compute_spectra(const RadarCube& cube) {
    const auto& cfg = cube.config();
    const std::size_t nm = cfg.n_channels, nn = cfg.n_chirps, nk = cfg.n_samples;
    const auto wr = hann_window(nk);
    const auto wd = hann_window(nn);
    RangeDopplerSpectra out(cfg);

    FftPlan range_fft(nk);
    FftPlan doppler_fft(nn);
    std::vector<std::complex<double>> range_profiles(nn * nk);
    const std::size_t shift = zero_doppler_bin(cfg);
    for (std::size_t m = 0; m < nm; ++m) {
        for (std::size_t n = 0; n < nn; ++n) {
            auto buf = range_fft.buffer();
            for (std::size_t k = 0; k < nk; ++k) buf[k] = cube.at(m, n, k) * wr[k];
            range_fft.execute();
            std::copy(buf.begin(), buf.end(), range_profiles.begin() + static_cast<std::ptrdiff_t>(n * nk));
        }
        for (std::size_t r = 0; r < nk; ++r) {
            auto buf = doppler_fft.buffer();
            for (std::size_t n = 0; n < nn; ++n) buf[n] = range_profiles[n * nk + r] * wd[n];
            doppler_fft.execute();
            for (std::size_t d = 0; d < nn; ++d) out.at(m, r, (d + shift) % nn) = buf[d];
        }
    }
    return out;
}

// --- RD map ---------------------------------------------------------------

struct RDMap {
    std::size_t n_range = 0;
    std::size_t n_doppler = 0;
    std::vector<double> power; // [range][doppler]
    double noise_floor = 0.0;

    double at(std::size_t r, std::size_t d) const { return power[r * n_doppler + d]; }
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// Non-coherent (|.|^2) accumulation over channels; noise floor = median cell.
inline RDMap range_doppler_map(const RangeDopplerSpectra& spec) {
    RDMap map;
    map.n_range = spec.range_bins();
    map.n_doppler = spec.doppler_bins();
    map.power.assign(map.n_range * map.n_doppler, 0.0);
    for (std::size_t m = 0; m < spec.channels(); ++m)
        for (std::size_t r = 0; r < map.n_range; ++r)
            for (std::size_t d = 0; d < map.n_doppler; ++d) map.power[r * map.n_doppler + d] += std::norm(spec.at(m, r, d));
    map.noise_floor = median_of(map.power);
    return map;
}

inline RDMap range_doppler_map(const RadarCube& cube) { return range_doppler_map(compute_spectra(cube)); }

// --- RA map ---------------------------------------------------------------

struct RAMap {
    std::size_t n_range = 0;
    std::size_t n_angle = 0;
    std::vector<double> power; // [range][angle]
    std::vector<double> angle_grid;

    double at(std::size_t r, std::size_t a) const { return power[r * n_angle + a]; }
};

inline constexpr std::size_t kCoarseAngleBins = 513;

namespace detail {
/// Lag sums c_l = sum_d sum_{m - m' = l} x_m conj(x_m') for one range bin.
inline std::vector<std::complex<double>> lag_correlation(const RangeDopplerSpectra& spec, std::size_t r) {
    const std::size_t nm = spec.channels();
    std::vector<std::complex<double>> lags(nm);
    for (std::size_t d = 0; d < spec.doppler_bins(); ++d)
        for (std::size_t l = 0; l < nm; ++l)
            for (std::size_t m = l; m < nm; ++m) lags[l] += spec.at(m, r, d) * std::conj(spec.at(m - l, r, d));
    return lags;
}

/// Delay-and-sum output power for lag sums, steering to sin(theta) = s.
inline double steered_power(std::span<const std::complex<double>> lags, double s) {
    double p = lags[0].real();
    for (std::size_t l = 1; l < lags.size(); ++l)
        p += 2.0 * (lags[l] * std::polar(1.0, -kPi * static_cast<double>(l) * s)).real();
    return std::max(p, 0.0);
}

/// Same for a single snapshot.
inline double snapshot_power(std::span<const std::complex<double>> x, double theta) {
    const double s = std::sin(theta);
    std::complex<double> acc{};
    for (std::size_t m = 0; m < x.size(); ++m) acc += x[m] * std::polar(1.0, -kPi * static_cast<double>(m) * s);
    return std::norm(acc);
}
} // namespace detail

/// Per range bin: Doppler-integrated delay-and-sum beamforming over `grid`.
inline RAMap range_angle_map(const RangeDopplerSpectra& spec, std::span<const double> grid) {
    if (spec.channels() < 2) throw Error(ErrorKind::Unsupported, "range-angle map needs at least 2 channels");
    if (grid.empty()) throw Error(ErrorKind::InvalidInput, "empty angle grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorKind::InvalidInput, "angle grid must be increasing");
    RAMap map;
    map.n_range = spec.range_bins();
    map.n_angle = grid.size();
    map.angle_grid.assign(grid.begin(), grid.end());
    map.power.assign(map.n_range * map.n_angle, 0.0);
    std::vector<double> sines(grid.size());
    std::transform(grid.begin(), grid.end(), sines.begin(), [](double a) { return std::sin(a); });
    for (std::size_t r = 0; r < map.n_range; ++r) {
        const auto lags = detail::lag_correlation(spec, r);
        for (std::size_t a = 0; a < map.n_angle; ++a) map.power[r * map.n_angle + a] = detail::steered_power(lags, sines[a]);
    }
    return map;
}

inline RAMap range_angle_map(const RadarCube& cube, std::span<const double> grid) {
    if (cube.channels() < 2) throw Error(ErrorKind::Unsupported, "range-angle map needs at least 2 channels");
    return range_angle_map(compute_spectra(cube), grid);
}

// --- beam pattern ---------------------------------------------------------

/// Normalized array-factor power of an n-element lambda/2 ULA steered to `steer`.
inline double array_factor(std::size_t n, double steer, double theta) {
    const double psi = kPi * (std::sin(theta) - std::sin(steer));
    const double half = psi / 2.0;
    const double den = static_cast<double>(n) * std::sin(half);
    if (std::abs(den) < 1e-15) return 1.0;
    const double v = std::sin(static_cast<double>(n) * half) / den;
    return v * v;
}

/// -3 dB main-lobe width found by bisection on each side of the steering angle.
inline double half_power_beamwidth(std::size_t n, double steer = 0.0) {
    if (n == 0) throw Error(ErrorKind::InvalidInput, "array needs at least one element");
    if (n == 1) return kPi;
    auto edge = [&](double dir) {
        // The first null sits at sin(theta) = sin(steer) +/- 2/n.
        const double s_null = std::clamp(std::sin(steer) + dir * 2.0 / static_cast<double>(n), -1.0, 1.0);
        double inside = steer, outside = std::asin(s_null);
        if (array_factor(n, steer, outside) > 0.5) return outside; // lobe reaches endfire
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (inside + outside);
            (array_factor(n, steer, mid) > 0.5 ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
    };
    return edge(+1.0) - edge(-1.0);
}

struct BeamPattern {
    std::vector<double> angles;
    std::vector<double> gains; // linear power, peak normalized to 1
    double hpbw = 0.0;         // rad
};

inline BeamPattern beam_pattern(std::size_t n_channels, double steer, std::span<const double> grid) {
    BeamPattern bp;
    bp.angles.assign(grid.begin(), grid.end());
    bp.gains.reserve(grid.size());
    for (double a : grid) bp.gains.push_back(array_factor(n_channels, steer, a));
    bp.hpbw = half_power_beamwidth(n_channels, steer);
    return bp;
}

// --- SNR bookkeeping --------------------------------------------------------

/// median(Gamma(n, 1)) / n: the median-to-mean ratio of an n-channel
/// non-coherent sum of exponential noise cells.
inline double gamma_median_ratio(std::size_t n) {
    auto cdf = [n](double x) {
        double term = 1.0, sum = 1.0;
        for (std::size_t k = 1; k < n; ++k) {
            term *= x / static_cast<double>(k);
            sum += term;
        }
        return 1.0 - std::exp(-x) * sum;
    };
    double lo = 0.0, hi = static_cast<double>(n) + 10.0 * std::sqrt(static_cast<double>(n)) + 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) / static_cast<double>(n);
}

/// Converts an RD-map peak/median ratio into per-sample SNR by removing the
/// windowed FFT processing gain and the median bias of the noise floor.
inline double snr_correction(const RadarConfig& cfg) {
    const auto gr = window_gains(hann_window(cfg.n_samples));
    const auto gd = window_gains(hann_window(cfg.n_chirps));
    const double processing_gain = (gr.coherent * gr.coherent / gr.noise) * (gd.coherent * gd.coherent / gd.noise);
    return gamma_median_ratio(cfg.n_channels) / processing_gain;
}

// --- detection ------------------------------------------------------------

struct DetectionOptions {
    double threshold_db = 13.0;      // over the RD noise floor
    double leakage_margin_db = 10.0; // ghost rejection margin above the window skirt
};

namespace detail {
inline std::size_t circular_distance(std::size_t a, std::size_t b, std::size_t n) {
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, n - d);
}

inline double velocity_of_bin(const RadarConfig& cfg, double doppler_bin) {
    return (doppler_bin - static_cast<double>(zero_doppler_bin(cfg))) * doppler_bin_size(cfg);
}
} // namespace detail

inline std::size_t argmax_angle(const RAMap& ra, std::size_t range_bin) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < ra.n_angle; ++a)
        if (ra.at(range_bin, a) > ra.at(range_bin, best)) best = a;
    return best;
}

/// Threshold + 3x3 local maximum on the RD map. Candidates that sit inside a
/// stronger detection's window-leakage skirt are discarded. `ra` may be null
/// (single-channel radar); the angle is then reported as boresight.
inline std::vector<TargetDetection> detect_targets(const RDMap& rd, const RAMap* ra, const RadarConfig& cfg,
                                                   const DetectionOptions& opt = {}) {
    std::vector<TargetDetection> out;
    if (rd.power.empty() || !(rd.noise_floor > 0.0)) return out;
    if (ra && ra->n_range != rd.n_range) throw Error(ErrorKind::InvalidInput, "RD and RA maps disagree on range bins");

    const double threshold = rd.noise_floor * linear_from_db(opt.threshold_db);
    struct Candidate {
        std::size_t r, d;
        double p;
    };
    std::vector<Candidate> cands;
    const auto nr = static_cast<long>(rd.n_range), nd = static_cast<long>(rd.n_doppler);
    for (long r = 0; r < nr; ++r)
        for (long d = 0; d < nd; ++d) {
            const double p = rd.at(static_cast<std::size_t>(r), static_cast<std::size_t>(d));
            if (!(p > threshold)) continue;
            bool is_max = true;
            for (long dr = -1; dr <= 1 && is_max; ++dr)
                for (long dd = -1; dd <= 1; ++dd) {
                    if (dr == 0 && dd == 0) continue;
                    const long rr = r + dr, ddd = d + dd;
                    if (rr < 0 || rr >= nr || ddd < 0 || ddd >= nd) continue;
                    const double q = rd.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(ddd));
                    // Ties resolve toward the lower index so a plateau yields one peak.
                    if (q > p || (q == p && (dr < 0 || (dr == 0 && dd < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) cands.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(d), p});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.p > b.p; });

    const auto env_r = leakage_envelope(hann_window(rd.n_range));
    const auto env_d = leakage_envelope(hann_window(rd.n_doppler));
    const double margin = linear_from_db(opt.leakage_margin_db);
    std::vector<Candidate> kept;
    for (const auto& c : cands) {
        bool ghost = false;
        for (const auto& k : kept) {
            const auto dr = detail::circular_distance(c.r, k.r, rd.n_range);
            const auto dd = detail::circular_distance(c.d, k.d, rd.n_doppler);
            if (c.p <= k.p * env_r[dr] * env_d[dd] * margin) {
                ghost = true;
                break;
            }
        }
        if (!ghost) kept.push_back(c);
    }

    const double dr_m = range_bin_size(cfg);
    const double corr = snr_correction(cfg);
    for (const auto& k : kept) {
        TargetDetection t;
        t.peak.range = k.r;
        t.peak.doppler = k.d;
        t.range_m = static_cast<double>(k.r) * dr_m;
        t.velocity_mps = detail::velocity_of_bin(cfg, static_cast<double>(k.d));
        t.snr_linear = k.p / rd.noise_floor * corr;
        if (ra) {
            t.peak.angle = argmax_angle(*ra, k.r);
            t.angle_rad = ra->angle_grid[t.peak.angle];
        }
        out.push_back(t);
    }
    return out;
}

inline std::vector<TargetDetection> detect_targets(const RDMap& rd, const RAMap& ra, const RadarConfig& cfg,
                                                   const DetectionOptions& opt = {}) {
    return detect_targets(rd, &ra, cfg, opt);
}

// --- DoA --------------------------------------------------------------------

struct DoaOptions {
    double fine_step_rad = rad_from_deg(0.1);
    double fine_half_span_rad = rad_from_deg(2.0);
    double min_peak_to_median_db = 3.0;
    std::size_t coarse_bins = kCoarseAngleBins;
};

inline std::vector<std::complex<double>> snapshot(const RangeDopplerSpectra& spec, const PeakBin& bins) {
    std::vector<std::complex<double>> x(spec.channels());
    for (std::size_t m = 0; m < x.size(); ++m) x[m] = spec.at(m, bins.range, bins.doppler);
    return x;
}

/// Coarse delay-and-sum scan of the detection cell's snapshot, then a fine
/// scan on an absolute 0.1 deg lattice around the coarse peak.
inline double beamform_doa(const RangeDopplerSpectra& spec, const PeakBin& bins, const DoaOptions& opt = {}) {
    if (spec.channels() < 2) throw Error(ErrorKind::Unsupported, "direction finding needs at least 2 channels");
    if (bins.range >= spec.range_bins() || bins.doppler >= spec.doppler_bins())
        throw Error(ErrorKind::InvalidInput, "detection bins outside the spectra");
    const auto x = snapshot(spec, bins);
    const auto grid = angle_grid(opt.coarse_bins);
    std::vector<double> coarse(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) coarse[i] = detail::snapshot_power(x, grid[i]);
    const auto best = static_cast<std::size_t>(std::max_element(coarse.begin(), coarse.end()) - coarse.begin());
    const double med = median_of(coarse);
    if (!(coarse[best] > 0.0) || coarse[best] < med * linear_from_db(opt.min_peak_to_median_db))
        throw Error(ErrorKind::AmbiguousDoa, "no dominant angular peak");

    const double step = opt.fine_step_rad;
    const double lo = std::max(grid[best] - opt.fine_half_span_rad, -kPi / 2);
    const double hi = std::min(grid[best] + opt.fine_half_span_rad, kPi / 2);
    const long k_lo = static_cast<long>(std::ceil(lo / step - 1e-9));
    const long k_hi = static_cast<long>(std::floor(hi / step + 1e-9));
    double best_theta = grid[best], best_p = -1.0;
    for (long k = k_lo; k <= k_hi; ++k) {
        const double theta = static_cast<double>(k) * step;
        const double p = detail::snapshot_power(x, theta);
        if (p > best_p) {
            best_p = p;
            best_theta = theta;
        }
    }
    return best_theta;
}

inline double beamform_doa(const RadarCube& cube, const PeakBin& bins, const DoaOptions& opt = {}) {
    return beamform_doa(compute_spectra(cube), bins, opt);
}

// --- peak refinement ----------------------------------------------------------

namespace detail {
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}
} // namespace detail

struct RefinedPeak {
    double range_bin = 0.0;   // fractional
    double doppler_bin = 0.0; // fractional, shifted index (zero velocity at n_chirps/2)
    double power = 0.0;       // channel-summed windowed DTFT power at the refined location
};

/// Maximizes the windowed 2D DTFT power around an RD cell, removing the
/// scalloping loss of off-bin tones.
inline RefinedPeak refine_peak(const RadarCube& cube, const PeakBin& bins) {
    const auto& cfg = cube.config();
    const std::size_t nm = cfg.n_channels, nn = cfg.n_chirps, nk = cfg.n_samples;
    const auto wr = hann_window(nk);
    const auto wd = hann_window(nn);
    const double zero = static_cast<double>(zero_doppler_bin(cfg));

    std::vector<std::complex<double>> ranged(nm * nn); // range DTFT per (channel, chirp)
    std::vector<std::complex<double>> phasor(std::max(nk, nn));
    auto range_dtft = [&](double fr) {
        for (std::size_t k = 0; k < nk; ++k)
            phasor[k] = wr[k] * std::polar(1.0, -2.0 * kPi * fr * static_cast<double>(k) / static_cast<double>(nk));
        for (std::size_t m = 0; m < nm; ++m)
            for (std::size_t n = 0; n < nn; ++n) {
                std::complex<double> acc{};
                for (std::size_t k = 0; k < nk; ++k) acc += cube.at(m, n, k) * phasor[k];
                ranged[m * nn + n] = acc;
            }
    };
    auto doppler_power = [&](double fd_shifted) {
        const double fd = fd_shifted - zero;
        double p = 0.0;
        for (std::size_t m = 0; m < nm; ++m) {
            std::complex<double> acc{};
            for (std::size_t n = 0; n < nn; ++n)
                acc += ranged[m * nn + n] * wd[n] *
                       std::polar(1.0, -2.0 * kPi * fd * static_cast<double>(n) / static_cast<double>(nn));
            p += std::norm(acc);
        }
        return p;
    };

    RefinedPeak out{static_cast<double>(bins.range), static_cast<double>(bins.doppler), 0.0};
    constexpr double kHalfWindow = 0.6, kTol = 1e-4;
    for (int pass = 0; pass < 2; ++pass) {
        out.range_bin = detail::golden_max(
            [&](double fr) {
                range_dtft(fr);
                return doppler_power(out.doppler_bin);
            },
            static_cast<double>(bins.range) - kHalfWindow, static_cast<double>(bins.range) + kHalfWindow, kTol);
        range_dtft(out.range_bin);
        out.doppler_bin = detail::golden_max(doppler_power, static_cast<double>(bins.doppler) - kHalfWindow,
                                             static_cast<double>(bins.doppler) + kHalfWindow, kTol);
    }
    out.power = doppler_power(out.doppler_bin);
    return out;
}

// --- pipeline -----------------------------------------------------------------

struct PipelineOptions {
    DetectionOptions detection;
    DoaOptions doa;
    bool refine = true;
};

struct PipelineResult {
    RDMap rd;
    std::optional<RAMap> ra;
    std::vector<TargetDetection> detections; // descending SNR
};

/// RD/RA maps, detection, then per-detection range/Doppler/SNR refinement
/// and fine-grid DoA.
inline PipelineResult run_pipeline(const RadarCube& cube, const PipelineOptions& opt = {}) {
    const auto& cfg = cube.config();
    PipelineResult res;
    const auto spec = compute_spectra(cube);
    res.rd = range_doppler_map(spec);
    if (cfg.n_channels >= 2) {
        const auto grid = angle_grid(opt.doa.coarse_bins);
        res.ra = range_angle_map(spec, grid);
    }
    res.detections = detect_targets(res.rd, res.ra ? &*res.ra : nullptr, cfg, opt.detection);
    if (!opt.refine) return res;

    const double corr = snr_correction(cfg);
    const double dr_m = range_bin_size(cfg);
    for (auto& t : res.detections) {
        const auto peak = refine_peak(cube, t.peak);
        t.range_m = std::max(0.0, peak.range_bin * dr_m);
        t.velocity_mps = detail::velocity_of_bin(cfg, peak.doppler_bin);
        t.snr_linear = peak.power / res.rd.noise_floor * corr;
        if (cfg.n_channels >= 2) {
            try {
                t.angle_rad = beamform_doa(spec, t.peak, opt.doa);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::AmbiguousDoa) throw;
                // keep the coarse RA estimate
            }
        }
    }
    std::stable_sort(res.detections.begin(), res.detections.end(),
                     [](const TargetDetection& a, const TargetDetection& b) { return a.snr_linear > b.snr_linear; });
    return res;
}

inline std::vector<TargetDetection> locate_targets(const RadarCube& cube, const PipelineOptions& opt = {}) {
    return run_pipeline(cube, opt).detections;
}

} // namespace radmat
