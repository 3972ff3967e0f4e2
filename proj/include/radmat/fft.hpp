#pragma once

// Thin RAII layer over FFTW plus the window helpers used by the pipeline.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "radmat/core.hpp"

namespace radmat {

namespace detail {
// FFTW's planner is not re-entrant; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

/// In-place forward complex FFT of a fixed length. Owns its buffer.
class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n) {
        if (n == 0) throw Error(ErrorKind::InvalidInput, "FFT length must be positive");
        buf_ = fftw_alloc_complex(n);
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~FftPlan() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    std::size_t size() const { return n_; }

    std::span<std::complex<double>> buffer() {
        return {reinterpret_cast<std::complex<double>*>(buf_), n_};
    }

    void execute() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

/// Periodic (DFT-even) Hann window: zero leakage at integer bin offsets >= 2.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

/// Coherent gain sum(w) and noise gain sum(w^2).
struct WindowGains {
    double coherent = 0.0;
    double noise = 0.0;
};

inline WindowGains window_gains(std::span<const double> w) {
    WindowGains g;
    for (double v : w) {
        g.coherent += v;
        g.noise += v * v;
    }
    return g;
}

/// |W(f)|^2 / |W(0)|^2 for the window's DTFT at `bins` (fractional) offset.
inline double window_response(std::span<const double> w, double bins) {
    const double n = static_cast<double>(w.size());
    std::complex<double> acc{};
    double dc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i] * std::polar(1.0, -2.0 * kPi * bins * static_cast<double>(i) / n);
        dc += w[i];
    }
    return std::norm(acc) / (dc * dc);
}

/// Leakage envelope: for each integer bin distance d from a peak cell, the
/// largest relative power a single tone can put there, given that the peak
/// cell is the tone's nearest bin (tone offset <= 0.5 bin).
inline std::vector<double> leakage_envelope(std::span<const double> w) {
    const std::size_t n = w.size();
    const std::size_t half = n / 2 + 1;
    constexpr int kSub = 8;
    // Dense DTFT samples from 0 to n/2 + 1 bins.
    std::vector<double> dense(half * kSub + 1);
    for (std::size_t i = 0; i < dense.size(); ++i) dense[i] = window_response(w, static_cast<double>(i) / kSub);
    // Suffix maximum so env(f) = max over |f'| >= f.
    for (std::size_t i = dense.size() - 1; i-- > 0;) dense[i] = std::max(dense[i], dense[i + 1]);
    std::vector<double> env(half);
    for (std::size_t d = 0; d < half; ++d) {
        if (d <= 1) {
            env[d] = 1.0;
            continue;
        }
        const std::size_t idx = (d * 2 - 1) * kSub / 2; // distance d - 0.5
        env[d] = dense[std::min(idx, dense.size() - 1)];
    }
    return env;
}

} // namespace radmat
