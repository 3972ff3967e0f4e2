#pragma once

// Capture files (RMC1) and raw matrix export.
//
// Capture layout, all little-endian:
//   "RMC1" u32 version
//   f64 f0 slope bandwidth fs chirp_interval pt_gt_gr tn noise_bandwidth
//   u32 n_channels n_chirps n_samples
//   f32 (re, im) pairs in [channel][chirp][sample] order

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "radmat/binio.hpp"
#include "radmat/core.hpp"

namespace radmat {

inline constexpr std::string_view kCaptureMagic = "RMC1";
inline constexpr std::uint32_t kCaptureVersion = 1;
inline constexpr std::size_t kCaptureHeaderBytes = 4 + 4 + 8 * 8 + 3 * 4;

inline std::size_t capture_payload_bytes(const RadarConfig& cfg) {
    return 2 * 4 * cfg.n_channels * cfg.n_chirps * cfg.n_samples;
}

/// Rounds every sample to float32 precision, which is what the file stores.
inline RadarCube quantize(const RadarCube& cube) {
    std::vector<Sample> data;
    data.reserve(cube.data().size());
    for (const auto& v : cube.data()) {
        const float re = static_cast<float>(v.real());
        const float im = static_cast<float>(v.imag());
        data.emplace_back(re, im);
    }
    return RadarCube(cube.config(), std::move(data));
}

inline void write_capture(std::ostream& out, const RadarCube& cube) {
    const auto& c = cube.config();
    constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
    if (c.n_channels > u32max || c.n_chirps > u32max || c.n_samples > u32max)
        throw Error(ErrorKind::InvalidInput, "cube dimensions exceed the capture format");
    out.write(kCaptureMagic.data(), 4);
    binio::write_le<std::uint32_t>(out, kCaptureVersion);
    for (double v : {c.f0, c.slope, c.bandwidth, c.fs, c.chirp_interval, c.pt_gt_gr, c.tn, c.noise_bandwidth})
        binio::write_le<double>(out, v);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.n_channels));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.n_chirps));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.n_samples));
    for (const auto& v : cube.data()) {
        const float re = static_cast<float>(v.real());
        const float im = static_cast<float>(v.imag());
        if (!std::isfinite(re) || !std::isfinite(im))
            throw Error(ErrorKind::InvalidInput, "sample overflows float32");
        binio::write_le<float>(out, re);
        binio::write_le<float>(out, im);
    }
    if (!out) throw Error(ErrorKind::Io, "capture write failed");
}

inline RadarCube read_capture(std::istream& in) {
    binio::expect_magic(in, kCaptureMagic);
    const auto version = binio::read_le<std::uint32_t>(in);
    if (version != kCaptureVersion)
        throw Error(ErrorKind::Format, "unsupported capture version " + std::to_string(version));
    RadarConfig c;
    for (double* p : {&c.f0, &c.slope, &c.bandwidth, &c.fs, &c.chirp_interval, &c.pt_gt_gr, &c.tn, &c.noise_bandwidth})
        *p = binio::read_le<double>(in);
    c.n_channels = binio::read_le<std::uint32_t>(in);
    c.n_chirps = binio::read_le<std::uint32_t>(in);
    c.n_samples = binio::read_le<std::uint32_t>(in);
    c.validate();

    const std::size_t n = c.n_channels * c.n_chirps * c.n_samples;
    std::vector<char> raw(capture_payload_bytes(c));
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
        throw Error(ErrorKind::Format, "capture payload shorter than header dims");
    if (in.peek() != std::char_traits<char>::eof())
        throw Error(ErrorKind::Format, "capture payload longer than header dims");

    std::istringstream payload(std::string(raw.data(), raw.size()));
    std::vector<Sample> data(n);
    for (auto& v : data) {
        const float re = binio::read_le<float>(payload);
        const float im = binio::read_le<float>(payload);
        v = {re, im};
    }
    return RadarCube(c, std::move(data));
}

inline void save_capture(const std::string& path, const RadarCube& cube) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    write_capture(out, cube);
}

inline RadarCube load_capture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    return read_capture(in);
}

// Matrix export: "RMM1" u32 rows u32 cols, then row-major f64.
inline constexpr std::string_view kMatrixMagic = "RMM1";

inline void save_matrix(const std::string& path, std::size_t rows, std::size_t cols, const std::vector<double>& values) {
    if (values.size() != rows * cols) throw Error(ErrorKind::InvalidInput, "matrix size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out.write(kMatrixMagic.data(), 4);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
    for (double v : values) binio::write_le<double>(out, v);
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;
};

inline Matrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    binio::expect_magic(in, kMatrixMagic);
    Matrix m;
    m.rows = binio::read_le<std::uint32_t>(in);
    m.cols = binio::read_le<std::uint32_t>(in);
    m.values.resize(m.rows * m.cols);
    for (auto& v : m.values) v = binio::read_le<double>(in);
    return m;
}

} // namespace radmat
