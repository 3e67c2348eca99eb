#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "common.hpp"
#include "fsio.hpp"
#include "reconstruct.hpp"
#include "stft.hpp"

namespace phaseloom {

namespace detail {

inline void put_u32(std::string& b, std::uint32_t v) {
    char c[4];
    std::memcpy(c, &v, 4);
    b.append(c, 4);
}

inline void put_u64(std::string& b, std::uint64_t v) {
    char c[8];
    std::memcpy(c, &v, 8);
    b.append(c, 8);
}

inline std::uint32_t take_u32(const std::string& b, std::size_t& off) {
    if (off + 4 > b.size()) throw std::runtime_error("binary file truncated");
    std::uint32_t v;
    std::memcpy(&v, b.data() + off, 4);
    off += 4;
    return v;
}

inline std::uint64_t take_u64(const std::string& b, std::size_t& off) {
    if (off + 8 > b.size()) throw std::runtime_error("binary file truncated");
    std::uint64_t v;
    std::memcpy(&v, b.data() + off, 8);
    off += 8;
    return v;
}

} // namespace detail

/// Complex spectrogram container (.spec). Layout: the magic "PLSPEC1\n",
/// u32 win/hop/fft/window-kind/sample-rate, u64 signal-length/bins/frames,
/// then float64 re,im pairs frame by frame (bin index fastest). All fields
/// little-endian.
inline void write_spec(const std::string& path, const Spectrogram& X, int rate) {
    std::string b;
    b.reserve(64 + X.n_bins() * X.frames() * 16);
    b += "PLSPEC1\n";
    detail::put_u32(b, std::uint32_t(X.config().win));
    detail::put_u32(b, std::uint32_t(X.config().hop));
    detail::put_u32(b, std::uint32_t(X.config().fft));
    detail::put_u32(b, X.config().window == WindowKind::Hann ? 0u : 1u);
    detail::put_u32(b, std::uint32_t(rate));
    detail::put_u64(b, X.signal_len());
    detail::put_u64(b, X.n_bins());
    detail::put_u64(b, X.frames());
    for (std::size_t t = 0; t < X.frames(); ++t)
        for (std::size_t k = 0; k < X.n_bins(); ++k) {
            const std::complex<double> v = X(k, t);
            char c[16];
            const double re = v.real(), im = v.imag();
            std::memcpy(c, &re, 8);
            std::memcpy(c + 8, &im, 8);
            b.append(c, 16);
        }
    write_file_atomic(path, b);
}

inline std::pair<Spectrogram, int> read_spec(const std::string& path) {
    const std::string b = read_file(path);
    if (b.size() < 8 || b.compare(0, 8, "PLSPEC1\n") != 0)
        throw std::runtime_error("not a spectrogram file: " + path);
    std::size_t off = 8;
    StftConfig cfg;
    cfg.win = int(detail::take_u32(b, off));
    cfg.hop = int(detail::take_u32(b, off));
    cfg.fft = int(detail::take_u32(b, off));
    cfg.window = detail::take_u32(b, off) == 0 ? WindowKind::Hann : WindowKind::Rectangular;
    const int rate = int(detail::take_u32(b, off));
    const std::uint64_t signal_len = detail::take_u64(b, off);
    const std::uint64_t bins = detail::take_u64(b, off);
    const std::uint64_t frames = detail::take_u64(b, off);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("corrupt spectrogram header in " + path + ": " + e.what());
    }
    if (bins != std::uint64_t(cfg.n_bins()) || rate <= 0 || signal_len == 0 || frames == 0)
        throw std::runtime_error("corrupt spectrogram header in " + path);
    if (b.size() - off < bins * frames * 16)
        throw std::runtime_error("binary file truncated: " + path);
    Spectrogram X(cfg, std::size_t(signal_len), std::size_t(frames));
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t k = 0; k < bins; ++k) {
            double re, im;
            std::memcpy(&re, b.data() + off, 8);
            std::memcpy(&im, b.data() + off + 8, 8);
            off += 16;
            X(k, t) = {re, im};
        }
    return {std::move(X), rate};
}

/// Phase matrix container (.phase). Layout: the magic "PLPHAS1\n",
/// u64 bins/frames, then float64 phases frame by frame (bin index fastest);
/// NaN marks an unknown phase.
inline void write_phase(const std::string& path, const PhaseMatrix& pm) {
    std::string b;
    b.reserve(32 + pm.values.rows() * pm.values.cols() * 8);
    b += "PLPHAS1\n";
    detail::put_u64(b, pm.values.rows());
    detail::put_u64(b, pm.values.cols());
    for (std::size_t t = 0; t < pm.values.cols(); ++t)
        for (std::size_t k = 0; k < pm.values.rows(); ++k) {
            const double v = pm.known(k, t) ? pm.values(k, t)
                                            : std::numeric_limits<double>::quiet_NaN();
            char c[8];
            std::memcpy(c, &v, 8);
            b.append(c, 8);
        }
    write_file_atomic(path, b);
}

inline PhaseMatrix read_phase(const std::string& path) {
    const std::string b = read_file(path);
    if (b.size() < 8 || b.compare(0, 8, "PLPHAS1\n") != 0)
        throw std::runtime_error("not a phase file: " + path);
    std::size_t off = 8;
    const std::uint64_t bins = detail::take_u64(b, off);
    const std::uint64_t frames = detail::take_u64(b, off);
    if (bins == 0 || frames == 0 || b.size() - off < bins * frames * 8)
        throw std::runtime_error("binary file truncated: " + path);
    PhaseMatrix pm{std::size_t(bins), std::size_t(frames)};
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t k = 0; k < bins; ++k) {
            double v;
            std::memcpy(&v, b.data() + off, 8);
            off += 8;
            if (std::isnan(v)) {
                pm.known(k, t) = 0;
            } else {
                pm.values(k, t) = v;
                pm.known(k, t) = 1;
            }
        }
    return pm;
}

} // namespace phaseloom
