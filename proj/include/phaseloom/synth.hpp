#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "common.hpp"

namespace phaseloom {

/// One stationary sinusoid. Frequency is normalised (cycles per sample) and
/// must lie strictly inside (0, 0.5); amplitude must be positive.
struct SinusoidComponent {
    double freq;
    double amp;
    double phase = 0.0;
};

/// One impulse: position in samples and (possibly negative) amplitude.
struct ImpulseComponent {
    std::size_t pos;
    double amp;
};

namespace detail {

inline double tone_arg(double freq, std::size_t n) { return kTwoPi * freq * double(n); }

inline void check_len_rate(std::size_t len, int rate, const char* who) {
    if (len == 0) throw std::invalid_argument(std::string(who) + ": length must be positive");
    if (rate <= 0) throw std::invalid_argument(std::string(who) + ": sample rate must be positive");
}

} // namespace detail

/// x(n) = sum_p amp_p cos(2 pi freq_p n + phase_p).
inline Signal gen_sinusoid_mixture(const std::vector<SinusoidComponent>& parts,
                                   std::size_t len, int rate = 11025) {
    detail::check_len_rate(len, rate, "gen_sinusoid_mixture");
    if (parts.empty()) throw std::invalid_argument("gen_sinusoid_mixture: no components");
    for (const auto& p : parts) {
        if (!(p.freq > 0.0 && p.freq < 0.5))
            throw std::invalid_argument("gen_sinusoid_mixture: frequency must be in (0, 0.5)");
        if (!(p.amp > 0.0))
            throw std::invalid_argument("gen_sinusoid_mixture: amplitude must be positive");
    }
    Signal s{std::vector<double>(len, 0.0), rate};
    for (const auto& p : parts)
        for (std::size_t n = 0; n < len; ++n)
            s.samples[n] += p.amp * std::cos(detail::tone_arg(p.freq, n) + p.phase);
    return s;
}

/// Sinusoid with sinusoidal frequency modulation around carrier fc:
/// instantaneous frequency fc + depth cos(2 pi fm n), realised by its
/// closed-form phase integral
///   x(n) = amp cos(2 pi fc n + (depth / fm) sin(2 pi fm n) + phase0).
/// With depth 0 this reduces, sample for sample, to the stationary sinusoid.
inline Signal gen_vibrato(double fc, double depth, double fm, double amp,
                          double phase0, std::size_t len, int rate = 11025) {
    detail::check_len_rate(len, rate, "gen_vibrato");
    if (!(depth >= 0.0)) throw std::invalid_argument("gen_vibrato: depth must be non-negative");
    if (!(fc - depth > 0.0 && fc + depth < 0.5))
        throw std::invalid_argument("gen_vibrato: instantaneous frequency must stay in (0, 0.5)");
    if (!(fm > 0.0 && fm < 0.5)) throw std::invalid_argument("gen_vibrato: fm must be in (0, 0.5)");
    if (!(amp > 0.0)) throw std::invalid_argument("gen_vibrato: amplitude must be positive");
    Signal s{std::vector<double>(len, 0.0), rate};
    const double m = depth / fm;
    for (std::size_t n = 0; n < len; ++n)
        s.samples[n] =
            amp * std::cos(detail::tone_arg(fc, n) + m * std::sin(detail::tone_arg(fm, n)) + phase0);
    return s;
}

/// Zero signal with the given impulses added; positions must be distinct and
/// inside the signal.
inline Signal gen_impulse_mixture(const std::vector<ImpulseComponent>& impulses,
                                  std::size_t len, int rate = 11025) {
    detail::check_len_rate(len, rate, "gen_impulse_mixture");
    Signal s{std::vector<double>(len, 0.0), rate};
    for (const auto& im : impulses) {
        if (im.pos >= len) throw std::invalid_argument("gen_impulse_mixture: position out of range");
        if (s.samples[im.pos] != 0.0)
            throw std::invalid_argument("gen_impulse_mixture: positions must be distinct");
        s.samples[im.pos] = im.amp;
    }
    return s;
}

/// Harmonic tone with exponentially decaying envelope:
///   x(n) = sum_{h=1..n_partials} (1/h) e^{-decay n} cos(2 pi h f0 n + phi_h),
/// with phases drawn uniformly from (-pi, pi) by a seeded generator.
/// The highest partial must stay below Nyquist.
inline Signal gen_damped_tone(double f0, int n_partials, double decay, std::size_t len,
                              int rate = 11025, std::uint64_t seed = 1) {
    detail::check_len_rate(len, rate, "gen_damped_tone");
    if (n_partials < 1) throw std::invalid_argument("gen_damped_tone: need at least one partial");
    if (!(f0 > 0.0) || !(f0 * n_partials < 0.5))
        throw std::invalid_argument("gen_damped_tone: partials must lie in (0, 0.5)");
    if (!(decay >= 0.0)) throw std::invalid_argument("gen_damped_tone: decay must be non-negative");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    std::vector<double> env(len);
    for (std::size_t n = 0; n < len; ++n) env[n] = std::exp(-decay * double(n));

    Signal s{std::vector<double>(len, 0.0), rate};
    for (int h = 1; h <= n_partials; ++h) {
        const double ph = uni(rng);
        const double a = 1.0 / double(h);
        for (std::size_t n = 0; n < len; ++n)
            s.samples[n] += a * env[n] * std::cos(detail::tone_arg(f0 * h, n) + ph);
    }
    return s;
}

/// Click prototype: the first difference of a symmetric Hann bump, preceded
/// by a zero so the click has the requested length. Its samples sum to zero,
/// so a click adds no DC.
inline std::vector<double> gen_click(int len = 10) {
    if (len < 3) throw std::invalid_argument("gen_click: length must be at least 3");
    std::vector<double> h(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
        h[std::size_t(i)] = 0.5 * (1.0 - std::cos(kTwoPi * i / (len - 1)));
    std::vector<double> c(std::size_t(len), 0.0);
    for (int i = 1; i < len; ++i) c[std::size_t(i)] = h[std::size_t(i)] - h[std::size_t(i - 1)];
    return c;
}

} // namespace phaseloom
