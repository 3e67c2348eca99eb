#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "common.hpp"
#include "stft.hpp"

namespace phaseloom {

/// Scale-invariant signal-to-distortion ratio in dB. The estimate is
/// orthogonally projected onto the reference, and the ratio of projection
/// energy to residual energy is reported:
///   s' = (<est, ref> / ||ref||^2) ref,  SDR = 10 log10(||s'||^2 / ||est - s'||^2).
/// Signals of different lengths are compared over the common prefix. The
/// result is clamped to [-300, 300]; a (near-)exact match reports 300.
inline double sdr(const std::vector<double>& reference, const std::vector<double>& estimate) {
    const std::size_t n = std::min(reference.size(), estimate.size());
    if (n == 0) throw std::invalid_argument("sdr: empty signal");
    double rr = 0.0, er = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rr += reference[i] * reference[i];
        er += estimate[i] * reference[i];
    }
    if (rr == 0.0) throw std::invalid_argument("sdr: reference is silent");
    // Residual by direct summation against the projection; the textbook
    // ee - er^2/rr form cancels catastrophically for near-exact matches.
    const double alpha = er / rr;
    double es = 0.0, res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = alpha * reference[i];
        es += s * s;
        const double d = estimate[i] - s;
        res += d * d;
    }
    if (es == 0.0) return -300.0;
    if (res == 0.0) return 300.0;
    return std::min(300.0, std::max(-300.0, 10.0 * std::log10(es / res)));
}

inline double sdr(const Signal& reference, const Signal& estimate) {
    return sdr(reference.samples, estimate.samples);
}

/// Relative spectrogram inconsistency: how far X lies from the set of
/// spectrograms of real signals,
///   ||stft(istft(X)) - X||_w / ||X||_w,
/// where the norms weight bin k by its conjugate-symmetric multiplicity
/// (1 for DC and Nyquist, 2 otherwise), i.e. they are full-spectrum
/// Frobenius norms. Zero for any spectrogram produced by stft().
inline double inconsistency(const Spectrogram& X) {
    if (X.frames() == 0 || X.signal_len() == 0)
        throw std::invalid_argument("inconsistency: empty spectrogram");
    const std::size_t K = X.n_bins();
    const Spectrogram Y = stft(istft(X), X.config());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < X.frames(); ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            const double wk = (k == 0 || k == K - 1) ? 1.0 : 2.0;
            num += wk * std::norm(Y(k, t) - X(k, t));
            den += wk * std::norm(X(k, t));
        }
    }
    if (den == 0.0) throw std::invalid_argument("inconsistency: zero spectrogram");
    return std::sqrt(num / den);
}

} // namespace phaseloom
