#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "common.hpp"
#include "reconstruct.hpp"
#include "stft.hpp"
#include "synth.hpp"

namespace phaseloom {

/// Where clicks were injected and which analysis frames they touch.
struct ClickReport {
    int click_len = 10;
    double amp_scale = 10.0;
    std::vector<std::size_t> positions;
    std::vector<int> corrupted_frames;
};

/// Frames whose analysis window overlaps signal samples [pos, pos + span).
inline std::vector<int> frames_touching(std::size_t pos, std::size_t span, std::size_t signal_len,
                                        const StftConfig& cfg) {
    cfg.validate();
    const std::size_t T = cfg.frame_count(signal_len);
    const long lead = cfg.lead_pad();
    const long lo = long(pos) + lead;
    const long hi = long(pos + span) + lead;
    std::vector<int> out;
    for (long t = 0; std::size_t(t) < T; ++t) {
        const long start = t * long(cfg.hop);
        if (start < hi && start + cfg.win > lo) out.push_back(int(t));
    }
    return out;
}

/// Add differentiated-Hann clicks to a copy of the signal. Click peaks are
/// scaled to amp_scale times the signal RMS; positions are seeded, at least
/// win samples apart, and keep a window's margin from the signal edges.
inline std::pair<Signal, ClickReport> corrupt_with_clicks(const Signal& x, int n_clicks,
                                                          int click_len, double amp_scale,
                                                          std::uint64_t seed,
                                                          const StftConfig& cfg) {
    cfg.validate();
    if (n_clicks < 0) throw std::invalid_argument("corrupt_with_clicks: click count must be non-negative");
    if (click_len < 3) throw std::invalid_argument("corrupt_with_clicks: click length too short");
    if (!(amp_scale > 0.0)) throw std::invalid_argument("corrupt_with_clicks: amplitude must be positive");
    if (n_clicks == 0) return {x, ClickReport{click_len, amp_scale, {}, {}}};
    const std::size_t len = x.samples.size();
    const std::size_t margin = std::size_t(cfg.win);
    if (len < 2 * margin + std::size_t(click_len) + std::size_t(n_clicks - 1) * std::size_t(cfg.win) * 2)
        throw std::invalid_argument("corrupt_with_clicks: signal too short for requested clicks");

    double rms = 0.0;
    for (double v : x.samples) rms += v * v;
    rms = std::sqrt(rms / double(len));
    if (rms == 0.0) throw std::invalid_argument("corrupt_with_clicks: signal is silent");

    const std::vector<double> proto = gen_click(click_len);
    double proto_max = 0.0;
    for (double v : proto) proto_max = std::max(proto_max, std::abs(v));
    const double scale = amp_scale * rms / proto_max;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(margin, len - margin - std::size_t(click_len));
    std::vector<std::size_t> positions;
    int guard = 0;
    while (positions.size() < std::size_t(n_clicks)) {
        if (++guard > 100000)
            throw std::invalid_argument("corrupt_with_clicks: cannot place clicks this far apart");
        const std::size_t p = pick(rng);
        bool ok = true;
        for (std::size_t q : positions)
            if ((p > q ? p - q : q - p) < std::size_t(cfg.win)) {
                ok = false;
                break;
            }
        if (ok) positions.push_back(p);
    }
    std::sort(positions.begin(), positions.end());

    Signal y = x;
    ClickReport report{click_len, amp_scale, positions, {}};
    for (std::size_t p : positions) {
        for (int i = 0; i < click_len; ++i) y.samples[p + std::size_t(i)] += scale * proto[std::size_t(i)];
        for (int t : frames_touching(p, std::size_t(click_len), len, cfg))
            report.corrupted_frames.push_back(t);
    }
    std::sort(report.corrupted_frames.begin(), report.corrupted_frames.end());
    report.corrupted_frames.erase(
        std::unique(report.corrupted_frames.begin(), report.corrupted_frames.end()),
        report.corrupted_frames.end());
    return {std::move(y), std::move(report)};
}

/// Replace the phases of a seeded random subset of bins (exactly
/// round(fraction * bins) of them) with uniform phases, preserving
/// magnitudes. Returns the corrupted spectrogram and the mask of corrupted
/// bins.
inline std::pair<Spectrogram, Mat<std::uint8_t>> corrupt_phases(const Spectrogram& X,
                                                                double fraction,
                                                                std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("corrupt_phases: fraction must be in [0, 1]");
    const std::size_t K = X.n_bins();
    const std::size_t T = X.frames();
    const std::size_t total = K * T;
    if (total == 0) throw std::invalid_argument("corrupt_phases: empty spectrogram");
    const std::size_t count = std::size_t(std::llround(fraction * double(total)));

    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());

    Spectrogram Y = X;
    Mat<std::uint8_t> mask(K, T, 0);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    for (std::size_t i : idx) {
        const std::size_t t = i / K;
        const std::size_t k = i % K;
        Y(k, t) = std::polar(std::abs(X(k, t)), uni(rng));
        mask(k, t) = 1;
    }
    return {std::move(Y), std::move(mask)};
}

/// Fill the magnitudes of corrupted frames by per-channel log-linear
/// interpolation between the nearest clean frames (values are floored at
/// -120 dB before taking logs). Runs touching an edge copy the nearest clean
/// frame. Clean frames pass through bit-identical.
inline Mat<double> interpolate_magnitude(const Mat<double>& mag,
                                         const std::vector<int>& corrupted_frames) {
    const std::size_t K = mag.rows();
    const std::size_t T = mag.cols();
    if (T == 0) throw std::invalid_argument("interpolate_magnitude: empty spectrogram");
    std::vector<char> bad(T, 0);
    for (int t : corrupted_frames) {
        if (t < 0 || std::size_t(t) >= T)
            throw std::invalid_argument("interpolate_magnitude: frame index out of range");
        bad[std::size_t(t)] = 1;
    }
    if (std::all_of(bad.begin(), bad.end(), [](char b) { return b != 0; }))
        throw std::invalid_argument("interpolate_magnitude: no clean frames to interpolate from");

    const double floor_amp = 1e-6; // -120 dB
    const auto log_floored = [&](double v) { return std::log(std::max(v, floor_amp)); };

    Mat<double> out = mag;
    for (std::size_t t = 0; t < T;) {
        if (!bad[t]) {
            ++t;
            continue;
        }
        std::size_t e = t;
        while (e + 1 < T && bad[e + 1]) ++e;
        const bool has_left = t > 0;
        const bool has_right = e + 1 < T;
        for (std::size_t u = t; u <= e; ++u) {
            for (std::size_t k = 0; k < K; ++k) {
                double v;
                if (has_left && has_right) {
                    const double la = log_floored(mag(k, t - 1));
                    const double lb = log_floored(mag(k, e + 1));
                    const double w = double(u - t + 1) / double(e - t + 2);
                    v = std::exp(la + (lb - la) * w);
                } else if (has_left) {
                    v = std::max(mag(k, t - 1), floor_amp);
                } else {
                    v = std::max(mag(k, e + 1), floor_amp);
                }
                out(k, u) = v;
            }
        }
        t = e + 1;
    }
    return out;
}

/// How restore() rebuilds the phases of corrupted frames.
enum class RestoreMethod { PhaseUnwrap, GriffinLim };

struct RestoreOptions {
    RestoreMethod method = RestoreMethod::PhaseUnwrap;
    OnsetPhaseMethod onset_phase = OnsetPhaseMethod::QI;
    int gl_iters = 200;
    std::uint64_t seed = 1;
    double sensitivity = 1.5;
};

/// Repair a click-corrupted signal. The corrupted frames' magnitudes are
/// re-interpolated from clean neighbours and their phases rebuilt (clean
/// frames' phases are known anchors); the resynthesised content replaces the
/// corrupted-frame support in the signal with a hop-length crossfade at the
/// support edges. Samples outside the support pass through untouched.
inline Signal restore(const Signal& corrupted, const ClickReport& report, const StftConfig& cfg,
                      const RestoreOptions& opt = {}) {
    cfg.validate();
    if (corrupted.samples.empty()) throw std::invalid_argument("restore: empty signal");
    const Spectrogram X = stft(corrupted.samples, cfg);
    const std::size_t K = X.n_bins();
    const std::size_t T = X.frames();
    for (int t : report.corrupted_frames)
        if (t < 0 || std::size_t(t) >= T)
            throw std::invalid_argument("restore: corrupted frame out of range");

    const Mat<double> mag = interpolate_magnitude(X.magnitude(), report.corrupted_frames);

    PhaseMatrix known(K, T);
    known.values = X.phase();
    std::fill(known.known.data().begin(), known.known.data().end(), std::uint8_t(1));
    for (int t : report.corrupted_frames)
        for (std::size_t k = 0; k < K; ++k) known.known(k, std::size_t(t)) = 0;

    std::vector<double> y;
    if (opt.method == RestoreMethod::PhaseUnwrap) {
        const OnsetSet onsets = detect_onsets(mag, cfg, opt.sensitivity);
        const PhaseMatrix ph =
            reconstruct_phases(mag, &known, onsets, cfg, opt.onset_phase, opt.seed);
        y = istft(compose_spectrogram(mag, ph.values, cfg, corrupted.samples.size()));
    } else {
        GriffinLimResult gl =
            griffin_lim(mag, corrupted.samples.size(), &known, opt.gl_iters, opt.seed, cfg);
        y = istft(gl.spec);
    }

    // Support of the corrupted frames in signal coordinates, merged.
    const long lead = cfg.lead_pad();
    const long len = long(corrupted.samples.size());
    std::vector<std::pair<long, long>> spans;
    for (int t : report.corrupted_frames) {
        long lo = long(t) * cfg.hop - lead;
        long hi = lo + cfg.win;
        lo = std::max(0L, lo);
        hi = std::min(len, hi);
        if (lo >= hi) continue;
        if (!spans.empty() && lo <= spans.back().second)
            spans.back().second = std::max(spans.back().second, hi);
        else
            spans.emplace_back(lo, hi);
    }

    Signal out = corrupted;
    const long fade = cfg.hop;
    for (const auto& [lo, hi] : spans) {
        const long span = hi - lo;
        const long ramp = std::min(fade, span / 2);
        for (long m = lo; m < hi; ++m) {
            double a = 1.0;
            if (m - lo < ramp) a = double(m - lo + 1) / double(ramp + 1);
            if (hi - 1 - m < ramp) a = std::min(a, double(hi - m) / double(ramp + 1));
            out.samples[std::size_t(m)] =
                (1.0 - a) * corrupted.samples[std::size_t(m)] + a * y[std::size_t(m)];
        }
    }
    return out;
}

} // namespace phaseloom
