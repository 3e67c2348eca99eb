#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "common.hpp"
#include "stft.hpp"

namespace phaseloom {

/// Per-bin phases plus a mask of which of them are known (trusted) versus
/// reconstructed. Reconstruction never alters a known value.
struct PhaseMatrix {
    Mat<double> values;
    Mat<std::uint8_t> known;

    PhaseMatrix() = default;
    PhaseMatrix(std::size_t bins, std::size_t frames)
        : values(bins, frames, 0.0), known(bins, frames, 0) {}

    static PhaseMatrix fully_known(const Spectrogram& X) {
        PhaseMatrix pm(X.n_bins(), X.frames());
        pm.values = X.phase();
        std::fill(pm.known.data().begin(), pm.known.data().end(), std::uint8_t(1));
        return pm;
    }

    /// Mark every bin of the given frames known, with phases taken from X.
    static PhaseMatrix frames_known(const Spectrogram& X, const std::vector<int>& frames) {
        PhaseMatrix pm(X.n_bins(), X.frames());
        for (int t : frames) {
            if (t < 0 || std::size_t(t) >= X.frames())
                throw std::invalid_argument("frames_known: frame index out of range");
            for (std::size_t k = 0; k < X.n_bins(); ++k) {
                pm.values(k, std::size_t(t)) = std::arg(X(k, std::size_t(t)));
                pm.known(k, std::size_t(t)) = 1;
            }
        }
        return pm;
    }
};

/// How phases are assigned inside onset segments.
///  Imp  — least-squares impulse attack-time fit per channel
///  QI   — parabolic interpolation of the temporal magnitude profile
///  Rand — one seeded uniform phase per region per frame
///  Zero — all regions phase 0
///  Alt  — regions alternate 0, pi in channel order
enum class OnsetPhaseMethod { Imp, QI, Rand, Zero, Alt };

inline const char* to_string(OnsetPhaseMethod m) {
    switch (m) {
        case OnsetPhaseMethod::Imp: return "imp";
        case OnsetPhaseMethod::QI: return "qi";
        case OnsetPhaseMethod::Rand: return "rand";
        case OnsetPhaseMethod::Zero: return "zero";
        case OnsetPhaseMethod::Alt: return "alt";
    }
    return "?";
}

inline OnsetPhaseMethod onset_method_from_string(const std::string& s) {
    if (s == "imp") return OnsetPhaseMethod::Imp;
    if (s == "qi") return OnsetPhaseMethod::QI;
    if (s == "rand") return OnsetPhaseMethod::Rand;
    if (s == "zero") return OnsetPhaseMethod::Zero;
    if (s == "alt") return OnsetPhaseMethod::Alt;
    throw std::invalid_argument("unknown onset phase method: " + s);
}

/// Result of fitting an attack time to one channel of an onset segment.
/// n0 is in padded sample coordinates (signal sample m sits at m + lead_pad).
struct AttackEstimate {
    double n0;
    double amp;
    double residual;
    bool fallback = false;
};

/// Least-squares impulse attack fit. Over the integer grid
/// n0 in [hop*t_first - win, hop*t_last + win], fit the magnitude profile
/// m_t of `channel` by A w(n0 - hop t) and keep the n0 with the smallest
/// squared error (ties resolve to the earliest n0). Needs at least two
/// frames with non-zero magnitude.
inline AttackEstimate estimate_attack_ls(const Mat<double>& mag, int channel, int t_first,
                                         int t_last, const StftConfig& cfg) {
    cfg.validate();
    if (channel < 0 || std::size_t(channel) >= mag.rows())
        throw std::invalid_argument("estimate_attack_ls: channel out of range");
    if (t_first < 0 || t_last < t_first || std::size_t(t_last) >= mag.cols())
        throw std::invalid_argument("estimate_attack_ls: bad frame range");

    const int S = cfg.hop;
    const int N = cfg.win;
    const std::vector<double> w = make_window(cfg.window, N);

    int positive = 0;
    double mm = 0.0;
    for (int t = t_first; t <= t_last; ++t) {
        const double m = mag(std::size_t(channel), std::size_t(t));
        if (m > 0.0) ++positive;
        mm += m * m;
    }
    if (positive < 2)
        throw std::invalid_argument("estimate_attack_ls: need at least two non-silent frames");

    double best_score = -1.0;
    long best_n0 = 0;
    double best_num = 0.0, best_den = 0.0;
    for (long n0 = long(S) * t_first - N; n0 <= long(S) * t_last + N; ++n0) {
        double num = 0.0, den = 0.0;
        for (int t = t_first; t <= t_last; ++t) {
            const long off = n0 - long(S) * t;
            if (off < 0 || off >= N) continue;
            const double wn = w[std::size_t(off)];
            num += mag(std::size_t(channel), std::size_t(t)) * wn;
            den += wn * wn;
        }
        const double score = den > 0.0 ? num * num / den : 0.0;
        if (score > best_score) {
            best_score = score;
            best_n0 = n0;
            best_num = num;
            best_den = den;
        }
    }
    const double amp = best_den > 0.0 ? best_num / best_den : 0.0;
    const double residual = std::max(0.0, mm - (best_den > 0.0 ? best_num * best_num / best_den : 0.0));
    return {double(best_n0), amp, residual, false};
}

/// Attack time from parabolic interpolation of the temporal log-magnitude
/// profile of `channel`. An interior profile peak at t_p refines to
///   n0 = hop (t_p + delta_t) + win/2,
/// the win/2 term being the offset between a window's start and the centroid
/// where an impulse maximises it. A peak on the segment edge (typical for
/// sustained tones, whose profile plateaus) falls back to n0 = hop t_p with
/// the fallback flag set.
inline AttackEstimate estimate_attack_qifft(const Mat<double>& mag, int channel, int t_first,
                                            int t_last, const StftConfig& cfg) {
    cfg.validate();
    if (channel < 0 || std::size_t(channel) >= mag.rows())
        throw std::invalid_argument("estimate_attack_qifft: channel out of range");
    if (t_first < 0 || t_last < t_first || std::size_t(t_last) >= mag.cols())
        throw std::invalid_argument("estimate_attack_qifft: bad frame range");

    const std::size_t k = std::size_t(channel);
    int tp = t_first;
    double mp = mag(k, std::size_t(t_first));
    for (int t = t_first + 1; t <= t_last; ++t) {
        if (mag(k, std::size_t(t)) > mp) {
            mp = mag(k, std::size_t(t));
            tp = t;
        }
    }
    if (!(mp > 0.0))
        throw std::invalid_argument("estimate_attack_qifft: channel is silent over the segment");

    const int S = cfg.hop;
    if (tp > t_first && tp < t_last) {
        const double ml = mag(k, std::size_t(tp - 1));
        const double mr = mag(k, std::size_t(tp + 1));
        if (ml > 0.0 && mr > 0.0) {
            const double a = std::log(ml);
            const double b = std::log(mp);
            const double c = std::log(mr);
            const double curv = a - 2.0 * b + c;
            if (curv < 0.0) {
                double dt = 0.5 * (a - c) / curv;
                dt = std::min(0.5, std::max(-0.5, dt));
                const double n0 = double(S) * (double(tp) + dt) + 0.5 * double(cfg.win);
                const double amp = std::exp(b - 0.25 * (a - c) * dt);
                return {n0, amp, 0.0, false};
            }
        }
    }
    return {double(S) * tp, mp, 0.0, true};
}

/// Advance all phases of a frame from the previous frame. Each channel in a
/// peak's region advances by the peak's refined frequency,
///   phi(k, t) = wrap(phi(k, t-1) + 2 pi hop f0),
/// and channels of a peakless (null) region keep their previous phase.
inline std::vector<double> unwrap_horizontal_frame(const double* prev,
                                                   const std::vector<Peak>& peaks,
                                                   const std::vector<Region>& regions,
                                                   std::size_t n_bins, const StftConfig& cfg) {
    std::vector<double> out(n_bins);
    for (const Region& r : regions) {
        if (r.peak < 0) {
            for (int k = r.lo; k <= r.hi; ++k) out[std::size_t(k)] = prev[std::size_t(k)];
        } else {
            const double inc = kTwoPi * double(cfg.hop) * peaks[std::size_t(r.peak)].freq;
            for (int k = r.lo; k <= r.hi; ++k)
                out[std::size_t(k)] = wrap_phase(prev[std::size_t(k)] + inc);
        }
    }
    return out;
}

/// Chain phases across frequency for one onset frame t. With per-channel
/// attack times n0(k),
///   phi(0) = 0,  phi(k) = wrap(phi(k-1) - (2 pi / fft)(n0(k) - hop t)),
/// which is exact for an impulse at n0. Known bins override their chained
/// value and re-anchor the recursion for the channels above them.
inline std::vector<double> unwrap_vertical_frame(const std::vector<double>& n0, int t,
                                                 const StftConfig& cfg,
                                                 const double* known_values = nullptr,
                                                 const std::uint8_t* known_mask = nullptr) {
    const std::size_t K = n0.size();
    if (K == 0) throw std::invalid_argument("unwrap_vertical_frame: no channels");
    std::vector<double> out(K);
    out[0] = known_mask && known_mask[0] ? known_values[0] : 0.0;
    const double step = kTwoPi / double(cfg.fft);
    const double origin = double(cfg.hop) * double(t);
    for (std::size_t k = 1; k < K; ++k) {
        if (known_mask && known_mask[k]) {
            out[k] = known_values[k];
        } else {
            out[k] = wrap_phase(out[k - 1] - step * (n0[k] - origin));
        }
    }
    return out;
}

namespace detail {

inline double segment_attack_n0(OnsetPhaseMethod method, const Mat<double>& mag, int channel,
                                int a, int b, const StftConfig& cfg) {
    if (method == OnsetPhaseMethod::Imp) {
        int positive = 0;
        for (int t = a; t <= b; ++t)
            if (mag(std::size_t(channel), std::size_t(t)) > 0.0) ++positive;
        if (positive >= 2) return estimate_attack_ls(mag, channel, a, b, cfg).n0;
    }
    return estimate_attack_qifft(mag, channel, a, b, cfg).n0;
}

} // namespace detail

/// Reconstruct every unknown phase of a magnitude spectrogram.
///
/// Frames flagged in `onsets` are segmented and unwrapped vertically; for the
/// model-based methods (Imp, QI) each segment first gets per-channel attack
/// estimates for every channel within 50 dB of the segment peak, and the
/// remaining channels inherit their region peak's estimate (or the strongest
/// channel's). All other frames are unwrapped horizontally from their
/// predecessor using the refined frequencies of the current frame's peaks.
/// Frame 0 is treated as an onset frame unless every bin of it is known.
/// Known bins are copied verbatim and both re-anchor the vertical chain and
/// seed the horizontal recursion.
inline PhaseMatrix reconstruct_phases(const Mat<double>& mag, const PhaseMatrix* known,
                                      const OnsetSet& onsets, const StftConfig& cfg,
                                      OnsetPhaseMethod method = OnsetPhaseMethod::QI,
                                      std::uint64_t seed = 1, double peak_floor_db = -40.0) {
    cfg.validate();
    const std::size_t K = mag.rows();
    const std::size_t T = mag.cols();
    if (K != std::size_t(cfg.n_bins()) || T == 0)
        throw std::invalid_argument("reconstruct_phases: magnitude shape does not match config");
    if (known && (known->values.rows() != K || known->values.cols() != T ||
                  known->known.rows() != K || known->known.cols() != T))
        throw std::invalid_argument("reconstruct_phases: known-phase shape mismatch");

    PhaseMatrix out(K, T);
    if (known) out.known = known->known;

    std::vector<char> is_onset(T, 0);
    for (int t : onsets.frames) {
        if (t < 0 || std::size_t(t) >= T)
            throw std::invalid_argument("reconstruct_phases: onset frame out of range");
        is_onset[std::size_t(t)] = 1;
    }
    bool frame0_all_known = known != nullptr;
    if (known)
        for (std::size_t k = 0; k < K; ++k)
            if (!known->known(k, 0)) {
                frame0_all_known = false;
                break;
            }
    if (!frame0_all_known) is_onset[0] = 1;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-kPi, kPi);

    const auto known_val = [&](std::size_t k, std::size_t t) {
        return known->values(k, t);
    };
    const auto is_known = [&](std::size_t k, std::size_t t) {
        return known && known->known(k, t) != 0;
    };

    std::size_t t = 0;
    while (t < T) {
        if (!is_onset[t]) {
            std::vector<Peak> peaks = find_peaks(mag, t, peak_floor_db);
            refine_peaks(mag.col(t), K, peaks, cfg);
            const std::vector<Region> regions = regions_of_influence(peaks, K);
            const std::vector<double> ph = t == 0
                ? std::vector<double>(K, 0.0)
                : unwrap_horizontal_frame(out.values.col(t - 1), peaks, regions, K, cfg);
            for (std::size_t k = 0; k < K; ++k)
                out.values(k, t) = is_known(k, t) ? known_val(k, t) : ph[k];
            ++t;
            continue;
        }

        std::size_t b = t;
        while (b + 1 < T && is_onset[b + 1]) ++b;
        const int seg_a = int(t), seg_b = int(b);

        std::vector<std::optional<double>> attack;
        double fallback_n0 = double(cfg.hop) * seg_a;
        if (method == OnsetPhaseMethod::Imp || method == OnsetPhaseMethod::QI) {
            attack.assign(K, std::nullopt);
            double seg_max = 0.0;
            std::vector<double> channel_max(K, 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                for (int u = seg_a; u <= seg_b; ++u)
                    channel_max[k] = std::max(channel_max[k], mag(k, std::size_t(u)));
                seg_max = std::max(seg_max, channel_max[k]);
            }
            if (seg_max > 0.0) {
                const double thr = seg_max * std::pow(10.0, -50.0 / 20.0);
                std::size_t strongest = 0;
                for (std::size_t k = 0; k < K; ++k) {
                    if (channel_max[k] > channel_max[strongest]) strongest = k;
                    if (channel_max[k] >= thr)
                        attack[k] = detail::segment_attack_n0(method, mag, int(k), seg_a, seg_b, cfg);
                }
                fallback_n0 = *attack[strongest];
            }
        }

        for (std::size_t u = t; u <= b; ++u) {
            if (method == OnsetPhaseMethod::Imp || method == OnsetPhaseMethod::QI) {
                std::vector<Peak> peaks = find_peaks(mag, u, peak_floor_db);
                const std::vector<Region> regions = regions_of_influence(peaks, K);
                const std::vector<int> rchan = region_of_channel(regions, K);
                std::vector<double> n0(K, fallback_n0);
                for (std::size_t k = 0; k < K; ++k) {
                    if (attack[k]) {
                        n0[k] = *attack[k];
                        continue;
                    }
                    const Region& r = regions[std::size_t(rchan[k])];
                    if (r.peak >= 0) {
                        const std::size_t kp = std::size_t(peaks[std::size_t(r.peak)].channel);
                        if (attack[kp]) n0[k] = *attack[kp];
                    }
                }
                const std::vector<double> ph = unwrap_vertical_frame(
                    n0, int(u), cfg, known ? known->values.col(u) : nullptr,
                    known ? known->known.col(u) : nullptr);
                for (std::size_t k = 0; k < K; ++k) out.values(k, u) = ph[k];
            } else {
                std::vector<Peak> peaks = find_peaks(mag, u, peak_floor_db);
                const std::vector<Region> regions = regions_of_influence(peaks, K);
                const std::vector<int> rchan = region_of_channel(regions, K);
                std::vector<double> val(regions.size(), 0.0);
                for (std::size_t r = 0; r < regions.size(); ++r) {
                    if (method == OnsetPhaseMethod::Rand) val[r] = uni(rng);
                    else if (method == OnsetPhaseMethod::Alt) val[r] = (r % 2 == 1) ? kPi : 0.0;
                }
                for (std::size_t k = 0; k < K; ++k)
                    out.values(k, u) = is_known(k, u) ? known_val(k, u)
                                                      : val[std::size_t(rchan[k])];
            }
        }
        t = b + 1;
    }
    return out;
}

/// Result of Griffin-Lim iteration: the final spectrogram and the relative
/// inconsistency measured at the start of each iteration.
struct GriffinLimResult {
    Spectrogram spec;
    std::vector<double> trace;
};

/// Classic Griffin-Lim with known-phase support. Unknown bins start from
/// seeded uniform phases; each iteration projects onto consistent
/// spectrograms (stft of istft), records the relative inconsistency, then
/// restores the target magnitudes and re-imposes known phases. With the
/// least-squares istft the projection is orthogonal under the
/// conjugate-symmetric bin weighting, so the trace never increases.
inline GriffinLimResult griffin_lim(const Mat<double>& mag, std::size_t signal_len,
                                    const PhaseMatrix* known, int iters, std::uint64_t seed,
                                    const StftConfig& cfg) {
    cfg.validate();
    const std::size_t K = mag.rows();
    const std::size_t T = mag.cols();
    if (K != std::size_t(cfg.n_bins()) || T == 0)
        throw std::invalid_argument("griffin_lim: magnitude shape does not match config");
    if (signal_len == 0) throw std::invalid_argument("griffin_lim: signal length must be positive");
    if (iters < 0) throw std::invalid_argument("griffin_lim: iteration count must be non-negative");
    if (known && (known->values.rows() != K || known->values.cols() != T))
        throw std::invalid_argument("griffin_lim: known-phase shape mismatch");

    double den = 0.0;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) {
            const double wk = (k == 0 || k == K - 1) ? 1.0 : 2.0;
            den += wk * mag(k, t) * mag(k, t);
        }
    if (den == 0.0) throw std::invalid_argument("griffin_lim: zero magnitude spectrogram");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    Spectrogram X(cfg, signal_len, T);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) {
            const bool kn = known && known->known(k, t);
            const double ph = kn ? known->values(k, t) : uni(rng);
            X(k, t) = std::polar(mag(k, t), ph);
        }

    GriffinLimResult result{std::move(X), {}};
    result.trace.reserve(std::size_t(iters));
    for (int it = 0; it < iters; ++it) {
        const Spectrogram Y = stft(istft(result.spec), cfg);
        double num = 0.0;
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const double wk = (k == 0 || k == K - 1) ? 1.0 : 2.0;
                num += wk * std::norm(Y(k, t) - result.spec(k, t));
            }
        result.trace.push_back(std::sqrt(num / den));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const bool kn = known && known->known(k, t);
                const double ph = kn ? known->values(k, t) : std::arg(Y(k, t));
                result.spec(k, t) = std::polar(mag(k, t), ph);
            }
    }
    return result;
}

} // namespace phaseloom
