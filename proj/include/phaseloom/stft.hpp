#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "common.hpp"

namespace phaseloom {

enum class WindowKind { Hann, Rectangular };

/// Analysis/synthesis parameters. Defaults: 512-sample periodic Hann window,
/// hop 128, FFT size 512 (257 retained bins).
struct StftConfig {
    int win = 512;
    int hop = 128;
    int fft = 512;
    WindowKind window = WindowKind::Hann;

    void validate() const {
        if (win < 2) throw std::invalid_argument("stft: window length must be at least 2");
        if (hop < 1 || hop > win) throw std::invalid_argument("stft: hop must be in [1, window length]");
        if (fft < win) throw std::invalid_argument("stft: fft size must be at least the window length");
        if (fft % 2 != 0) throw std::invalid_argument("stft: fft size must be even");
    }

    int n_bins() const { return fft / 2 + 1; }

    /// Zeros prepended to the signal before framing. Frame t covers padded
    /// samples [t*hop, t*hop + win), so signal sample m sits at padded
    /// position m + lead_pad().
    int lead_pad() const { return win - hop; }

    /// Frames analysed for a signal of the given length, chosen so every
    /// original sample is covered by ceil(win/hop) frames; with a hop that
    /// divides the window length this makes the overlap-add normaliser
    /// constant across the whole signal.
    std::size_t frame_count(std::size_t len) const {
        return (std::size_t(lead_pad()) + len + std::size_t(hop) - 1) / std::size_t(hop);
    }

    std::size_t padded_len(std::size_t len) const {
        return (frame_count(len) - 1) * std::size_t(hop) + std::size_t(win);
    }
};

/// Sample the window of the given kind. Hann is the periodic variant,
/// w(n) = 0.5 (1 - cos(2 pi n / N)), so w(0) is exactly zero.
inline std::vector<double> make_window(WindowKind kind, int n) {
    if (n < 2) throw std::invalid_argument("make_window: length must be at least 2");
    std::vector<double> w(std::size_t(n), 1.0);
    if (kind == WindowKind::Hann) {
        for (int i = 0; i < n; ++i) w[std::size_t(i)] = 0.5 * (1.0 - std::cos(kTwoPi * i / n));
    }
    return w;
}

/// Discrete-time Fourier transform of a window at normalised frequency f:
/// W(f) = sum_n w(n) e^{-2 i pi f n}.
inline std::complex<double> window_transform(const std::vector<double>& w, double freq) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t n = 0; n < w.size(); ++n) {
        double ang = -kTwoPi * freq * double(n);
        acc += w[n] * std::complex<double>{std::cos(ang), std::sin(ang)};
    }
    return acc;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Batched real<->complex FFT workspace for a fixed transform size and frame
/// count. Owns aligned buffers; plans are created under the planner lock.
class FftBatch {
public:
    FftBatch(int n, int count) : n_(n), count_(count) {
        real_ = fftw_alloc_real(std::size_t(n) * std::size_t(count));
        cplx_ = fftw_alloc_complex(std::size_t(n / 2 + 1) * std::size_t(count));
        if (!real_ || !cplx_) throw std::bad_alloc();
        int dims[1] = {n};
        std::lock_guard<std::mutex> lk(fftw_planner_mutex());
        fwd_ = fftw_plan_many_dft_r2c(1, dims, count, real_, nullptr, 1, n,
                                      cplx_, nullptr, 1, n / 2 + 1, FFTW_ESTIMATE);
        bwd_ = fftw_plan_many_dft_c2r(1, dims, count, cplx_, nullptr, 1, n / 2 + 1,
                                      real_, nullptr, 1, n, FFTW_ESTIMATE);
    }

    ~FftBatch() {
        {
            std::lock_guard<std::mutex> lk(fftw_planner_mutex());
            fftw_destroy_plan(fwd_);
            fftw_destroy_plan(bwd_);
        }
        fftw_free(real_);
        fftw_free(cplx_);
    }

    FftBatch(const FftBatch&) = delete;
    FftBatch& operator=(const FftBatch&) = delete;

    int size() const { return n_; }
    int count() const { return count_; }

    double* real(int frame) { return real_ + std::size_t(frame) * std::size_t(n_); }
    std::complex<double>* cplx(int frame) {
        return reinterpret_cast<std::complex<double>*>(cplx_) +
               std::size_t(frame) * std::size_t(n_ / 2 + 1);
    }

    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }

private:
    int n_;
    int count_;
    double* real_ = nullptr;
    fftw_complex* cplx_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Per-thread single-slot workspace cache. Iterative callers (Griffin-Lim)
/// hit the same (size, count) key every call and reuse plans and buffers.
inline FftBatch& fft_batch(int n, int count) {
    thread_local std::unique_ptr<FftBatch> slot;
    if (!slot || slot->size() != n || slot->count() != count)
        slot = std::make_unique<FftBatch>(n, count);
    return *slot;
}

} // namespace detail

/// Complex spectrogram: n_bins() x frames() matrix of bins plus the analysis
/// configuration and the original signal length (needed to invert exactly).
class Spectrogram {
public:
    Spectrogram() = default;
    Spectrogram(const StftConfig& cfg, std::size_t signal_len, std::size_t frames)
        : cfg_(cfg), signal_len_(signal_len), bins_(std::size_t(cfg.n_bins()), frames) {}

    const StftConfig& config() const { return cfg_; }
    std::size_t signal_len() const { return signal_len_; }
    std::size_t n_bins() const { return bins_.rows(); }
    std::size_t frames() const { return bins_.cols(); }

    std::complex<double>& operator()(std::size_t k, std::size_t t) { return bins_(k, t); }
    const std::complex<double>& operator()(std::size_t k, std::size_t t) const { return bins_(k, t); }

    std::complex<double>* frame(std::size_t t) { return bins_.col(t); }
    const std::complex<double>* frame(std::size_t t) const { return bins_.col(t); }

    Mat<std::complex<double>>& data() { return bins_; }
    const Mat<std::complex<double>>& data() const { return bins_; }

    Mat<double> magnitude() const {
        Mat<double> m(n_bins(), frames());
        for (std::size_t t = 0; t < frames(); ++t)
            for (std::size_t k = 0; k < n_bins(); ++k) m(k, t) = std::abs(bins_(k, t));
        return m;
    }

    /// Bin phases; a zero bin reports phase 0.
    Mat<double> phase() const {
        Mat<double> p(n_bins(), frames());
        for (std::size_t t = 0; t < frames(); ++t)
            for (std::size_t k = 0; k < n_bins(); ++k) p(k, t) = std::arg(bins_(k, t));
        return p;
    }

private:
    StftConfig cfg_;
    std::size_t signal_len_ = 0;
    Mat<std::complex<double>> bins_;
};

/// Forward STFT. The signal is zero-padded by lead_pad() in front and to a
/// whole number of frames behind, so X(k, t) analyses padded samples
/// [t*hop, t*hop + win): X(k,t) = sum_n x_p(t*hop + n) w(n) e^{-2 i pi k n / fft}.
inline Spectrogram stft(const std::vector<double>& x, const StftConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw std::invalid_argument("stft: signal is empty");
    const int N = cfg.win;
    const int F = cfg.fft;
    const std::size_t S = std::size_t(cfg.hop);
    const std::size_t K = std::size_t(cfg.n_bins());
    const std::size_t lead = std::size_t(cfg.lead_pad());
    const std::size_t T = cfg.frame_count(x.size());

    const std::vector<double> w = make_window(cfg.window, N);
    auto& fft = detail::fft_batch(F, int(T));
    for (std::size_t t = 0; t < T; ++t) {
        double* fr = fft.real(int(t));
        std::fill(fr, fr + F, 0.0);
        const std::size_t base = t * S;
        for (int n = 0; n < N; ++n) {
            const std::size_t pos = base + std::size_t(n);
            if (pos < lead || pos - lead >= x.size()) continue;
            fr[n] = x[pos - lead] * w[std::size_t(n)];
        }
    }
    fft.forward();

    Spectrogram X(cfg, x.size(), T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::complex<double>* src = fft.cplx(int(t));
        std::copy(src, src + K, X.frame(t));
    }
    return X;
}

inline Spectrogram stft(const Signal& x, const StftConfig& cfg) { return stft(x.samples, cfg); }

struct IstftStats {
    std::size_t zero_norm_samples = 0;
};

/// Least-squares inverse STFT (weighted overlap-add with the analysis window,
/// normalised by the summed squared window). The imaginary parts of the DC
/// and Nyquist bins are unobservable for real frames and are ignored.
/// Samples with a zero normaliser (possible only when hop does not divide the
/// window length) are emitted as zero and counted in stats.
inline std::vector<double> istft(const Spectrogram& X, IstftStats* stats = nullptr) {
    const StftConfig& cfg = X.config();
    cfg.validate();
    if (X.frames() == 0 || X.signal_len() == 0)
        throw std::invalid_argument("istft: empty spectrogram");
    const int N = cfg.win;
    const int F = cfg.fft;
    const std::size_t S = std::size_t(cfg.hop);
    const std::size_t K = std::size_t(cfg.n_bins());
    const std::size_t lead = std::size_t(cfg.lead_pad());
    const std::size_t T = X.frames();
    const std::size_t padded = (T - 1) * S + std::size_t(N);

    const std::vector<double> w = make_window(cfg.window, N);
    auto& fft = detail::fft_batch(F, int(T));
    for (std::size_t t = 0; t < T; ++t) {
        std::complex<double>* c = fft.cplx(int(t));
        const std::complex<double>* src = X.frame(t);
        std::copy(src, src + K, c);
        c[0] = {c[0].real(), 0.0};
        c[K - 1] = {c[K - 1].real(), 0.0};
    }
    fft.backward();

    std::vector<double> num(padded, 0.0);
    std::vector<double> den(padded, 0.0);
    const double inv_f = 1.0 / double(F);
    for (std::size_t t = 0; t < T; ++t) {
        const double* fr = fft.real(int(t));
        const std::size_t base = t * S;
        for (int n = 0; n < N; ++n) {
            const double wn = w[std::size_t(n)];
            num[base + std::size_t(n)] += wn * fr[n] * inv_f;
            den[base + std::size_t(n)] += wn * wn;
        }
    }

    std::vector<double> y(X.signal_len());
    std::size_t zeros = 0;
    for (std::size_t m = 0; m < y.size(); ++m) {
        const std::size_t p = lead + m;
        if (den[p] == 0.0) {
            y[m] = 0.0;
            ++zeros;
        } else {
            y[m] = num[p] / den[p];
        }
    }
    if (stats) stats->zero_norm_samples = zeros;
    return y;
}

/// Build a spectrogram from magnitude and phase matrices of matching shape.
inline Spectrogram compose_spectrogram(const Mat<double>& mag, const Mat<double>& phase,
                                       const StftConfig& cfg, std::size_t signal_len) {
    cfg.validate();
    if (mag.rows() != phase.rows() || mag.cols() != phase.cols())
        throw std::invalid_argument("compose_spectrogram: magnitude/phase shapes differ");
    if (mag.rows() != std::size_t(cfg.n_bins()))
        throw std::invalid_argument("compose_spectrogram: row count does not match fft size");
    Spectrogram X(cfg, signal_len, mag.cols());
    for (std::size_t t = 0; t < mag.cols(); ++t)
        for (std::size_t k = 0; k < mag.rows(); ++k)
            X(k, t) = std::polar(mag(k, t), phase(k, t));
    return X;
}

} // namespace phaseloom
