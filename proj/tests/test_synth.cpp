#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "phaseloom/analysis.hpp"
#include "phaseloom/stft.hpp"
#include "phaseloom/synth.hpp"
#include "oracles.hpp"

using namespace phaseloom;

TEST_CASE("sinusoid mixture matches its defining formula") {
    const std::vector<SinusoidComponent> parts{{0.1, 0.8, 0.3}, {0.22, 0.5, -1.1}};
    const Signal s = gen_sinusoid_mixture(parts, 500, 11025);
    REQUIRE(s.samples.size() == 500);
    CHECK(s.sample_rate == 11025);
    for (std::size_t n = 0; n < 500; n += 7) {
        const double want = 0.8 * std::cos(kTwoPi * 0.1 * double(n) + 0.3) +
                            0.5 * std::cos(kTwoPi * 0.22 * double(n) - 1.1);
        CHECK(s.samples[n] == Catch::Approx(want).margin(1e-12));
    }

    CHECK_THROWS_AS(gen_sinusoid_mixture({{0.6, 1.0, 0.0}}, 100), std::invalid_argument);
    CHECK_THROWS_AS(gen_sinusoid_mixture({{0.1, -1.0, 0.0}}, 100), std::invalid_argument);
    CHECK_THROWS_AS(gen_sinusoid_mixture({{0.1, 1.0, 0.0}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_sinusoid_mixture({}, 100), std::invalid_argument);
}

TEST_CASE("vibrato phase follows the closed-form modulation integral") {
    const double fc = 0.05, depth = 0.002, fm = 4.0 / 11025.0, ph0 = 0.4;
    const Signal s = gen_vibrato(fc, depth, fm, 0.9, ph0, 4000, 11025);

    // The instantaneous frequency fc + depth cos(2 pi fm n) integrates to
    // the closed-form phase; cross-check the integral numerically (fine
    // trapezoid) at a few points, then the samples against the closed form.
    for (std::size_t n : {std::size_t(0), std::size_t(123), std::size_t(2000), std::size_t(3999)}) {
        const double closed = kTwoPi * (fc * double(n) + depth / (kTwoPi * fm) * std::sin(kTwoPi * fm * double(n)));
        double integral = 0.0;
        const int sub = 64;
        const double h = double(n) / std::max(1, int(n) * sub);
        if (n > 0) {
            const auto inst = [&](double u) { return fc + depth * std::cos(kTwoPi * fm * u); };
            double acc = 0.5 * (inst(0.0) + inst(double(n)));
            for (std::size_t i = 1; i < std::size_t(n) * sub; ++i) acc += inst(double(i) * h);
            integral = kTwoPi * acc * h;
            CHECK(closed == Catch::Approx(integral).margin(1e-6 * std::max(1.0, closed)));
        }
        CHECK(s.samples[n] == Catch::Approx(0.9 * std::cos(closed + ph0)).margin(1e-9));
    }

    CHECK_THROWS_AS(gen_vibrato(0.001, 0.002, fm, 1.0, 0.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(gen_vibrato(0.3, 0.25, fm, 1.0, 0.0, 100), std::invalid_argument);
}

TEST_CASE("zero-depth vibrato is bit-identical to the stationary sinusoid") {
    const double fc = 0.123, ph0 = -0.9;
    const Signal a = gen_vibrato(fc, 0.0, 3.0 / 11025.0, 0.7, ph0, 3000, 11025);
    const Signal b = gen_sinusoid_mixture({{fc, 0.7, ph0}}, 3000, 11025);
    bool same = true;
    for (std::size_t n = 0; n < 3000; ++n) same = same && a.samples[n] == b.samples[n];
    CHECK(same);
}

TEST_CASE("tracked vibrato frequency stays within a hundredth of a bin") {
    // Low carrier and 1% depth: quadratic interpolation of interior frames
    // must land within 1% of a bin of the instantaneous frequency at the
    // window centre.
    StftConfig cfg;
    const int rate = 11025;
    const double fc = 0.02;
    const double depth = 0.01 * fc;
    const double fm = 5.0 / rate;
    const Signal s = gen_vibrato(fc, depth, fm, 1.0, 0.2, std::size_t(1.5 * rate), rate);
    const Spectrogram X = stft(s.samples, cfg);
    const Mat<double> mag = X.magnitude();

    double worst = 0.0;
    int checked = 0;
    for (std::size_t t = 5; t + 5 < X.frames(); ++t) {
        auto peaks = find_peaks(mag, t);
        REQUIRE(peaks.size() == 1);
        const Peak p = qifft_refine(mag.col(t), X.n_bins(), peaks[0].channel, cfg);
        REQUIRE(p.refined);
        // Window centre in signal samples: frames live on the padded grid.
        const double centre = double(t) * cfg.hop + 0.5 * cfg.win - cfg.lead_pad();
        const double want = fc + depth * std::cos(kTwoPi * fm * centre);
        worst = std::max(worst, std::abs(p.freq - want) * cfg.fft);
        ++checked;
    }
    CHECK(checked > 100);
    CHECK(worst < 0.01);
}

TEST_CASE("impulse mixture and its spectrogram magnitudes") {
    const Signal s = gen_impulse_mixture({{1500, 2.0}, {4000, -1.0}}, 6000);
    CHECK(s.samples[1500] == 2.0);
    CHECK(s.samples[4000] == -1.0);
    CHECK_THROWS_AS(gen_impulse_mixture({{6000, 1.0}}, 6000), std::invalid_argument);
    CHECK_THROWS_AS(gen_impulse_mixture({{10, 1.0}, {10, 2.0}}, 100), std::invalid_argument);

    // |X(k,t)| = |a| w(n0 - hop t) for an isolated impulse, with n0 padded.
    StftConfig cfg;
    const Spectrogram X = stft(s.samples, cfg);
    const auto w = make_window(WindowKind::Hann, 512);
    const std::size_t p = 1500 + 384;
    for (std::size_t t = (p - 511) / 128; t * 128 <= p; ++t) {
        const std::size_t off = p - t * 128;
        for (std::size_t k : {std::size_t(5), std::size_t(128)})
            CHECK(std::abs(X(k, t)) == Catch::Approx(2.0 * w[off]).margin(1e-10));
    }
}

TEST_CASE("damped tone envelope, determinism and validation") {
    const double decay = 1e-3;
    const Signal a = gen_damped_tone(0.03, 5, decay, 8000, 11025, 7);
    const Signal b = gen_damped_tone(0.03, 5, decay, 8000, 11025, 7);
    const Signal c = gen_damped_tone(0.03, 5, decay, 8000, 11025, 8);
    bool same = true, differ = false;
    double energy_head = 0.0, energy_tail = 0.0;
    for (std::size_t n = 0; n < 8000; ++n) {
        same = same && a.samples[n] == b.samples[n];
        differ = differ || a.samples[n] != c.samples[n];
        if (n < 2000) energy_head += a.samples[n] * a.samples[n];
        if (n >= 6000) energy_tail += a.samples[n] * a.samples[n];
    }
    CHECK(same);
    CHECK(differ);
    // Envelope e^{-decay n}: the last quarter holds e^{-2 decay 6000} less
    // energy per sample than the first.
    CHECK(energy_tail < energy_head * std::exp(-2.0 * decay * 5000.0));

    CHECK_THROWS_AS(gen_damped_tone(0.1, 5, 1e-3, 100), std::invalid_argument);   // aliases
    CHECK_THROWS_AS(gen_damped_tone(0.03, 0, 1e-3, 100), std::invalid_argument);
    CHECK_THROWS_AS(gen_damped_tone(0.03, 5, -1.0, 100), std::invalid_argument);
}

TEST_CASE("click prototype sums to zero and starts silent") {
    const std::vector<double> c = gen_click(10);
    REQUIRE(c.size() == 10);
    CHECK(c[0] == 0.0);
    double sum = 0.0, peak = 0.0;
    for (double v : c) {
        sum += v;
        peak = std::max(peak, std::abs(v));
    }
    CHECK(std::abs(sum) < 1e-15);
    CHECK(peak > 0.1);

    // First difference of the symmetric Hann bump, shifted by the zero.
    for (int i = 1; i < 10; ++i) {
        const auto bump = [](int j) { return 0.5 * (1.0 - std::cos(kTwoPi * j / 9.0)); };
        CHECK(c[std::size_t(i)] == Catch::Approx(bump(i) - bump(i - 1)).margin(1e-12));
    }
    CHECK_THROWS_AS(gen_click(1), std::invalid_argument);
}
